#include "conjure/alignment.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "conjure/errors.hpp"
#include "conjure/stats.hpp"

namespace conjure {

double alignment_score(const std::vector<double>& distances, const std::vector<double>& similarities) {
  std::vector<double> negated(distances.size());
  std::transform(distances.begin(), distances.end(), negated.begin(), [](double d) { return -d; });
  return 100.0 * spearman(negated, similarities);
}

double evaluate_alignment(const SemanticWorld& world, const SimilarityMatrix& matrix) {
  if (matrix.size() != world.size()) throw std::invalid_argument("matrix and world sizes differ");
  std::vector<double> d, sim;
  for (std::size_t i = 0; i < world.size(); ++i)
    for (std::size_t j = i + 1; j < world.size(); ++j) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto c = static_cast<Eigen::Index>(j);
      // asymmetric methods are scored on the symmetrized pair value
      d.push_back(0.5 * (matrix.values(r, c) + matrix.values(c, r)));
      sim.push_back(-world.ground_truth(r, c));
    }
  return alignment_score(d, sim);
}

double evaluate_alignment(const SemanticWorld& world, const ConditionalScoreModel& model, Method method,
                          const DiffusionSchedule& schedule, const EstimatorOptions& options) {
  return evaluate_alignment(world, pairwise_matrix(model, world.vocabulary, method, schedule, options));
}

namespace {

ScoreDifferenceTrace truncate(const ScoreDifferenceTrace& trace, std::size_t k) {
  ScoreDifferenceTrace out = trace;
  out.records.clear();
  for (const auto& r : trace.records)
    if (r.iter <= k) out.records.push_back(r);
  return out;
}

}  // namespace

std::vector<double> trace_distances(const AnnotatedPairDataset& dataset, const TraceSet& traces,
                                    const TimestepPrior& prior, std::size_t max_iterations) {
  std::vector<double> out;
  out.reserve(dataset.size());
  for (const auto& row : dataset.rows) {
    auto it = traces.find({row.text_a, row.text_b});
    if (it == traces.end()) it = traces.find({row.text_b, row.text_a});
    if (it == traces.end())
      throw Error("no trace for dataset line " + std::to_string(row.line) + " (" + row.text_a + " | " + row.text_b + ")");
    const auto& trace = it->second;
    if (max_iterations > trace.iterations())
      throw std::invalid_argument("trace for (" + trace.pair[0] + ", " + trace.pair[1] + ") has only " +
                                  std::to_string(trace.iterations()) + " iterations, " +
                                  std::to_string(max_iterations) + " requested");
    if (max_iterations > 0 && max_iterations < trace.iterations()) {
      out.push_back(estimate_from_trace(truncate(trace, max_iterations), prior).value);
    } else {
      out.push_back(estimate_from_trace(trace, prior).value);
    }
  }
  return out;
}

double evaluate_alignment(const AnnotatedPairDataset& dataset, const TraceSet& traces, const TimestepPrior& prior) {
  std::vector<double> sim;
  for (const auto& row : dataset.rows) sim.push_back(row.score);
  return alignment_score(trace_distances(dataset, traces, prior), sim);
}

AblationParameter parse_ablation_parameter(const std::string& name) {
  if (name == "prior") return AblationParameter::Prior;
  if (name == "k") return AblationParameter::K;
  if (name == "T") return AblationParameter::T;
  throw std::invalid_argument("unknown ablation parameter '" + name + "' (expected prior, k or T)");
}

std::string to_string(AblationParameter p) {
  switch (p) {
    case AblationParameter::Prior:
      return "prior";
    case AblationParameter::K:
      return "k";
    case AblationParameter::T:
      return "T";
  }
  return "prior";
}

double AblationReport::spread() const {
  if (scores.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  return *hi - *lo;
}

std::size_t AblationReport::best() const {
  return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

namespace {

std::size_t parse_count(const std::string& s, const char* what) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || v < 1) throw std::invalid_argument(std::string(what) + " value '" + s + "' must be a positive integer");
  return static_cast<std::size_t>(v);
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

AblationReport ablate(AblationParameter parameter, const std::vector<std::string>& values,
                      const SemanticWorld& world, const ConditionalScoreModel& model, Method method,
                      const DiffusionSchedule& base_schedule, const EstimatorOptions& options) {
  if (values.size() < 2) throw std::invalid_argument("an ablation needs at least two values");
  AblationReport report;
  report.parameter = to_string(parameter);
  report.values = values;
  for (const auto& v : values) {
    EstimatorOptions opts = options;
    std::size_t steps = base_schedule.steps();
    switch (parameter) {
      case AblationParameter::Prior:
        opts.prior = TimestepPrior::parse(v);
        break;
      case AblationParameter::K:
        opts.k = parse_count(v, "k");
        break;
      case AblationParameter::T:
        steps = parse_count(v, "T");
        break;
    }
    const DiffusionSchedule schedule(steps, base_schedule.beta_min(), base_schedule.beta_max());
    const auto start = Clock::now();
    auto matrix = pairwise_matrix(model, world.vocabulary, method, schedule, opts);
    report.scores.push_back(evaluate_alignment(world, matrix));
    report.runtimes.push_back(seconds_since(start));
    report.matrices.push_back(std::move(matrix));
  }
  return report;
}

AblationReport ablate(AblationParameter parameter, const std::vector<std::string>& values,
                      const AnnotatedPairDataset& dataset, const TraceSet& traces, const TimestepPrior& prior) {
  if (values.size() < 2) throw std::invalid_argument("an ablation needs at least two values");
  if (parameter == AblationParameter::T) throw std::invalid_argument("T cannot be ablated on fixed traces");
  std::vector<double> sim;
  for (const auto& row : dataset.rows) sim.push_back(row.score);
  AblationReport report;
  report.parameter = to_string(parameter);
  report.values = values;
  for (const auto& v : values) {
    const auto start = Clock::now();
    std::vector<double> d;
    if (parameter == AblationParameter::Prior) {
      d = trace_distances(dataset, traces, TimestepPrior::parse(v));
    } else {
      d = trace_distances(dataset, traces, prior, parse_count(v, "k"));
    }
    report.scores.push_back(alignment_score(d, sim));
    report.runtimes.push_back(seconds_since(start));
  }
  return report;
}

}  // namespace conjure
