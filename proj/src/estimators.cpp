#include "conjure/estimators.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <stdexcept>

#include "conjure/guidance.hpp"
#include "conjure/parallel.hpp"
#include "conjure/random.hpp"
#include "conjure/sde.hpp"

namespace conjure {

TimestepPrior TimestepPrior::cumulative(std::size_t start) {
  if (start == 0) throw std::invalid_argument("cumulative prior start must be >= 1");
  return start == 1 ? uniform_all() : TimestepPrior(Kind::Cumulative, start);
}

TimestepPrior TimestepPrior::pointwise(std::size_t step) {
  if (step == 0) throw std::invalid_argument("pointwise prior step must be >= 1");
  return TimestepPrior(Kind::Pointwise, step);
}

TimestepPrior TimestepPrior::parse(std::string_view text) {
  if (text == "uniform" || text == "uniform-all") return uniform_all();
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("unknown prior '" + std::string(text) + "'");
  const auto kind = text.substr(0, colon);
  const auto num = text.substr(colon + 1);
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), value);
  if (ec != std::errc() || ptr != num.data() + num.size())
    throw std::invalid_argument("bad prior step in '" + std::string(text) + "'");
  if (kind == "cumulative") return cumulative(value);
  if (kind == "pointwise") return pointwise(value);
  throw std::invalid_argument("unknown prior '" + std::string(text) + "'");
}

std::vector<std::size_t> TimestepPrior::support(std::size_t steps) const {
  if (start_ > steps)
    throw std::invalid_argument("prior " + to_string() + " lies outside 1.." + std::to_string(steps));
  if (kind_ == Kind::Pointwise) return {start_};
  std::vector<std::size_t> out;
  for (std::size_t s = start_; s <= steps; ++s) out.push_back(s);
  return out;
}

std::string TimestepPrior::to_string() const {
  switch (kind_) {
    case Kind::UniformAll:
      return "uniform";
    case Kind::Cumulative:
      return "cumulative:" + std::to_string(start_);
    case Kind::Pointwise:
      return "pointwise:" + std::to_string(start_);
  }
  return "uniform";
}

std::string to_string(Method method) {
  switch (method) {
    case Method::Conjure:
      return "conjure";
    case Method::KL:
      return "kl";
    case Method::Initial:
      return "initial";
    case Method::Final:
      return "final";
    case Method::Output:
      return "output";
  }
  return "conjure";
}

Method parse_method(std::string_view text) {
  static const std::map<std::string_view, Method> names{{"conjure", Method::Conjure}, {"kl", Method::KL},
                                                        {"initial", Method::Initial}, {"final", Method::Final},
                                                        {"output", Method::Output}};
  const auto it = names.find(text);
  if (it == names.end()) throw std::invalid_argument("unknown method '" + std::string(text) + "'");
  return it->second;
}

bool is_symmetric(Method method) { return method != Method::KL; }

DistanceEstimate summarize(std::vector<double> per_iteration, const TimestepPrior& prior,
                           std::pair<std::string, std::string> pair, Method method) {
  if (per_iteration.empty()) throw std::invalid_argument("estimate needs at least one iteration");
  DistanceEstimate est;
  est.k = per_iteration.size();
  double sum = 0.0;
  for (double v : per_iteration) sum += v;
  est.value = sum / static_cast<double>(est.k);
  if (est.k >= 2) {
    double ss = 0.0;
    for (double v : per_iteration) ss += (v - est.value) * (v - est.value);
    est.std_error = std::sqrt(ss / static_cast<double>(est.k - 1)) / std::sqrt(static_cast<double>(est.k));
  }
  est.per_iteration = std::move(per_iteration);
  est.prior = prior;
  est.pair = std::move(pair);
  est.method = method;
  return est;
}

std::size_t ScoreDifferenceTrace::iterations() const {
  std::size_t k = 0;
  for (const auto& r : records) k = std::max(k, r.iter);
  return k;
}

const std::vector<double>& ScoreDifferenceTrace::gaps(std::size_t iter, Direction dir) const {
  for (const auto& r : records)
    if (r.iter == iter && r.dir == dir) return r.sq_gaps;
  throw std::invalid_argument("trace has no record for iteration " + std::to_string(iter) + " direction " +
                              (dir == Direction::Y1 ? "y1" : "y2"));
}

void ScoreDifferenceTrace::validate() const {
  if (records.empty()) throw std::invalid_argument("trace has no records");
  if (meta.steps == 0) throw std::invalid_argument("trace meta.T must be >= 1");
  const std::size_t k = iterations();
  std::vector<std::array<int, 2>> seen(k + 1, {0, 0});
  for (const auto& r : records) {
    if (r.iter == 0) throw std::invalid_argument("trace iterations are 1-based");
    if (r.sq_gaps.size() != meta.steps)
      throw std::invalid_argument("iteration " + std::to_string(r.iter) + " has " + std::to_string(r.sq_gaps.size()) +
                                  " gaps, expected T=" + std::to_string(meta.steps));
    for (double g : r.sq_gaps)
      if (!std::isfinite(g) || g < 0.0)
        throw std::invalid_argument("iteration " + std::to_string(r.iter) + " has a non-finite or negative gap");
    ++seen[r.iter][r.dir == Direction::Y1 ? 0 : 1];
  }
  for (std::size_t i = 1; i <= k; ++i) {
    if (seen[i][0] != 1 || seen[i][1] != 1)
      throw std::invalid_argument("iteration " + std::to_string(i) + " needs exactly one y1 and one y2 record");
  }
}

namespace {

double prior_average(const std::vector<double>& gaps, const std::vector<std::size_t>& support) {
  const std::size_t T = gaps.size();
  double sum = 0.0;
  for (std::size_t step : support) sum += gaps[T - step];
  return sum / static_cast<double>(support.size());
}

struct IterationDraw {
  std::uint64_t seed;
  Vector xT;
  Eigen::MatrixXd noise;
};

IterationDraw draw_iteration(std::uint64_t master, std::size_t iter, std::size_t dim, std::size_t steps,
                             std::size_t draws_per_step) {
  IterationDraw d;
  d.seed = derive_seed(master, iter);
  Rng rng(d.seed);
  d.xT = standard_normal(static_cast<Eigen::Index>(dim), rng);
  d.noise = draw_noise(dim, steps, draws_per_step, rng);
  return d;
}

// Gaps along `traj` between its own recorded score and the other prompt's.
std::vector<double> trajectory_gaps(const Trajectory& traj, const ConditionalScoreModel& model,
                                    const ConditionId& other, const DiffusionSchedule& schedule) {
  const std::size_t T = traj.steps();
  std::vector<double> gaps(T);
  for (std::size_t j = 0; j < T; ++j) {
    const std::size_t step = T - j;
    const TimePoint tp = schedule.at(step);
    Vector s_other;
    try {
      s_other = model.score(traj.states[j], tp, other);
    } catch (const ModelError&) {
      throw;
    } catch (const std::exception& e) {
      throw ModelError(e.what(), step);
    }
    gaps[j] = (traj.scores[j] - s_other).squaredNorm();
  }
  return gaps;
}

void check_options(const EstimatorOptions& options, const DiffusionSchedule& schedule) {
  if (options.k == 0) throw std::invalid_argument("k must be >= 1");
  (void)options.prior.support(schedule.steps());
}

struct PairedIteration {
  Trajectory a;  // denoised under y1
  Trajectory b;  // denoised under y2
};

PairedIteration paired_run(const ConditionalScoreModel& model, const ConditionId& y1, const ConditionId& y2,
                           const DiffusionSchedule& schedule, const EulerMaruyama& sampler, const IterationDraw& draw) {
  return {reverse_denoise(draw.xT, y1, model, schedule, draw.noise, sampler, draw.seed),
          reverse_denoise(draw.xT, y2, model, schedule, draw.noise, sampler, draw.seed)};
}

std::pair<std::string, std::string> labels(const ConditionId& y1, const ConditionId& y2) {
  return {y1.display, y2.display};
}

}  // namespace

ScoreDifferenceTrace conjure_trace(const ConditionalScoreModel& model, const ConditionId& y1, const ConditionId& y2,
                                   const DiffusionSchedule& schedule, const EstimatorOptions& options,
                                   double guidance) {
  check_options(options, schedule);
  const EulerMaruyama sampler(options.substeps);
  ScoreDifferenceTrace trace;
  trace.pair = {y1.display, y2.display};
  trace.meta = {model.name(), schedule.steps(), guidance, schedule.id()};
  if (const auto* guided = dynamic_cast<const GuidedModel*>(&model)) trace.meta.guidance = guided->guidance_scale();
  trace.records.resize(2 * options.k);

  parallel_for(options.k, options.threads, [&](std::size_t i) {
    const IterationDraw draw = draw_iteration(options.seed, i, model.dim(), schedule.steps(), sampler.draws_per_step());
    const PairedIteration run = paired_run(model, y1, y2, schedule, sampler, draw);
    trace.records[2 * i] = {i + 1, Direction::Y1, trajectory_gaps(run.a, model, y2, schedule), draw.seed};
    trace.records[2 * i + 1] = {i + 1, Direction::Y2, trajectory_gaps(run.b, model, y1, schedule), draw.seed};
  });
  return trace;
}

DistanceEstimate estimate_from_trace(const ScoreDifferenceTrace& trace, const TimestepPrior& prior) {
  trace.validate();
  const auto support = prior.support(trace.meta.steps);
  const std::size_t k = trace.iterations();
  std::vector<double> per_iteration(k);
  for (std::size_t i = 1; i <= k; ++i) {
    const double a = prior_average(trace.gaps(i, Direction::Y1), support);
    const double b = prior_average(trace.gaps(i, Direction::Y2), support);
    per_iteration[i - 1] = a + b;
  }
  return summarize(std::move(per_iteration), prior, {trace.pair[0], trace.pair[1]}, Method::Conjure);
}

DistanceEstimate conjure_distance(const ConditionalScoreModel& model, const ConditionId& y1, const ConditionId& y2,
                                  const DiffusionSchedule& schedule, const EstimatorOptions& options) {
  return estimate_from_trace(conjure_trace(model, y1, y2, schedule, options), options.prior);
}

DistanceEstimate kl_distance(const ConditionalScoreModel& model, const ConditionId& y1, const ConditionId& y2,
                             const DiffusionSchedule& schedule, const EstimatorOptions& options) {
  check_options(options, schedule);
  const EulerMaruyama sampler(options.substeps);
  const auto support = options.prior.support(schedule.steps());
  std::vector<double> per_iteration(options.k);
  parallel_for(options.k, options.threads, [&](std::size_t i) {
    const IterationDraw draw = draw_iteration(options.seed, i, model.dim(), schedule.steps(), sampler.draws_per_step());
    const Trajectory traj = reverse_denoise(draw.xT, y1, model, schedule, draw.noise, sampler, draw.seed);
    per_iteration[i] = prior_average(trajectory_gaps(traj, model, y2, schedule), support);
  });
  return summarize(std::move(per_iteration), options.prior, labels(y1, y2), Method::KL);
}

DistanceEstimate d_initial(const ConditionalScoreModel& model, const ConditionId& y1, const ConditionId& y2,
                           const DiffusionSchedule& schedule, const EstimatorOptions& options) {
  if (options.k == 0) throw std::invalid_argument("k must be >= 1");
  const std::size_t T = schedule.steps();
  const TimePoint tp = schedule.at(T);
  std::vector<double> per_iteration(options.k);
  parallel_for(options.k, options.threads, [&](std::size_t i) {
    Rng rng(derive_seed(options.seed, i));
    const Vector x = standard_normal(static_cast<Eigen::Index>(model.dim()), rng);
    try {
      per_iteration[i] = (model.score(x, tp, y1) - model.score(x, tp, y2)).squaredNorm();
    } catch (const std::exception& e) {
      throw ModelError(e.what(), T);
    }
  });
  return summarize(std::move(per_iteration), TimestepPrior::pointwise(T), labels(y1, y2), Method::Initial);
}

DistanceEstimate d_final(const ConditionalScoreModel& model, const ConditionId& y1, const ConditionId& y2,
                         const DiffusionSchedule& schedule, const EstimatorOptions& options) {
  if (options.k == 0) throw std::invalid_argument("k must be >= 1");
  const EulerMaruyama sampler(options.substeps);
  const TimePoint tp = schedule.at(1);
  std::vector<double> per_iteration(options.k);
  parallel_for(options.k, options.threads, [&](std::size_t i) {
    const IterationDraw draw = draw_iteration(options.seed, i, model.dim(), schedule.steps(), sampler.draws_per_step());
    const PairedIteration run = paired_run(model, y1, y2, schedule, sampler, draw);
    const std::size_t last = schedule.steps() - 1;
    const double ga = (run.a.scores[last] - model.score(run.a.states[last], tp, y2)).squaredNorm();
    const double gb = (model.score(run.b.states[last], tp, y1) - run.b.scores[last]).squaredNorm();
    per_iteration[i] = 0.5 * (ga + gb);
  });
  return summarize(std::move(per_iteration), TimestepPrior::pointwise(1), labels(y1, y2), Method::Final);
}

DistanceEstimate d_output(const ConditionalScoreModel& model, const ConditionId& y1, const ConditionId& y2,
                          const DiffusionSchedule& schedule, const EstimatorOptions& options) {
  if (options.k == 0) throw std::invalid_argument("k must be >= 1");
  const EulerMaruyama sampler(options.substeps);
  std::vector<double> per_iteration(options.k);
  parallel_for(options.k, options.threads, [&](std::size_t i) {
    const IterationDraw draw = draw_iteration(options.seed, i, model.dim(), schedule.steps(), sampler.draws_per_step());
    const PairedIteration run = paired_run(model, y1, y2, schedule, sampler, draw);
    per_iteration[i] = (run.a.states.back() - run.b.states.back()).squaredNorm();
  });
  return summarize(std::move(per_iteration), TimestepPrior::uniform_all(), labels(y1, y2), Method::Output);
}

DistanceEstimate estimate(Method method, const ConditionalScoreModel& model, const ConditionId& y1,
                          const ConditionId& y2, const DiffusionSchedule& schedule, const EstimatorOptions& options) {
  switch (method) {
    case Method::Conjure:
      return conjure_distance(model, y1, y2, schedule, options);
    case Method::KL:
      return kl_distance(model, y1, y2, schedule, options);
    case Method::Initial:
      return d_initial(model, y1, y2, schedule, options);
    case Method::Final:
      return d_final(model, y1, y2, schedule, options);
    case Method::Output:
      return d_output(model, y1, y2, schedule, options);
  }
  throw std::invalid_argument("unknown method");
}

}  // namespace conjure
