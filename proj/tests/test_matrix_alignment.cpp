#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "conjure/alignment.hpp"
#include "conjure/errors.hpp"
#include "conjure/matrix.hpp"
#include "conjure/trace_io.hpp"
#include "conjure/world.hpp"

using namespace conjure;
namespace fs = std::filesystem;

namespace {

class CountingModel final : public ConditionalScoreModel {
 public:
  explicit CountingModel(const ConditionalScoreModel& base) : base_(base) {}
  std::size_t dim() const override { return base_.dim(); }
  Vector score(const Vector& x, const TimePoint& tp, const ConditionId& y) const override {
    ++calls;
    return base_.score(x, tp, y);
  }
  std::string name() const override { return "counting"; }
  mutable std::atomic<std::size_t> calls{0};

 private:
  const ConditionalScoreModel& base_;
};

class FailsOn final : public ConditionalScoreModel {
 public:
  FailsOn(const ConditionalScoreModel& base, int bad) : base_(base), bad_(bad) {}
  std::size_t dim() const override { return base_.dim(); }
  Vector score(const Vector& x, const TimePoint& tp, const ConditionId& y) const override {
    if (y.id == bad_) throw std::runtime_error("no such prompt in the backend");
    return base_.score(x, tp, y);
  }
  std::string name() const override { return "fails"; }

 private:
  const ConditionalScoreModel& base_;
  int bad_;
};

EstimatorOptions options(std::size_t k = 5, std::uint64_t seed = 0) {
  EstimatorOptions o;
  o.k = k;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("pairwise matrix") {
  const SemanticWorld world = default8_world();
  const GaussianModel model = world.analytic_model();
  const DiffusionSchedule s(10);

  SUBCASE("two prompts need one estimator call") {
    const Vocabulary two = Vocabulary({world.vocabulary[0], world.vocabulary[5]});
    CountingModel once(model);
    conjure_distance(once, two[0], two[1], s, options());
    CountingModel matrix(model);
    const auto m = pairwise_matrix(matrix, two, Method::Conjure, s, options());
    CHECK(matrix.calls == once.calls);
    CHECK(m.values(0, 1) == m.values(1, 0));
    CHECK(m.values(0, 0) == 0.0);
  }

  SUBCASE("symmetric, zero diagonal, reproducible, thread independent") {
    for (Method method : {Method::Conjure, Method::Initial, Method::Final, Method::Output}) {
      const auto a = pairwise_matrix(model, world.vocabulary, method, s, options());
      auto o = options();
      o.threads = 4;
      const auto b = pairwise_matrix(model, world.vocabulary, method, s, o);
      CHECK(a.values == b.values);
      CHECK(a.values == a.values.transpose());
      CHECK(a.values.diagonal().isZero(0.0));
      CHECK(a.values.minCoeff() >= 0.0);
      CHECK(a.method == method);
    }
  }

  SUBCASE("clusters separate") {
    for (Method method : {Method::Conjure, Method::Output}) {
      const auto m = pairwise_matrix(model, world.vocabulary, method, s, options());
      const auto stats = cluster_stats(m, world.cluster);
      CHECK(stats.within_mean < stats.between_mean);
    }
  }

  SUBCASE("kl fills both triangles") {
    const auto m = pairwise_matrix(model, world.vocabulary, Method::KL, s, options());
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) {
        if (i == j) continue;
        const auto& yi = world.vocabulary[i];
        const auto& yj = world.vocabulary[j];
        CHECK(m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
              kl_distance(model, yi, yj, s, options()).value);
      }
  }

  SUBCASE("failures name the pair") {
    const FailsOn broken(model, world.vocabulary.by_label("tabby").id);
    try {
      pairwise_matrix(broken, world.vocabulary, Method::Conjure, s, options());
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("tabby") != std::string::npos);
    }
  }

  SUBCASE("csv and svg") {
    const auto m = pairwise_matrix(model, world.vocabulary, Method::Conjure, s, options(2));
    std::ostringstream csv;
    write_matrix_csv(csv, m);
    std::istringstream lines(csv.str());
    std::string header;
    std::getline(lines, header);
    CHECK(header == "label,puppy,poodle,kitten,tabby,sedan,coupe,bicycle,tandem");
    std::string row;
    std::getline(lines, row);
    CHECK(row.rfind("puppy,0,", 0) == 0);

    const fs::path svg = fs::temp_directory_path() / "conjure_matrix_test.svg";
    write_matrix_svg(svg, m);
    std::ifstream in(svg);
    std::string first;
    std::getline(in, first);
    CHECK(first.find("<svg") != std::string::npos);
    fs::remove(svg);
  }

  CHECK_THROWS_AS(pairwise_matrix(model, Vocabulary({world.vocabulary[0]}), Method::Conjure, s, options()),
                  std::invalid_argument);
}

TEST_CASE("alignment against ground truth") {
  const SemanticWorld world = default8_world();

  SimilarityMatrix exact{world.vocabulary, world.ground_truth, Method::Conjure, "ground truth"};
  CHECK(evaluate_alignment(world, exact) == doctest::Approx(100.0));

  SUBCASE("depends on ranks only") {
    const auto m = pairwise_matrix(world.analytic_model(), world.vocabulary, Method::Conjure, DiffusionSchedule(10),
                                   options());
    const double base = evaluate_alignment(world, m);
    SimilarityMatrix t = m;
    t.values = m.values.array().cube();
    CHECK(evaluate_alignment(world, t) == base);
    t.values = 8.0 * m.values;
    CHECK(evaluate_alignment(world, t) == base);
    t.values = (m.values.array() + 1.0).log();
    CHECK(evaluate_alignment(world, t) == base);
  }

  SimilarityMatrix reversed = exact;
  reversed.values = -exact.values;
  CHECK(evaluate_alignment(world, reversed) == doctest::Approx(-100.0));

  const GaussianModel model = world.analytic_model();
  const DiffusionSchedule s(10);
  CHECK(evaluate_alignment(world, model, Method::Conjure, s, options()) > 99.0);

  CHECK(alignment_score({1.0, 2.0, 3.0}, {3.0, 2.0, 1.0}) == doctest::Approx(100.0));
}

TEST_CASE("ablations") {
  const SemanticWorld world = default8_world();
  const GaussianModel model = world.analytic_model();
  const DiffusionSchedule s(10);

  const auto report = ablate(AblationParameter::Prior, {"uniform", "cumulative:5", "pointwise:10"}, world, model,
                             Method::Conjure, s, options());
  CHECK(report.parameter == "prior");
  CHECK(report.scores.size() == 3);
  CHECK(report.runtimes.size() == 3);
  CHECK(report.matrices.size() == 3);
  const auto again = ablate(AblationParameter::Prior, {"uniform", "cumulative:5", "pointwise:10"}, world, model,
                            Method::Conjure, s, options());
  CHECK(again.scores == report.scores);
  CHECK(report.spread() >= 0.0);
  CHECK(report.best() < 3);

  const auto by_t = ablate(AblationParameter::T, {"5", "10", "20"}, world, model, Method::Conjure, s, options());
  CHECK(rank_stability(by_t.matrices) > 0.9);
  CHECK(rank_stability({by_t.matrices[0], by_t.matrices[0]}) == doctest::Approx(1.0));

  CHECK_THROWS_AS(ablate(AblationParameter::K, {"3"}, world, model, Method::Conjure, s, options()),
                  std::invalid_argument);
  CHECK_THROWS_AS(ablate(AblationParameter::K, {"3", "zero"}, world, model, Method::Conjure, s, options()),
                  std::invalid_argument);
  CHECK(parse_ablation_parameter("T") == AblationParameter::T);
  CHECK_THROWS_AS(parse_ablation_parameter("seed"), std::invalid_argument);
}

TEST_CASE("trace-backed evaluation") {
  const SemanticWorld world = default8_world();
  const GaussianModel model = world.analytic_model();
  const DiffusionSchedule s(10);
  const fs::path dir = fs::temp_directory_path() / "conjure_alignment_traces";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // dataset rows with similarity falling in ground-truth distance; every other pair reversed
  std::ostringstream tsv;
  const double max_gt = world.ground_truth.maxCoeff();
  std::size_t row = 0;
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = i + 1; j < 8; ++j, ++row) {
      const auto& a = world.vocabulary[i];
      const auto& b = world.vocabulary[j];
      write_trace(dir / trace_file_name(a.display, b.display), conjure_trace(model, a, b, s, options()));
      const double sim = 5.0 * (1.0 - world.ground_truth(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) / max_gt);
      if (row % 2) tsv << b.display << '\t' << a.display << '\t' << sim << '\n';
      else tsv << a.display << '\t' << b.display << '\t' << sim << '\n';
    }
  std::istringstream in(tsv.str());
  const auto ds = load_pairs_tsv(in, "world-pairs");
  const auto traces = load_trace_directory(dir);
  CHECK(traces.size() == 28);

  const double from_traces = evaluate_alignment(ds, traces, TimestepPrior::uniform_all());
  const double from_model = evaluate_alignment(world, model, Method::Conjure, s, options());
  CHECK(from_traces == doctest::Approx(from_model).epsilon(5e-3));

  const auto dist = trace_distances(ds, traces, TimestepPrior::uniform_all());
  CHECK(dist.size() == 28);
  CHECK(dist[0] == conjure_distance(model, world.vocabulary[0], world.vocabulary[1], s, options()).value);

  const auto by_k = ablate(AblationParameter::K, {"1", "3", "5"}, ds, traces, TimestepPrior::uniform_all());
  CHECK(by_k.scores.size() == 3);
  CHECK(by_k.scores[2] == from_traces);
  CHECK_THROWS_AS(ablate(AblationParameter::K, {"1", "6"}, ds, traces, TimestepPrior::uniform_all()),
                  std::invalid_argument);
  CHECK_THROWS_AS(ablate(AblationParameter::T, {"5", "10"}, ds, traces, TimestepPrior::uniform_all()),
                  std::invalid_argument);

  std::istringstream extra(tsv.str() + "puppy\tzebra\t3\n");
  CHECK_THROWS_AS(evaluate_alignment(load_pairs_tsv(extra), traces, TimestepPrior::uniform_all()), Error);
  fs::remove_all(dir);
}
