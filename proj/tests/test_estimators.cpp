#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "conjure/analytic.hpp"
#include "conjure/errors.hpp"
#include "conjure/estimators.hpp"
#include "conjure/oracle.hpp"
#include "conjure/random.hpp"

using namespace conjure;

namespace {

struct GaussianPair {
  Vocabulary vocab = Vocabulary::from_labels({"a", "b"});
  GaussianConditionSpec a{(Vector(2) << 1.0, 0.0).finished(), 1.0};
  GaussianConditionSpec b{(Vector(2) << 0.0, 1.0).finished(), 1.0};
  GaussianModel model{vocab, {a, b}};
};

struct MixturePair {
  Vocabulary vocab = Vocabulary::from_labels({"left", "right"});
  GMMConditionSpec left{{{0.5, Vector::Constant(1, -1.5), 0.4}, {0.5, Vector::Constant(1, 1.5), 0.4}}};
  GMMConditionSpec right{{{0.8, Vector::Constant(1, -0.5), 0.3}, {0.2, Vector::Constant(1, 2.0), 0.6}}};
  MixtureModel model{vocab, {left, right}};
};

ScoreDifferenceTrace hand_trace() {
  ScoreDifferenceTrace t;
  t.pair = {"a", "b"};
  t.meta = {"hand", 2, 1.0, "vp-linear(beta_min=0.1,beta_max=20)/T=2"};
  t.records = {{1, Direction::Y1, {1.0, 3.0}, 11},
               {1, Direction::Y2, {2.0, 2.0}, 11},
               {2, Direction::Y1, {4.0, 0.0}, 12},
               {2, Direction::Y2, {0.0, 4.0}, 12}};
  return t;
}

constexpr Method kAll[] = {Method::Conjure, Method::KL, Method::Initial, Method::Final, Method::Output};

}  // namespace

TEST_CASE("timestep priors") {
  CHECK(TimestepPrior::uniform_all().support(3) == std::vector<std::size_t>{1, 2, 3});
  CHECK(TimestepPrior::cumulative(2).support(4) == std::vector<std::size_t>{2, 3, 4});
  CHECK(TimestepPrior::pointwise(4).support(4) == std::vector<std::size_t>{4});
  CHECK(TimestepPrior::cumulative(1).support(5) == TimestepPrior::uniform_all().support(5));
  for (const char* text : {"uniform", "cumulative:3", "pointwise:10"})
    CHECK(TimestepPrior::parse(text).to_string() == text);
  CHECK_THROWS_AS(TimestepPrior::parse("cumulative"), std::invalid_argument);
  CHECK_THROWS_AS(TimestepPrior::parse("pointwise:0"), std::invalid_argument);
  CHECK_THROWS_AS(TimestepPrior::parse("gaussian:2"), std::invalid_argument);
  CHECK_THROWS_AS(TimestepPrior::pointwise(11).support(10), std::invalid_argument);
  for (Method m : kAll) CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_method("jsd"), std::invalid_argument);
}

TEST_CASE("hand-built trace") {
  const auto est = estimate_from_trace(hand_trace(), TimestepPrior::uniform_all());
  CHECK(est.value == 4.0);
  CHECK(est.k == 2);
  CHECK(est.per_iteration == std::vector<double>{4.0, 4.0});
  CHECK(*est.std_error == 0.0);

  // pointwise(1) reads index T-1 of each record: (3 + 2) and (0 + 4)
  CHECK(estimate_from_trace(hand_trace(), TimestepPrior::pointwise(1)).value == 4.5);
  CHECK_THROWS_AS(estimate_from_trace(hand_trace(), TimestepPrior::pointwise(3)), std::invalid_argument);

  auto zero = hand_trace();
  for (auto& r : zero.records) r.sq_gaps.assign(2, 0.0);
  CHECK(estimate_from_trace(zero, TimestepPrior::uniform_all()).value == 0.0);

  auto missing = hand_trace();
  missing.records.pop_back();
  CHECK_THROWS_AS(missing.validate(), std::invalid_argument);
}

TEST_CASE("zero on identity, bitwise, for every method") {
  const DiffusionSchedule s(10);
  EstimatorOptions o;
  o.k = 4;
  const MixturePair mp;
  const GaussianPair gp;
  for (Method m : kAll) {
    CHECK(estimate(m, mp.model, mp.vocab[0], mp.vocab[0], s, o).value == 0.0);
    CHECK(estimate(m, gp.model, gp.vocab[1], gp.vocab[1], s, o).value == 0.0);
  }
  const auto trace = conjure_trace(mp.model, mp.vocab[1], mp.vocab[1], s, o);
  for (const auto& r : trace.records)
    for (double g : r.sq_gaps) CHECK(g == 0.0);
}

TEST_CASE("gaussian world closed forms") {
  const GaussianPair gp;
  const DiffusionSchedule s(10);

  // 2 * mean_t alpha_t^2 |dm|^2 / v_t^2 with v_t = 1 and |dm|^2 = 2
  double expected = 0.0;
  for (int i = 1; i <= 10; ++i) {
    const double t = 0.1 * i;
    expected += 2.0 * std::exp(-(0.1 * t + 0.5 * 19.9 * t * t));
  }
  expected = 2.0 * expected / 10.0;

  for (std::uint64_t seed : {0u, 7u, 1234u})
    for (std::size_t k : {1u, 3u, 20u}) {
      EstimatorOptions o;
      o.k = k;
      o.seed = seed;
      const auto est = conjure_distance(gp.model, gp.vocab[0], gp.vocab[1], s, o);
      CHECK(est.value == doctest::Approx(expected).epsilon(1e-12));
      for (double v : est.per_iteration) CHECK(std::abs(v - est.value) <= 1e-10);
      if (k > 1) CHECK(*est.std_error < 1e-12);
      CHECK(kl_distance(gp.model, gp.vocab[0], gp.vocab[1], s, o).value == doctest::Approx(expected / 2).epsilon(1e-12));
    }

  EstimatorOptions o;
  const double at_T = oracle::gaussian_gap(gp.a, gp.b, s, 10);
  const double at_1 = oracle::gaussian_gap(gp.a, gp.b, s, 1);
  CHECK(d_initial(gp.model, gp.vocab[0], gp.vocab[1], s, o).value == doctest::Approx(at_T).epsilon(1e-12));
  CHECK(d_final(gp.model, gp.vocab[0], gp.vocab[1], s, o).value == doctest::Approx(at_1).epsilon(1e-12));

  EstimatorOptions pointwise = o;
  pointwise.prior = TimestepPrior::pointwise(10);
  CHECK(d_initial(gp.model, gp.vocab[0], gp.vocab[1], s, o).value ==
        conjure_distance(gp.model, gp.vocab[0], gp.vocab[1], s, pointwise).value / 2.0);

  for (std::size_t substeps : {1u, 4u}) {
    o.substeps = substeps;
    const auto out = d_output(gp.model, gp.vocab[0], gp.vocab[1], s, o);
    const double oracle_gap = oracle::gaussian_output_gap(gp.a, gp.b, s, substeps);
    CHECK(out.value > 0.0);
    CHECK(out.value == doctest::Approx(oracle_gap).epsilon(1e-9));
  }
}

TEST_CASE("symmetry and determinism") {
  const MixturePair mp;
  const DiffusionSchedule s(10);
  EstimatorOptions o;
  o.k = 16;
  o.seed = 99;
  for (Method m : {Method::Conjure, Method::Initial, Method::Final, Method::Output}) {
    const auto ab = estimate(m, mp.model, mp.vocab[0], mp.vocab[1], s, o);
    const auto ba = estimate(m, mp.model, mp.vocab[1], mp.vocab[0], s, o);
    CHECK(ab.value == ba.value);
    CHECK(ab.per_iteration == ba.per_iteration);
  }

  const auto one = conjure_distance(mp.model, mp.vocab[0], mp.vocab[1], s, o);
  o.threads = 3;
  const auto three = conjure_distance(mp.model, mp.vocab[0], mp.vocab[1], s, o);
  CHECK(one.per_iteration == three.per_iteration);
  CHECK(one.value == three.value);

  for (double v : one.per_iteration) CHECK(v >= 0.0);
  o.seed = 100;
  CHECK(conjure_distance(mp.model, mp.vocab[0], mp.vocab[1], s, o).value != one.value);
}

TEST_CASE("trace reduction is the estimator") {
  const MixturePair mp;
  const DiffusionSchedule s(10);
  EstimatorOptions o;
  o.k = 8;
  o.seed = 5;
  const auto trace = conjure_trace(mp.model, mp.vocab[0], mp.vocab[1], s, o);
  CHECK_NOTHROW(trace.validate());
  CHECK(trace.iterations() == 8);
  CHECK(trace.records.size() == 16);
  CHECK(trace.meta.steps == 10);
  CHECK(trace.meta.schedule == s.id());
  CHECK(trace.records[0].seed == derive_seed(5, 0));

  for (const auto& prior : {TimestepPrior::uniform_all(), TimestepPrior::cumulative(5), TimestepPrior::pointwise(2)}) {
    o.prior = prior;
    const auto direct = conjure_distance(mp.model, mp.vocab[0], mp.vocab[1], s, o);
    const auto replay = estimate_from_trace(trace, prior);
    CHECK(direct.value == replay.value);
    CHECK(direct.per_iteration == replay.per_iteration);
    CHECK(direct.std_error == replay.std_error);
  }
}

TEST_CASE("final-step gap agrees with quadrature at t_1") {
  const MixturePair mp;
  const DiffusionSchedule s(10);
  EstimatorOptions o;
  o.k = 400;
  o.seed = 21;
  o.substeps = 50;
  const auto est = d_final(mp.model, mp.vocab[0], mp.vocab[1], s, o);
  // symmetric weighting integrates against p1 + p2, d_final averages the two
  const double oracle_value = 0.5 * oracle::gmm_expected_gap(mp.left, mp.right, s, TimestepPrior::pointwise(1));
  const auto report = oracle::compare_statistical("d_final", oracle_value, est, 3.0);
  MESSAGE("d_final " << est.value << " +- " << *est.std_error << " vs " << oracle_value);
  CHECK(report.pass);
}

TEST_CASE("argument checks") {
  const GaussianPair gp;
  const DiffusionSchedule s(10);
  EstimatorOptions o;
  o.k = 0;
  CHECK_THROWS_AS(conjure_distance(gp.model, gp.vocab[0], gp.vocab[1], s, o), std::invalid_argument);
  o.k = 2;
  o.prior = TimestepPrior::cumulative(12);
  CHECK_THROWS_AS(conjure_distance(gp.model, gp.vocab[0], gp.vocab[1], s, o), std::invalid_argument);
  o.prior = TimestepPrior::uniform_all();
  // the model rejects the prompt; the estimator reports it with the step
  CHECK_THROWS_AS(conjure_distance(gp.model, gp.vocab[0], ConditionId{42, "nope"}, s, o), ModelError);
}
