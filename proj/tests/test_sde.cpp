#include <cmath>
#include <limits>
#include <stdexcept>

#include <doctest.h>

#include "conjure/analytic.hpp"
#include "conjure/errors.hpp"
#include "conjure/oracle.hpp"
#include "conjure/random.hpp"
#include "conjure/schedule.hpp"
#include "conjure/sde.hpp"

using namespace conjure;

namespace {

GaussianModel single_target(Vector mean, double scale) {
  return GaussianModel(Vocabulary::from_labels({"target"}), {GaussianConditionSpec{std::move(mean), scale}});
}

class NanModel final : public ConditionalScoreModel {
 public:
  std::size_t dim() const override { return 2; }
  Vector score(const Vector& x, const TimePoint& tp, const ConditionId&) const override {
    Vector s = -x;
    if (tp.step == 7) s[1] = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  std::string name() const override { return "nan"; }
};

class ThrowingModel final : public ConditionalScoreModel {
 public:
  std::size_t dim() const override { return 2; }
  Vector score(const Vector&, const TimePoint& tp, const ConditionId&) const override {
    if (tp.step == 3) throw std::runtime_error("backend gone");
    return Vector::Zero(2);
  }
  std::string name() const override { return "throwing"; }
};

}  // namespace

TEST_CASE("schedule satisfies the VP identity on the grid") {
  const DiffusionSchedule s(10);
  for (std::size_t i = 1; i <= 10; ++i) {
    CHECK(s.alpha(i) * s.alpha(i) + s.sigma(i) * s.sigma(i) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s.time(i) == doctest::Approx(0.1 * static_cast<double>(i)));
    CHECK(s.g2(i) == doctest::Approx(0.1 + s.time(i) * 19.9));
  }
  CHECK(s.step_at(0.3) == 3);
  CHECK_THROWS_AS(s.step_at(0.35), std::invalid_argument);
  CHECK_THROWS_AS(s.check_step(0), std::invalid_argument);
  CHECK_THROWS_AS(s.check_step(11), std::invalid_argument);
  CHECK_THROWS_AS(DiffusionSchedule(0), std::invalid_argument);
  CHECK_THROWS_AS(DiffusionSchedule(10, 5.0, 1.0), std::invalid_argument);
}

TEST_CASE("process hash ignores the grid size") {
  CHECK(DiffusionSchedule(10).process_hash() == DiffusionSchedule(50).process_hash());
  CHECK(DiffusionSchedule(10).process_hash() != DiffusionSchedule(10, 0.1, 10.0).process_hash());
  CHECK(DiffusionSchedule(10).id() == "vp-linear(beta_min=0.1,beta_max=20)/T=10");
}

TEST_CASE("perturb") {
  SUBCASE("signal-preserving limit") {
    const DiffusionSchedule fine(1'000'000);
    const Vector x0 = Vector::LinSpaced(3, -1.0, 2.0);
    const Vector n = Vector::Ones(3);
    CHECK((perturb(x0, 1, n, fine) - x0).norm() < 1e-3);
  }
  SUBCASE("zero signal gives sigma times noise") {
    const DiffusionSchedule s(10);
    const Vector n = (Vector(2) << 0.3, -1.7).finished();
    for (std::size_t i = 1; i <= 10; ++i) CHECK(perturb(Vector::Zero(2), i, n, s) == s.sigma(i) * n);
  }
  SUBCASE("alpha at t_T against quadrature of the beta integral") {
    const DiffusionSchedule s(10);
    const double alpha = oracle::vp_alpha_by_quadrature(0.1, 20.0, 1.0, 4096);
    const double sigma = std::sqrt(1.0 - alpha * alpha);
    const Vector out = perturb(Vector::Unit(2, 0), 10, Vector::Zero(2), s);
    CHECK(out[0] == doctest::Approx(alpha).epsilon(1e-12));
    CHECK(s.sigma(10) == doctest::Approx(sigma).epsilon(1e-12));
    // exp(-0.5 * (0.1 + 9.95)) = exp(-5.025)
    CHECK(alpha == doctest::Approx(0.006571586).epsilon(1e-6));
  }
  SUBCASE("empirical variance of 1e5 perturbations") {
    const DiffusionSchedule s(10);
    Rng rng(11);
    const std::size_t n = 100'000;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = perturb(Vector::Zero(1), 3, standard_normal(1, rng), s)[0];
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / static_cast<double>(n);
    const double var = sum2 / static_cast<double>(n) - mean * mean;
    CHECK(var == doctest::Approx(s.sigma(3) * s.sigma(3)).epsilon(0.02));
  }
  CHECK_THROWS_AS(perturb(Vector::Zero(2), 1, Vector::Zero(3), DiffusionSchedule(10)), std::invalid_argument);
}

TEST_CASE("reverse step with zero score and zero noise undoes the VP contraction") {
  // forward drift is -beta x / 2, so stepping backwards in time scales by 1 + beta dt / 2
  const DiffusionSchedule s(10);
  const Vector x = (Vector(2) << 1.5, -0.25).finished();
  for (std::size_t i : {1u, 5u, 10u}) {
    const Vector out = reverse_step(x, i, Vector::Zero(2), Vector::Zero(2), s);
    const double expected = 1.0 + 0.5 * s.g2(i) * s.dt();
    CHECK(out[0] == doctest::Approx(x[0] * expected).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(x[1] * expected).epsilon(1e-15));
  }
}

TEST_CASE("reverse step rejects a non-finite score") {
  const DiffusionSchedule s(10);
  Vector bad = Vector::Zero(2);
  bad[0] = std::numeric_limits<double>::infinity();
  try {
    reverse_step(Vector::Zero(2), 4, bad, Vector::Zero(2), s);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.step() == 4);
  }
}

TEST_CASE("trajectory shape") {
  const auto model = single_target(Vector::Zero(2), 1.0);
  const ConditionId y = model.vocabulary()[0];
  SUBCASE("T = 1 has two states") {
    const Trajectory traj = reverse_denoise(Vector::Ones(2), y, model, DiffusionSchedule(1), 3);
    CHECK(traj.states.size() == 2);
    CHECK(traj.scores.size() == 1);
    CHECK(traj.times.front() == 1.0);
    CHECK(traj.times.back() == 0.0);
  }
  SUBCASE("T = 10") {
    const Trajectory traj = reverse_denoise(Vector::Ones(2), y, model, DiffusionSchedule(10), 3);
    CHECK(traj.states.size() == 11);
    CHECK(traj.state_at_step(10) == Vector::Ones(2));
    CHECK(traj.noise.cols() == 10);
  }
}

TEST_CASE("reverse_denoise is reproducible") {
  const auto model = single_target((Vector(2) << 1.0, -1.0).finished(), 0.5);
  const ConditionId y = model.vocabulary()[0];
  const DiffusionSchedule s(20);
  const Vector xT = (Vector(2) << 0.2, 0.9).finished();

  const Trajectory a = reverse_denoise(xT, y, model, s, 42);
  const Trajectory b = reverse_denoise(xT, y, model, s, 42);
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t i = 0; i < a.states.size(); ++i) CHECK(a.states[i] == b.states[i]);
  CHECK(reverse_denoise(xT, y, model, s, 43).states.back() != a.states.back());

  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 20);
  const EulerMaruyama em;
  const Trajectory c = reverse_denoise(xT, y, model, s, zero, em);
  const Trajectory d = reverse_denoise(xT, y, model, s, zero, em);
  for (std::size_t i = 0; i < c.states.size(); ++i) CHECK(c.states[i] == d.states[i]);
}

TEST_CASE("substeps consume one noise column each") {
  const auto model = single_target(Vector::Zero(1), 1.0);
  const DiffusionSchedule s(4);
  const EulerMaruyama em(3);
  Rng rng(1);
  const Eigen::MatrixXd noise = draw_noise(1, 4, em.draws_per_step(), rng);
  CHECK(noise.cols() == 12);
  const Trajectory traj = reverse_denoise(Vector::Ones(1), model.vocabulary()[0], model, s, noise, em);
  CHECK(traj.states.size() == 5);
  CHECK_THROWS_AS(reverse_denoise(Vector::Ones(1), model.vocabulary()[0], model, s, Eigen::MatrixXd::Zero(1, 4), em),
                  std::invalid_argument);
}

TEST_CASE("terminal samples match the target Gaussian moments") {
  const Vector m = (Vector(2) << 1.0, -2.0).finished();
  const double scale = 0.5;
  const auto model = single_target(m, scale);
  const ConditionId y = model.vocabulary()[0];
  const DiffusionSchedule s(1000);
  const std::size_t n = 10'000;

  Vector sum = Vector::Zero(2);
  Vector sum2 = Vector::Zero(2);
  Rng rng(2024);
  for (std::size_t i = 0; i < n; ++i) {
    const Trajectory traj = reverse_denoise(standard_normal(2, rng), y, model, s, derive_seed(5, i));
    sum += traj.states.back();
    sum2 += traj.states.back().cwiseAbs2();
  }
  const Vector mean = sum / static_cast<double>(n);
  const Vector var = sum2 / static_cast<double>(n) - mean.cwiseAbs2();
  const double se_mean = scale / std::sqrt(static_cast<double>(n));
  const double se_var = scale * scale * std::sqrt(2.0 / static_cast<double>(n));
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(mean[i] - m[i]) < 3.0 * se_mean);
    CHECK(std::abs(var[i] - scale * scale) < 4.0 * se_var);
  }
}

TEST_CASE("model failures carry the step") {
  const DiffusionSchedule s(10);
  const Vector xT = Vector::Ones(2);
  try {
    reverse_denoise(xT, ConditionId{1, "a"}, NanModel(), s, 1);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.step() == 7);
  }
  try {
    reverse_denoise(xT, ConditionId{1, "a"}, ThrowingModel(), s, 1);
    FAIL("expected ModelError");
  } catch (const ModelError& e) {
    CHECK(e.step() == 3);
  }
}
