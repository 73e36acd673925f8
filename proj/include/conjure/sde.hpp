#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "conjure/errors.hpp"
#include "conjure/random.hpp"
#include "conjure/schedule.hpp"
#include "conjure/score_model.hpp"

namespace conjure {

/// Sample of p_t(. | x0): alpha_t x0 + sigma_t noise.
template <typename D1, typename D2>
Vector perturb(const Eigen::MatrixBase<D1>& x0, std::size_t step,
               const Eigen::MatrixBase<D2>& noise, const DiffusionSchedule& schedule) {
  if (x0.size() != noise.size()) throw std::invalid_argument("perturb: dimension mismatch");
  schedule.check_step(step);
  return schedule.alpha(step) * x0 + schedule.sigma(step) * noise;
}

/// One reverse-time Euler-Maruyama step of length dt from time tp.t for
///   dx = [f(x, t) - g(t)^2 s] dt + g(t) dw,  f = -1/2 beta x,  g^2 = beta,
/// integrated backwards: x' = x + (1/2 beta x + beta s) dt + sqrt(beta dt) z.
template <typename D1, typename D2, typename D3>
Vector reverse_step(const Eigen::MatrixBase<D1>& x, const TimePoint& tp, double dt,
                    const Eigen::MatrixBase<D2>& score, const Eigen::MatrixBase<D3>& noise) {
  if (x.size() != score.size() || x.size() != noise.size())
    throw std::invalid_argument("reverse_step: dimension mismatch");
  if (!score.allFinite()) throw NumericError("non-finite score", tp.step);
  const double b = tp.beta;
  return x + dt * (0.5 * b * x + b * score) + std::sqrt(b * dt) * noise;
}

/// Grid form: steps from t_i to t_{i-1} (or to 0 from t_1).
template <typename D1, typename D2, typename D3>
Vector reverse_step(const Eigen::MatrixBase<D1>& x, std::size_t step, const Eigen::MatrixBase<D2>& score,
                    const Eigen::MatrixBase<D3>& noise, const DiffusionSchedule& schedule) {
  return reverse_step(x, schedule.at(step), schedule.dt(), score, noise);
}

using ScoreFn = std::function<Vector(const Vector&, const TimePoint&)>;

/// Strategy that advances a state across one grid interval [t_{i-1}, t_i].
class ReverseSampler {
 public:
  virtual ~ReverseSampler() = default;

  // Standard-normal columns consumed per grid interval.
  virtual std::size_t draws_per_step() const = 0;

  // `score` is s(x, t_i) at the pre-step state; `noise` is d x draws_per_step().
  virtual Vector advance(const Vector& x, const Vector& score, std::size_t step,
                         const DiffusionSchedule& schedule, const ScoreFn& score_fn,
                         const Eigen::Ref<const Eigen::MatrixXd>& noise) const = 0;

  virtual std::string name() const = 0;
};

// Euler-Maruyama, optionally splitting each grid interval into equal substeps.
class EulerMaruyama final : public ReverseSampler {
 public:
  explicit EulerMaruyama(std::size_t substeps = 1);

  std::size_t draws_per_step() const override { return substeps_; }
  Vector advance(const Vector& x, const Vector& score, std::size_t step, const DiffusionSchedule& schedule,
                 const ScoreFn& score_fn, const Eigen::Ref<const Eigen::MatrixXd>& noise) const override;
  std::string name() const override;

 private:
  std::size_t substeps_;
};

/// Brownian increments for a whole trajectory: d x (T * draws_per_step),
/// grid interval i (descending from T) owns columns [(T - i) n, (T - i + 1) n).
Eigen::MatrixXd draw_noise(std::size_t dim, std::size_t steps, std::size_t draws_per_step, Rng& rng);

struct Trajectory {
  ConditionId prompt;
  std::uint64_t seed = 0;
  std::vector<double> times;   // t_T, ..., t_1, 0
  std::vector<Vector> states;  // T + 1 states aligned with times
  std::vector<Vector> scores;  // s(states[j], t | prompt) for j < T
  Eigen::MatrixXd noise;

  std::size_t steps() const { return scores.size(); }
  // Pre-step state at grid step i (1..T).
  const Vector& state_at_step(std::size_t step) const { return states[steps() - step]; }
};

/// Denoises xT under prompt y with the given increments (reused across prompts
/// for paired trajectories). Model failures are rethrown as ModelError.
Trajectory reverse_denoise(const Vector& xT, const ConditionId& y, const ConditionalScoreModel& model,
                           const DiffusionSchedule& schedule, const Eigen::MatrixXd& noise,
                           const ReverseSampler& sampler, std::uint64_t seed = 0);

// Draws its own increments from `seed`.
Trajectory reverse_denoise(const Vector& xT, const ConditionId& y, const ConditionalScoreModel& model,
                           const DiffusionSchedule& schedule, std::uint64_t seed,
                           const ReverseSampler& sampler = EulerMaruyama());

}  // namespace conjure
