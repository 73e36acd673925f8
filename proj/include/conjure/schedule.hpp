#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace conjure {

// Coefficients of the noising process at one time. `step` is the grid index
// (1..T) or 0 for an off-grid time visited by a sub-stepping sampler.
struct TimePoint {
  std::size_t step = 0;
  double t = 0.0;
  double alpha = 1.0;
  double sigma = 0.0;
  double beta = 0.0;
};

/// Variance-preserving SDE with linear beta(t) = beta_min + t (beta_max - beta_min)
/// on t in [0, 1], discretized on the uniform grid t_i = i / T, i = 1..T.
///
/// alpha_t = exp(-1/2 int_0^t beta), sigma_t = sqrt(1 - alpha_t^2). The forward
/// drift is f(x, t) = -1/2 beta(t) x and g(t)^2 = beta(t).
class DiffusionSchedule {
 public:
  explicit DiffusionSchedule(std::size_t steps, double beta_min = 0.1, double beta_max = 20.0);

  std::size_t steps() const { return steps_; }
  double beta_min() const { return beta_min_; }
  double beta_max() const { return beta_max_; }
  double dt() const { return 1.0 / static_cast<double>(steps_); }

  // Grid accessors; step in 1..T (time(0) == 0 is the terminal time).
  double time(std::size_t step) const;
  double alpha(std::size_t step) const;
  double sigma(std::size_t step) const;
  double g2(std::size_t step) const;
  TimePoint at(std::size_t step) const;

  // Continuous-time coefficients for t in (0, 1].
  double beta_at(double t) const;
  double beta_integral(double t) const;
  TimePoint at_time(double t) const;

  /// Grid index of t; throws std::invalid_argument when t is not a grid time.
  std::size_t step_at(double t) const;
  void check_step(std::size_t step) const;

  // Identity of the continuous process (independent of T) and of the grid.
  std::string process_id() const;
  std::uint64_t process_hash() const;
  std::string id() const;

 private:
  std::size_t steps_;
  double beta_min_;
  double beta_max_;
  std::vector<double> alpha_;
  std::vector<double> sigma_;
};

}  // namespace conjure
