#include "conjure/schedule.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

#include "conjure/random.hpp"

namespace conjure {

DiffusionSchedule::DiffusionSchedule(std::size_t steps, double beta_min, double beta_max)
    : steps_(steps), beta_min_(beta_min), beta_max_(beta_max) {
  if (steps == 0) throw std::invalid_argument("schedule needs T >= 1");
  if (!(beta_min > 0.0) || !(beta_max >= beta_min) || !std::isfinite(beta_max))
    throw std::invalid_argument("schedule needs 0 < beta_min <= beta_max");
  alpha_.resize(steps + 1);
  sigma_.resize(steps + 1);
  alpha_[0] = 1.0;
  sigma_[0] = 0.0;
  for (std::size_t i = 1; i <= steps; ++i) {
    const TimePoint tp = at_time(static_cast<double>(i) / static_cast<double>(steps));
    alpha_[i] = tp.alpha;
    sigma_[i] = tp.sigma;
  }
}

void DiffusionSchedule::check_step(std::size_t step) const {
  if (step == 0 || step > steps_)
    throw std::invalid_argument("grid step " + std::to_string(step) + " outside 1.." +
                                std::to_string(steps_));
}

double DiffusionSchedule::time(std::size_t step) const {
  if (step > steps_) throw std::invalid_argument("grid step out of range");
  return static_cast<double>(step) / static_cast<double>(steps_);
}

double DiffusionSchedule::alpha(std::size_t step) const {
  check_step(step);
  return alpha_[step];
}

double DiffusionSchedule::sigma(std::size_t step) const {
  check_step(step);
  return sigma_[step];
}

double DiffusionSchedule::g2(std::size_t step) const {
  check_step(step);
  return beta_at(time(step));
}

TimePoint DiffusionSchedule::at(std::size_t step) const {
  check_step(step);
  return {step, time(step), alpha_[step], sigma_[step], beta_at(time(step))};
}

double DiffusionSchedule::beta_at(double t) const { return beta_min_ + t * (beta_max_ - beta_min_); }

double DiffusionSchedule::beta_integral(double t) const {
  return beta_min_ * t + 0.5 * (beta_max_ - beta_min_) * t * t;
}

TimePoint DiffusionSchedule::at_time(double t) const {
  if (!(t > 0.0) || t > 1.0) throw std::invalid_argument("time must lie in (0, 1]");
  const double log_alpha2 = -beta_integral(t);
  TimePoint tp;
  tp.t = t;
  tp.alpha = std::exp(0.5 * log_alpha2);
  tp.sigma = std::sqrt(-std::expm1(log_alpha2));
  tp.beta = beta_at(t);
  return tp;
}

std::size_t DiffusionSchedule::step_at(double t) const {
  const double scaled = t * static_cast<double>(steps_);
  const double nearest = std::round(scaled);
  if (!(nearest >= 1.0) || nearest > static_cast<double>(steps_) ||
      std::abs(scaled - nearest) > 1e-9)
    throw std::invalid_argument("time " + std::to_string(t) + " is not on the grid");
  return static_cast<std::size_t>(nearest);
}

std::string DiffusionSchedule::process_id() const {
  // shortest round-trip form, so 0.1 prints as 0.1
  auto num = [](double v) {
    char buf[32];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
  };
  return "vp-linear(beta_min=" + num(beta_min_) + ",beta_max=" + num(beta_max_) + ")";
}

std::uint64_t DiffusionSchedule::process_hash() const { return fnv1a64(process_id()); }

std::string DiffusionSchedule::id() const {
  return process_id() + "/T=" + std::to_string(steps_);
}

}  // namespace conjure
