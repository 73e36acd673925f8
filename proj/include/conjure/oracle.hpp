#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "conjure/analytic.hpp"
#include "conjure/estimators.hpp"
#include "conjure/schedule.hpp"

// Ground-truth values for the estimators. Everything here recomputes the
// process coefficients and scores from the raw parameters; nothing calls the
// schedule's coefficient tables or the score models.
namespace conjure::oracle {

// alpha_t = exp(-1/2 int_0^t beta) for the linear VP schedule, closed form.
double vp_alpha(double beta_min, double beta_max, double t);
// Same quantity with the beta integral done by composite Simpson quadrature.
double vp_alpha_by_quadrature(double beta_min, double beta_max, double t, std::size_t intervals = 1000);

// alpha_t^2 ||m1 - m2||^2 / (alpha_t^2 s^2 + sigma_t^2)^2 at grid step `step`.
double gaussian_gap(const GaussianConditionSpec& a, const GaussianConditionSpec& b, const DiffusionSchedule& schedule,
                    std::size_t step);

/// 2 (1/|supp|) sum_{t in supp} alpha_t^2 ||m1 - m2||^2 / (alpha_t^2 s^2 + sigma_t^2)^2.
/// Throws UnsupportedOperation for unequal scales (the gap then depends on x).
double gaussian_conjure_closed_form(const GaussianConditionSpec& a, const GaussianConditionSpec& b,
                                    const DiffusionSchedule& schedule, const TimestepPrior& prior);

// Terminal ||x_0(y1) - x_0(y2)||^2 of two Euler-Maruyama runs sharing all
// noise. The difference obeys a deterministic linear recursion along m1 - m2.
double gaussian_output_gap(const GaussianConditionSpec& a, const GaussianConditionSpec& b,
                           const DiffusionSchedule& schedule, std::size_t substeps = 1);

enum class Weighting {
  Symmetric,  // x ~ 1/2 p_t(.|y1) + 1/2 p_t(.|y2), times 2
  FirstOnly,  // x ~ p_t(.|y1)
};

/// Tensor-grid trapezoid quadrature (dimension <= 2) of the squared score gap
/// against the time-t marginals, averaged over the prior's steps. The grid
/// covers every component's mean +- 8 standard deviations. The result is
/// recomputed at half resolution; a relative disagreement above 0.1% throws
/// AccuracyError.
double gmm_expected_gap(const GMMConditionSpec& a, const GMMConditionSpec& b, const DiffusionSchedule& schedule,
                        const TimestepPrior& prior, std::size_t resolution = 2048,
                        Weighting weighting = Weighting::Symmetric);

struct OracleReport {
  std::string name;
  double analytic = 0.0;
  double estimator = 0.0;
  std::size_t k = 0;
  std::optional<double> std_error;
  std::optional<double> z_score;
  double relative_error = 0.0;
  std::string rule;
  bool pass = false;
};

// pass iff |estimate - analytic| <= rel_tol * |analytic| (or both are 0).
OracleReport compare_exact(std::string name, double analytic, const DistanceEstimate& estimate, double rel_tol);
// pass iff |estimate - analytic| <= max_z * std_error.
OracleReport compare_statistical(std::string name, double analytic, const DistanceEstimate& estimate, double max_z);

}  // namespace conjure::oracle
