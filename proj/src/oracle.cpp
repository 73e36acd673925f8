#include "conjure/oracle.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "conjure/errors.hpp"

namespace conjure::oracle {

namespace {

struct Coefficients {
  double alpha;
  double var_noise;  // sigma^2
  double beta;
};

Coefficients coefficients(const DiffusionSchedule& schedule, double t) {
  const double a = vp_alpha(schedule.beta_min(), schedule.beta_max(), t);
  return {a, 1.0 - a * a, schedule.beta_min() + t * (schedule.beta_max() - schedule.beta_min())};
}

double grid_time(const DiffusionSchedule& schedule, std::size_t step) {
  return static_cast<double>(step) / static_cast<double>(schedule.steps());
}

// Time-t marginal of one mixture component, as plain numbers.
struct Blob {
  double log_weight;
  std::vector<double> mean;
  double var;
};

std::vector<Blob> marginal(const GMMConditionSpec& spec, const Coefficients& c) {
  std::vector<Blob> out;
  for (const auto& comp : spec.components()) {
    Blob b;
    b.log_weight = std::log(comp.weight);
    for (Eigen::Index i = 0; i < comp.mean.size(); ++i) b.mean.push_back(c.alpha * comp.mean[i]);
    b.var = c.alpha * c.alpha * comp.scale * comp.scale + c.var_noise;
    out.push_back(std::move(b));
  }
  return out;
}

// log density and score of a blob mixture at a point (dimension 1 or 2).
struct DensityScore {
  double log_density;
  double score[2];
};

DensityScore evaluate(const std::vector<Blob>& blobs, const double* x, int dim) {
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  double logs[64];
  double top = -std::numeric_limits<double>::infinity();
  const std::size_t n = blobs.size();
  for (std::size_t k = 0; k < n; ++k) {
    double r2 = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double d = x[i] - blobs[k].mean[static_cast<std::size_t>(i)];
      r2 += d * d;
    }
    logs[k] = blobs[k].log_weight - 0.5 * dim * (kLog2Pi + std::log(blobs[k].var)) - 0.5 * r2 / blobs[k].var;
    top = std::max(top, logs[k]);
  }
  double total = 0.0;
  DensityScore out{0.0, {0.0, 0.0}};
  for (std::size_t k = 0; k < n; ++k) {
    const double w = std::exp(logs[k] - top);
    total += w;
    for (int i = 0; i < dim; ++i) out.score[i] -= w * (x[i] - blobs[k].mean[static_cast<std::size_t>(i)]) / blobs[k].var;
  }
  for (int i = 0; i < dim; ++i) out.score[i] /= total;
  out.log_density = top + std::log(total);
  return out;
}

double integrate_step(const std::vector<Blob>& p1, const std::vector<Blob>& p2, int dim, std::size_t n,
                      Weighting weighting) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* blobs : {&p1, &p2})
    for (const auto& b : *blobs)
      for (int i = 0; i < dim; ++i) {
        const double half = 8.0 * std::sqrt(b.var);
        lo = std::min(lo, b.mean[static_cast<std::size_t>(i)] - half);
        hi = std::max(hi, b.mean[static_cast<std::size_t>(i)] + half);
      }
  const double h = (hi - lo) / static_cast<double>(n - 1);
  auto end_weight = [n](std::size_t i) { return (i == 0 || i + 1 == n) ? 0.5 : 1.0; };

  double sum = 0.0;
  double x[2] = {0.0, 0.0};
  const std::size_t ny = dim == 2 ? n : 1;
  for (std::size_t iy = 0; iy < ny; ++iy) {
    if (dim == 2) x[1] = lo + h * static_cast<double>(iy);
    const double wy = dim == 2 ? end_weight(iy) : 1.0;
    for (std::size_t ix = 0; ix < n; ++ix) {
      x[0] = lo + h * static_cast<double>(ix);
      const DensityScore a = evaluate(p1, x, dim);
      const DensityScore b = evaluate(p2, x, dim);
      double gap = 0.0;
      for (int i = 0; i < dim; ++i) gap += (a.score[i] - b.score[i]) * (a.score[i] - b.score[i]);
      // symmetric: 2 (1/2 p1 + 1/2 p2)
      const double density = weighting == Weighting::Symmetric ? std::exp(a.log_density) + std::exp(b.log_density)
                                                               : std::exp(a.log_density);
      sum += wy * end_weight(ix) * gap * density;
    }
  }
  return sum * std::pow(h, dim);
}

double gmm_expected_gap_at(const GMMConditionSpec& a, const GMMConditionSpec& b, const DiffusionSchedule& schedule,
                           const std::vector<std::size_t>& support, std::size_t n, Weighting weighting) {
  const int dim = static_cast<int>(a.dim());
  double total = 0.0;
  for (std::size_t step : support) {
    const Coefficients c = coefficients(schedule, grid_time(schedule, step));
    total += integrate_step(marginal(a, c), marginal(b, c), dim, n, weighting);
  }
  return total / static_cast<double>(support.size());
}

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

double vp_alpha(double beta_min, double beta_max, double t) {
  return std::exp(-0.5 * (beta_min * t + 0.5 * (beta_max - beta_min) * t * t));
}

double vp_alpha_by_quadrature(double beta_min, double beta_max, double t, std::size_t intervals) {
  if (intervals % 2 != 0) ++intervals;
  const double h = t / static_cast<double>(intervals);
  auto beta = [&](double s) { return beta_min + s * (beta_max - beta_min); };
  double sum = beta(0.0) + beta(t);
  for (std::size_t i = 1; i < intervals; ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * beta(h * static_cast<double>(i));
  return std::exp(-0.5 * sum * h / 3.0);
}

double gaussian_gap(const GaussianConditionSpec& a, const GaussianConditionSpec& b, const DiffusionSchedule& schedule,
                    std::size_t step) {
  const Coefficients c = coefficients(schedule, grid_time(schedule, step));
  const double v = c.alpha * c.alpha * a.scale * a.scale + c.var_noise;
  return c.alpha * c.alpha * (a.mean - b.mean).squaredNorm() / (v * v);
}

double gaussian_conjure_closed_form(const GaussianConditionSpec& a, const GaussianConditionSpec& b,
                                    const DiffusionSchedule& schedule, const TimestepPrior& prior) {
  if (a.scale != b.scale)
    throw UnsupportedOperation("closed form needs equal scales; use gmm_expected_gap for unequal scales");
  if (a.mean.size() != b.mean.size()) throw std::invalid_argument("closed form: dimension mismatch");
  const auto support = prior.support(schedule.steps());
  double sum = 0.0;
  for (std::size_t step : support) sum += gaussian_gap(a, b, schedule, step);
  return 2.0 * sum / static_cast<double>(support.size());
}

double gaussian_output_gap(const GaussianConditionSpec& a, const GaussianConditionSpec& b,
                           const DiffusionSchedule& schedule, std::size_t substeps) {
  if (a.scale != b.scale) throw UnsupportedOperation("output gap closed form needs equal scales");
  // x1 - x2 = c (m1 - m2): c' = c (1 + h beta (1/2 - 1/v)) + h beta alpha / v
  const double dt = 1.0 / static_cast<double>(schedule.steps());
  const double h = dt / static_cast<double>(substeps);
  double coef = 0.0;
  for (std::size_t step = schedule.steps(); step >= 1; --step) {
    const double t_grid = grid_time(schedule, step);
    for (std::size_t j = 0; j < substeps; ++j) {
      const Coefficients c = coefficients(schedule, t_grid - static_cast<double>(j) * h);
      const double v = c.alpha * c.alpha * a.scale * a.scale + c.var_noise;
      coef = coef * (1.0 + h * c.beta * (0.5 - 1.0 / v)) + h * c.beta * c.alpha / v;
    }
  }
  return coef * coef * (a.mean - b.mean).squaredNorm();
}

double gmm_expected_gap(const GMMConditionSpec& a, const GMMConditionSpec& b, const DiffusionSchedule& schedule,
                        const TimestepPrior& prior, std::size_t resolution, Weighting weighting) {
  if (a.dim() != b.dim()) throw std::invalid_argument("gmm_expected_gap: dimension mismatch");
  if (a.dim() > 2) throw std::invalid_argument("gmm_expected_gap: quadrature supports dimension <= 2");
  if (a.components().size() > 64 || b.components().size() > 64)
    throw std::invalid_argument("gmm_expected_gap: at most 64 components");
  if (resolution < 16) throw std::invalid_argument("gmm_expected_gap: resolution must be >= 16");
  const auto support = prior.support(schedule.steps());
  const double fine = gmm_expected_gap_at(a, b, schedule, support, resolution, weighting);
  const double coarse = gmm_expected_gap_at(a, b, schedule, support, resolution / 2, weighting);
  const double scale = std::max(std::abs(fine), std::abs(coarse));
  if (scale > 0.0 && std::abs(fine - coarse) > 1e-3 * scale)
    throw AccuracyError("quadrature self-check failed: resolution " + std::to_string(resolution) + " gives " +
                        std::to_string(fine) + ", half resolution gives " + std::to_string(coarse));
  return fine;
}

OracleReport compare_exact(std::string name, double analytic, const DistanceEstimate& estimate, double rel_tol) {
  OracleReport r;
  r.name = std::move(name);
  r.analytic = analytic;
  r.estimator = estimate.value;
  r.k = estimate.k;
  r.std_error = estimate.std_error;
  const double diff = std::abs(estimate.value - analytic);
  r.relative_error = analytic != 0.0 ? diff / std::abs(analytic) : diff;
  if (estimate.std_error && *estimate.std_error > 0.0) r.z_score = diff / *estimate.std_error;
  r.rule = "relative error <= " + shortest(rel_tol);
  r.pass = r.relative_error <= rel_tol;
  return r;
}

OracleReport compare_statistical(std::string name, double analytic, const DistanceEstimate& estimate, double max_z) {
  OracleReport r;
  r.name = std::move(name);
  r.analytic = analytic;
  r.estimator = estimate.value;
  r.k = estimate.k;
  r.std_error = estimate.std_error;
  const double diff = std::abs(estimate.value - analytic);
  r.relative_error = analytic != 0.0 ? diff / std::abs(analytic) : diff;
  r.rule = "|estimate - analytic| <= " + shortest(max_z) + " std_error";
  if (estimate.std_error && *estimate.std_error > 0.0) {
    r.z_score = diff / *estimate.std_error;
    r.pass = *r.z_score <= max_z;
  } else {
    r.pass = diff == 0.0;
  }
  return r;
}

}  // namespace conjure::oracle
