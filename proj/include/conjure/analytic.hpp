#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "conjure/condition.hpp"
#include "conjure/schedule.hpp"
#include "conjure/score_model.hpp"

namespace conjure {

// p_0(. | y) = N(mean, scale^2 I).
struct GaussianConditionSpec {
  Vector mean;
  double scale = 1.0;

  void validate() const;
};

struct MixtureComponent {
  double weight = 1.0;
  Vector mean;
  double scale = 1.0;
};

// p_0(. | y) = sum_k weight_k N(mean_k, scale_k^2 I). Validated on construction.
class GMMConditionSpec {
 public:
  explicit GMMConditionSpec(std::vector<MixtureComponent> components);
  static GMMConditionSpec single(const GaussianConditionSpec& g);

  const std::vector<MixtureComponent>& components() const { return components_; }
  Eigen::Index dim() const { return components_.front().mean.size(); }

 private:
  std::vector<MixtureComponent> components_;
};

/// Score of N(alpha m, (alpha^2 s^2 + sigma^2) I), the time-t marginal of a
/// Gaussian condition under the VP process.
template <typename Derived>
Vector gaussian_score(const Eigen::MatrixBase<Derived>& x, const TimePoint& tp, const GaussianConditionSpec& spec) {
  if (x.size() != spec.mean.size()) throw std::invalid_argument("gaussian_score: dimension mismatch");
  const double v = tp.alpha * tp.alpha * spec.scale * spec.scale + tp.sigma * tp.sigma;
  return -(x - tp.alpha * spec.mean) / v;
}

template <typename Derived>
Vector gaussian_score(const Eigen::MatrixBase<Derived>& x, std::size_t step, const GaussianConditionSpec& spec,
                      const DiffusionSchedule& schedule) {
  return gaussian_score(x, schedule.at(step), spec);
}

// Exact score of the time-t mixture marginal (log-sum-exp responsibilities).
Vector gmm_score(const Vector& x, const TimePoint& tp, const GMMConditionSpec& spec);
Vector gmm_score(const Vector& x, std::size_t step, const GMMConditionSpec& spec, const DiffusionSchedule& schedule);

/// Closed-form model over Gaussian conditions. The unconditional branch is the
/// equal-weight mixture of every condition.
class GaussianModel final : public ConditionalScoreModel {
 public:
  GaussianModel(Vocabulary vocabulary, std::vector<GaussianConditionSpec> specs);

  std::size_t dim() const override { return dim_; }
  Vector score(const Vector& x, const TimePoint& tp, const ConditionId& y) const override;
  bool has_unconditional() const override { return true; }
  std::string name() const override { return "analytic-gaussian"; }

  const Vocabulary& vocabulary() const { return vocabulary_; }
  const GaussianConditionSpec& spec(const ConditionId& y) const;

 private:
  Vocabulary vocabulary_;
  std::vector<GaussianConditionSpec> specs_;
  std::optional<GMMConditionSpec> unconditional_;
  std::size_t dim_;
};

class MixtureModel final : public ConditionalScoreModel {
 public:
  MixtureModel(Vocabulary vocabulary, std::vector<GMMConditionSpec> specs);

  std::size_t dim() const override { return dim_; }
  Vector score(const Vector& x, const TimePoint& tp, const ConditionId& y) const override;
  std::string name() const override { return "analytic-gmm"; }

  const Vocabulary& vocabulary() const { return vocabulary_; }
  const GMMConditionSpec& spec(const ConditionId& y) const;

 private:
  Vocabulary vocabulary_;
  std::vector<GMMConditionSpec> specs_;
  std::size_t dim_;
};

}  // namespace conjure
