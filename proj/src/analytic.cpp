#include "conjure/analytic.hpp"

#include <algorithm>
#include <limits>

namespace conjure {

void GaussianConditionSpec::validate() const {
  if (mean.size() == 0) throw std::invalid_argument("Gaussian condition needs a non-empty mean");
  if (!mean.allFinite()) throw std::invalid_argument("Gaussian condition mean must be finite");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("Gaussian condition scale must be > 0");
}

GMMConditionSpec::GMMConditionSpec(std::vector<MixtureComponent> components) : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("mixture needs at least one component");
  double total = 0.0;
  const Eigen::Index d = components_.front().mean.size();
  for (const auto& c : components_) {
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) throw std::invalid_argument("mixture weights must be positive");
    if (c.mean.size() != d || d == 0) throw std::invalid_argument("mixture components disagree on dimension");
    GaussianConditionSpec{c.mean, c.scale}.validate();
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture weights must sum to 1");
}

GMMConditionSpec GMMConditionSpec::single(const GaussianConditionSpec& g) {
  return GMMConditionSpec({{1.0, g.mean, g.scale}});
}

Vector gmm_score(const Vector& x, const TimePoint& tp, const GMMConditionSpec& spec) {
  if (x.size() != spec.dim()) throw std::invalid_argument("gmm_score: dimension mismatch");
  const auto& comps = spec.components();
  const double d = static_cast<double>(x.size());
  const double a2 = tp.alpha * tp.alpha;
  const double s2 = tp.sigma * tp.sigma;

  // log w_k + log N(x; alpha m_k, v_k I), up to the shared -d/2 log(2 pi)
  std::vector<double> logits(comps.size());
  std::vector<double> variances(comps.size());
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const double v = a2 * comps[k].scale * comps[k].scale + s2;
    variances[k] = v;
    logits[k] = std::log(comps[k].weight) - 0.5 * d * std::log(v) -
                0.5 * (x - tp.alpha * comps[k].mean).squaredNorm() / v;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double norm = 0.0;
  for (double& l : logits) {
    l = std::exp(l - top);
    norm += l;
  }

  Vector out = Vector::Zero(x.size());
  for (std::size_t k = 0; k < comps.size(); ++k)
    out -= (logits[k] / norm) * (x - tp.alpha * comps[k].mean) / variances[k];
  return out;
}

Vector gmm_score(const Vector& x, std::size_t step, const GMMConditionSpec& spec, const DiffusionSchedule& schedule) {
  return gmm_score(x, schedule.at(step), spec);
}

GaussianModel::GaussianModel(Vocabulary vocabulary, std::vector<GaussianConditionSpec> specs)
    : vocabulary_(std::move(vocabulary)), specs_(std::move(specs)) {
  if (vocabulary_.size() == 0 || vocabulary_.size() != specs_.size())
    throw std::invalid_argument("GaussianModel: one spec per vocabulary entry required");
  for (const auto& s : specs_) s.validate();
  dim_ = static_cast<std::size_t>(specs_.front().mean.size());
  std::vector<MixtureComponent> comps;
  for (const auto& s : specs_) {
    if (static_cast<std::size_t>(s.mean.size()) != dim_)
      throw std::invalid_argument("GaussianModel: specs disagree on dimension");
    comps.push_back({1.0 / static_cast<double>(specs_.size()), s.mean, s.scale});
  }
  unconditional_.emplace(std::move(comps));
}

const GaussianConditionSpec& GaussianModel::spec(const ConditionId& y) const {
  const auto i = vocabulary_.index_of(y.id);
  if (!i) throw std::invalid_argument("GaussianModel: unknown condition " + std::to_string(y.id));
  return specs_[*i];
}

Vector GaussianModel::score(const Vector& x, const TimePoint& tp, const ConditionId& y) const {
  if (y.id == kNullConditionId) {
    if (!unconditional_) throw std::invalid_argument("GaussianModel: unconditional branch unavailable");
    return gmm_score(x, tp, *unconditional_);
  }
  return gaussian_score(x, tp, spec(y));
}

MixtureModel::MixtureModel(Vocabulary vocabulary, std::vector<GMMConditionSpec> specs)
    : vocabulary_(std::move(vocabulary)), specs_(std::move(specs)) {
  if (vocabulary_.size() == 0 || vocabulary_.size() != specs_.size())
    throw std::invalid_argument("MixtureModel: one spec per vocabulary entry required");
  dim_ = static_cast<std::size_t>(specs_.front().dim());
  for (const auto& s : specs_)
    if (static_cast<std::size_t>(s.dim()) != dim_) throw std::invalid_argument("MixtureModel: specs disagree on dimension");
}

const GMMConditionSpec& MixtureModel::spec(const ConditionId& y) const {
  const auto i = vocabulary_.index_of(y.id);
  if (!i) throw std::invalid_argument("MixtureModel: unknown condition " + std::to_string(y.id));
  return specs_[*i];
}

Vector MixtureModel::score(const Vector& x, const TimePoint& tp, const ConditionId& y) const {
  return gmm_score(x, tp, spec(y));
}

}  // namespace conjure
