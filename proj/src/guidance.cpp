#include "conjure/guidance.hpp"

#include <sstream>

#include "conjure/errors.hpp"

namespace conjure {

Vector cfg_score(const ConditionalScoreModel& model, const Vector& x, const TimePoint& tp, const ConditionId& y,
                 double guidance_scale) {
  if (!model.has_unconditional())
    throw UnsupportedOperation("classifier-free guidance needs an unconditional branch; " + model.name() +
                               " has none");
  const Vector uncond = model.score(x, tp, null_condition());
  const Vector cond = model.score(x, tp, y);
  return uncond + guidance_scale * (cond - uncond);
}

GuidedModel::GuidedModel(const ConditionalScoreModel& base, double guidance_scale)
    : base_(base), scale_(guidance_scale) {
  if (!base.has_unconditional())
    throw UnsupportedOperation("classifier-free guidance needs an unconditional branch; " + base.name() +
                               " has none");
}

Vector GuidedModel::score(const Vector& x, const TimePoint& tp, const ConditionId& y) const {
  return cfg_score(base_, x, tp, y, scale_);
}

std::string GuidedModel::name() const {
  std::ostringstream os;
  os << base_.name() << "+cfg(" << scale_ << ")";
  return os.str();
}

}  // namespace conjure
