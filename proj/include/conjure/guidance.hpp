#pragma once

#include <string>

#include "conjure/score_model.hpp"

namespace conjure {

/// Classifier-free guidance: s_uncond + w (s_cond - s_uncond).
/// Throws UnsupportedOperation when the model has no unconditional branch.
Vector cfg_score(const ConditionalScoreModel& model, const Vector& x, const TimePoint& tp, const ConditionId& y,
                 double guidance_scale);

// Wraps a model so every conditional evaluation is guided. Holds a reference;
// the base model must outlive the wrapper.
class GuidedModel final : public ConditionalScoreModel {
 public:
  GuidedModel(const ConditionalScoreModel& base, double guidance_scale);

  std::size_t dim() const override { return base_.dim(); }
  Vector score(const Vector& x, const TimePoint& tp, const ConditionId& y) const override;
  std::string name() const override;
  double guidance_scale() const { return scale_; }

 private:
  const ConditionalScoreModel& base_;
  double scale_;
};

}  // namespace conjure
