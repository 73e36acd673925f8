#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Core>

#include "conjure/condition.hpp"
#include "conjure/schedule.hpp"

namespace conjure {

using Vector = Eigen::VectorXd;

/// s(x, t | y): approximate score of the noised conditional p_t(. | y).
///
/// Implementations are immutable after construction and may be evaluated
/// concurrently. Passing null_condition() asks for the unconditional score,
/// which only models reporting has_unconditional() support.
class ConditionalScoreModel {
 public:
  virtual ~ConditionalScoreModel() = default;

  virtual std::size_t dim() const = 0;
  virtual Vector score(const Vector& x, const TimePoint& tp, const ConditionId& y) const = 0;
  virtual bool has_unconditional() const { return false; }
  virtual std::string name() const = 0;
};

}  // namespace conjure
