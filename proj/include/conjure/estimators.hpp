#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "conjure/condition.hpp"
#include "conjure/schedule.hpp"
#include "conjure/score_model.hpp"

namespace conjure {

/// Distribution over grid steps used to average the score gaps.
/// uniform-all = {1..T}; cumulative(s) = {s..T}; pointwise(s) = {s}.
class TimestepPrior {
 public:
  enum class Kind { UniformAll, Cumulative, Pointwise };

  static TimestepPrior uniform_all() { return TimestepPrior(Kind::UniformAll, 1); }
  static TimestepPrior cumulative(std::size_t start);
  static TimestepPrior pointwise(std::size_t step);
  // "uniform", "cumulative:<s>", "pointwise:<s>"
  static TimestepPrior parse(std::string_view text);

  Kind kind() const { return kind_; }
  std::size_t start() const { return start_; }
  std::vector<std::size_t> support(std::size_t steps) const;
  std::string to_string() const;

  friend bool operator==(const TimestepPrior&, const TimestepPrior&) = default;

 private:
  TimestepPrior(Kind kind, std::size_t start) : kind_(kind), start_(start) {}
  Kind kind_;
  std::size_t start_;
};

enum class Method { Conjure, KL, Initial, Final, Output };

std::string to_string(Method method);
Method parse_method(std::string_view text);
// Methods whose value is symmetric in (y1, y2) by construction.
bool is_symmetric(Method method);

struct DistanceEstimate {
  double value = 0.0;
  std::size_t k = 0;
  std::optional<double> std_error;  // sample std / sqrt(k), absent for k < 2
  std::vector<double> per_iteration;
  TimestepPrior prior = TimestepPrior::uniform_all();
  std::pair<std::string, std::string> pair;
  Method method = Method::Conjure;
};

// Mean, standard error and bookkeeping from per-iteration contributions.
DistanceEstimate summarize(std::vector<double> per_iteration, const TimestepPrior& prior,
                           std::pair<std::string, std::string> pair, Method method);

struct EstimatorOptions {
  std::size_t k = 5;
  TimestepPrior prior = TimestepPrior::uniform_all();
  std::uint64_t seed = 0;
  std::size_t substeps = 1;  // Euler-Maruyama substeps per grid interval
  std::size_t threads = 1;
};

enum class Direction { Y1, Y2 };

struct TraceRecord {
  std::size_t iter = 0;  // 1-based
  Direction dir = Direction::Y1;
  std::vector<double> sq_gaps;  // denoising order: index 0 is step T, last is step 1
  std::uint64_t seed = 0;
};

struct TraceMeta {
  std::string model;
  std::size_t steps = 0;
  double guidance = 1.0;
  std::string schedule;
};

/// Squared score gaps ||s(x_t, t | y1) - s(x_t, t | y2)||^2 along the
/// trajectories denoised under y1 and under y2, for every iteration.
struct ScoreDifferenceTrace {
  std::array<std::string, 2> pair;
  TraceMeta meta;
  std::vector<TraceRecord> records;

  std::size_t iterations() const;
  // Gaps for (iteration, direction); throws std::invalid_argument if missing.
  const std::vector<double>& gaps(std::size_t iter, Direction dir) const;
  // Structural checks (both directions per iteration, lengths == T, finite,
  // non-negative). Throws std::invalid_argument.
  void validate() const;
};

/// Algorithm-1 distance: per iteration, a shared x_T and shared Brownian
/// increments are denoised under y1 and under y2; at each pre-step state of
/// both trajectories both conditional scores are compared. The per-iteration
/// contribution is the prior-averaged gap of the y1 trajectory plus that of
/// the y2 trajectory, and the value is their mean over k iterations (both
/// directions summed, no factor 1/2).
DistanceEstimate conjure_distance(const ConditionalScoreModel& model, const ConditionId& y1, const ConditionId& y2,
                                  const DiffusionSchedule& schedule, const EstimatorOptions& options);

// The raw gaps behind conjure_distance (all T steps, independent of the prior).
ScoreDifferenceTrace conjure_trace(const ConditionalScoreModel& model, const ConditionId& y1, const ConditionId& y2,
                                   const DiffusionSchedule& schedule, const EstimatorOptions& options,
                                   double guidance = 1.0);

/// Same reduction as conjure_distance. Throws std::invalid_argument when the
/// prior reaches beyond the trace's T.
DistanceEstimate estimate_from_trace(const ScoreDifferenceTrace& trace, const TimestepPrior& prior);

// Expectation over trajectories denoised under y1 only.
DistanceEstimate kl_distance(const ConditionalScoreModel& model, const ConditionId& y1, const ConditionId& y2,
                             const DiffusionSchedule& schedule, const EstimatorOptions& options);

// Gap at t_T for x ~ N(0, I) (the same x_T draws as conjure_distance).
DistanceEstimate d_initial(const ConditionalScoreModel& model, const ConditionId& y1, const ConditionId& y2,
                           const DiffusionSchedule& schedule, const EstimatorOptions& options);

// Gap at t_1 on the last scored state of both trajectories, averaged.
DistanceEstimate d_final(const ConditionalScoreModel& model, const ConditionId& y1, const ConditionId& y2,
                         const DiffusionSchedule& schedule, const EstimatorOptions& options);

// ||x_0(y1) - x_0(y2)||^2 with shared x_T and increments.
DistanceEstimate d_output(const ConditionalScoreModel& model, const ConditionId& y1, const ConditionId& y2,
                          const DiffusionSchedule& schedule, const EstimatorOptions& options);

DistanceEstimate estimate(Method method, const ConditionalScoreModel& model, const ConditionId& y1,
                          const ConditionId& y2, const DiffusionSchedule& schedule, const EstimatorOptions& options);

}  // namespace conjure
