#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "conjure/dataset.hpp"
#include "conjure/estimators.hpp"
#include "conjure/matrix.hpp"
#include "conjure/world.hpp"

namespace conjure {

using TraceSet = std::map<std::pair<std::string, std::string>, ScoreDifferenceTrace>;

/// 100 * Spearman(-distance, similarity). Distances fall as similarity rises,
/// so they are negated before correlating.
double alignment_score(const std::vector<double>& distances, const std::vector<double>& similarities);

// World pairs i < j against similarity = -W2 ground truth.
double evaluate_alignment(const SemanticWorld& world, const SimilarityMatrix& matrix);

double evaluate_alignment(const SemanticWorld& world, const ConditionalScoreModel& model, Method method,
                          const DiffusionSchedule& schedule, const EstimatorOptions& options);

// Distances for dataset rows looked up in `traces` by (text_a, text_b), with
// (text_b, text_a) accepted as well. Throws Error naming the first missing pair.
// max_iterations > 0 keeps only the first iterations of each trace.
std::vector<double> trace_distances(const AnnotatedPairDataset& dataset, const TraceSet& traces,
                                    const TimestepPrior& prior, std::size_t max_iterations = 0);

double evaluate_alignment(const AnnotatedPairDataset& dataset, const TraceSet& traces, const TimestepPrior& prior);

enum class AblationParameter { Prior, K, T };

AblationParameter parse_ablation_parameter(const std::string& name);
std::string to_string(AblationParameter p);

struct AblationReport {
  std::string parameter;
  std::vector<std::string> values;
  std::vector<double> scores;    // Spearman x 100 per value
  std::vector<double> runtimes;  // seconds per value
  std::vector<SimilarityMatrix> matrices;  // world ablations only

  double spread() const;  // max - min score
  std::size_t best() const;
};

/// Re-runs the world evaluation per swept value with everything else fixed
/// (including the seed). Values: priors as "uniform" / "cumulative:s" /
/// "pointwise:s"; k and T as integers; "T/2" style shorthands are not parsed.
AblationReport ablate(AblationParameter parameter, const std::vector<std::string>& values,
                      const SemanticWorld& world, const ConditionalScoreModel& model, Method method,
                      const DiffusionSchedule& base_schedule, const EstimatorOptions& options);

// Trace-backed ablation: prior, or k (first k iterations of each trace). T
// cannot be swept on fixed traces.
AblationReport ablate(AblationParameter parameter, const std::vector<std::string>& values,
                      const AnnotatedPairDataset& dataset, const TraceSet& traces, const TimestepPrior& prior);

}  // namespace conjure
