#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "conjure/condition.hpp"
#include "conjure/estimators.hpp"
#include "conjure/schedule.hpp"
#include "conjure/score_model.hpp"

namespace conjure {

struct SimilarityMatrix {
  Vocabulary vocabulary;
  Eigen::MatrixXd values;  // distances, zero diagonal
  Method method = Method::Conjure;
  std::string settings;

  std::size_t size() const { return vocabulary.size(); }
  // Off-diagonal upper-triangle entries in row-major order.
  std::vector<double> upper_triangle() const;
};

/// Distance for every vocabulary pair. Symmetric methods compute the upper
/// triangle and mirror it; kl fills both triangles. Every pair reuses
/// options.seed (common random numbers across pairs). Pairs run in parallel
/// on options.threads workers; each estimator call runs single-threaded.
SimilarityMatrix pairwise_matrix(const ConditionalScoreModel& model, const Vocabulary& vocabulary, Method method,
                                 const DiffusionSchedule& schedule, const EstimatorOptions& options);

std::string describe_settings(Method method, const DiffusionSchedule& schedule, const EstimatorOptions& options);

// CSV with a header row and a leading label column.
void write_matrix_csv(std::ostream& out, const SimilarityMatrix& m);
void write_matrix_csv(const std::filesystem::path& path, const SimilarityMatrix& m);

// Grayscale heatmap, darker = closer.
void write_matrix_svg(const std::filesystem::path& path, const SimilarityMatrix& m);

struct ClusterStats {
  double within_mean = 0.0;
  double between_mean = 0.0;
};

ClusterStats cluster_stats(const SimilarityMatrix& m, const std::vector<int>& cluster);

// Minimum Spearman correlation between the upper triangles of any two matrices.
double rank_stability(const std::vector<SimilarityMatrix>& matrices);

}  // namespace conjure
