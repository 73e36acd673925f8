#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "conjure/condition.hpp"
#include "conjure/random.hpp"
#include "conjure/schedule.hpp"
#include "conjure/score_model.hpp"

namespace conjure {

struct ToyNetShape {
  std::size_t hidden_layers = 3;
  std::size_t hidden_width = 128;
  std::size_t time_embedding_dim = 16;  // even: sin/cos pairs
  std::size_t condition_embedding_dim = 16;
};

struct TrainConfig {
  ToyNetShape shape;
  std::size_t epochs = 150;
  std::size_t batch_size = 256;
  double learning_rate = 2e-3;
  double final_learning_rate_fraction = 0.05;  // cosine decay target
  double condition_dropout = 0.1;
  double t_min = 1e-3;
  double validation_fraction = 0.1;
  std::size_t warmup_epochs = 5;
  std::uint64_t seed = 0;
};

struct LabeledDataset {
  Vocabulary vocabulary;
  std::vector<Vector> x0;
  std::vector<int> labels;  // condition ids, parallel to x0

  std::size_t size() const { return x0.size(); }
};

struct TrainingLog {
  std::vector<double> loss_curve;  // mean training DSM loss per epoch
  double validation_loss = 0.0;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
};

/// Small MLP score network s(x, t | y).
///
/// Input is [x, sinusoidal(t), embedding(y)]; output is the score itself (not
/// the noise prediction; eps = -sigma_t s converts between the two). Column 0 of
/// the embedding table is the null condition used for guidance dropout.
class ToyScoreNet final : public ConditionalScoreModel {
 public:
  ToyScoreNet(std::size_t dim, Vocabulary vocabulary, ToyNetShape shape, const DiffusionSchedule& schedule, Rng& rng);

  std::size_t dim() const override { return dim_; }
  Vector score(const Vector& x, const TimePoint& tp, const ConditionId& y) const override;
  bool has_unconditional() const override { return true; }
  std::string name() const override { return "toy-score-net"; }

  // Batched evaluation: x is dim x B, times has B entries, columns indexes
  // embedding columns (see embedding_column).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const Eigen::VectorXd& times,
                          const std::vector<int>& columns) const;

  const Vocabulary& vocabulary() const { return vocabulary_; }
  const ToyNetShape& shape() const { return shape_; }
  const TrainingLog& log() const { return log_; }
  std::uint64_t schedule_hash() const { return schedule_hash_; }
  const std::string& schedule_process() const { return schedule_process_; }
  std::size_t parameter_count() const;
  int embedding_column(const ConditionId& y) const;

  void save(const std::filesystem::path& path) const;
  // Throws CheckpointMismatch when the checkpoint was trained on another process.
  static ToyScoreNet load(const std::filesystem::path& path, const DiffusionSchedule& schedule);

 private:
  friend ToyScoreNet train_toy(const LabeledDataset&, const DiffusionSchedule&, const TrainConfig&);
  friend class ToyNetTrainer;

  struct Layer {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
  };

  ToyScoreNet() = default;
  Eigen::MatrixXd inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& times, const std::vector<int>& columns) const;

  std::size_t dim_ = 0;
  Vocabulary vocabulary_;
  ToyNetShape shape_;
  std::string schedule_process_;
  std::uint64_t schedule_hash_ = 0;
  std::vector<Layer> layers_;  // hidden layers then the output layer
  Eigen::MatrixXd embedding_;  // condition_embedding_dim x (|vocabulary| + 1)
  std::map<int, int> columns_;
  TrainingLog log_;
};

Eigen::MatrixXd time_embedding(const Eigen::VectorXd& times, std::size_t embedding_dim);

/// Denoising score matching with weighting sigma_t^2:
///   E || sigma_t s(alpha_t x0 + sigma_t eps, t | y) + eps ||^2,
/// Adam, cosine-decayed learning rate, condition dropout to the null column.
/// Deterministic given config.seed. Throws TrainingFailure on a non-finite loss.
ToyScoreNet train_toy(const LabeledDataset& dataset, const DiffusionSchedule& schedule, const TrainConfig& config);

}  // namespace conjure
