#include "conjure/toy_net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "conjure/errors.hpp"

namespace conjure {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd silu(const MatrixXd& z) { return z.array() / (1.0 + (-z.array()).exp()); }

MatrixXd silu_grad(const MatrixXd& z) {
  const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-z.array()).exp());
  return (sig * (1.0 + z.array() * (1.0 - sig))).matrix();
}

MatrixXd gaussian_init(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  return standard_normal(rows, cols, rng) * stddev;
}

nlohmann::json to_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j.at(i).size()) != cols) throw Error("checkpoint: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  }
  return m;
}

VectorXd vector_from_json(const nlohmann::json& j) {
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

std::string hex64(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

constexpr const char* kCheckpointFormat = "conjure-toy-score-net";
constexpr int kCheckpointVersion = 1;

}  // namespace

MatrixXd time_embedding(const VectorXd& times, std::size_t embedding_dim) {
  const std::size_t half = embedding_dim / 2;
  MatrixXd out(static_cast<Eigen::Index>(2 * half), times.size());
  for (std::size_t k = 0; k < half; ++k) {
    // frequencies geometric in [1, 200]
    const double omega = half == 1 ? 1.0 : std::pow(200.0, static_cast<double>(k) / static_cast<double>(half - 1));
    const auto row = static_cast<Eigen::Index>(k);
    out.row(row) = (omega * times.array()).sin().transpose();
    out.row(row + static_cast<Eigen::Index>(half)) = (omega * times.array()).cos().transpose();
  }
  return out;
}

ToyScoreNet::ToyScoreNet(std::size_t dim, Vocabulary vocabulary, ToyNetShape shape, const DiffusionSchedule& schedule,
                         Rng& rng)
    : dim_(dim),
      vocabulary_(std::move(vocabulary)),
      shape_(shape),
      schedule_process_(schedule.process_id()),
      schedule_hash_(schedule.process_hash()) {
  if (dim == 0) throw std::invalid_argument("ToyScoreNet: dimension must be positive");
  if (shape.hidden_layers == 0 || shape.hidden_width == 0 || shape.time_embedding_dim < 2 ||
      shape.time_embedding_dim % 2 != 0)
    throw std::invalid_argument("ToyScoreNet: invalid network shape");
  const auto emb = static_cast<Eigen::Index>(shape.condition_embedding_dim);
  embedding_ = gaussian_init(emb, static_cast<Eigen::Index>(vocabulary_.size() + 1), 1.0, rng);
  columns_[kNullConditionId] = 0;
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) columns_[vocabulary_[i].id] = static_cast<int>(i + 1);

  auto fan_in = static_cast<Eigen::Index>(dim + shape.time_embedding_dim + shape.condition_embedding_dim);
  const auto width = static_cast<Eigen::Index>(shape.hidden_width);
  for (std::size_t l = 0; l < shape.hidden_layers; ++l) {
    layers_.push_back({gaussian_init(width, fan_in, std::sqrt(2.0 / static_cast<double>(fan_in)), rng),
                       VectorXd::Zero(width)});
    fan_in = width;
  }
  layers_.push_back({gaussian_init(static_cast<Eigen::Index>(dim), fan_in, 0.1 / std::sqrt(static_cast<double>(fan_in)), rng),
                     VectorXd::Zero(static_cast<Eigen::Index>(dim))});
}

int ToyScoreNet::embedding_column(const ConditionId& y) const {
  const auto it = columns_.find(y.id);
  if (it == columns_.end()) throw std::invalid_argument("ToyScoreNet: unknown condition " + std::to_string(y.id));
  return it->second;
}

std::size_t ToyScoreNet::parameter_count() const {
  std::size_t n = static_cast<std::size_t>(embedding_.size());
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

MatrixXd ToyScoreNet::inputs(const MatrixXd& x, const VectorXd& times, const std::vector<int>& columns) const {
  const Eigen::Index batch = x.cols();
  if (x.rows() != static_cast<Eigen::Index>(dim_) || times.size() != batch ||
      columns.size() != static_cast<std::size_t>(batch))
    throw std::invalid_argument("ToyScoreNet: batch shapes disagree");
  const auto te = static_cast<Eigen::Index>(shape_.time_embedding_dim);
  const auto ce = static_cast<Eigen::Index>(shape_.condition_embedding_dim);
  MatrixXd in(x.rows() + te + ce, batch);
  in.topRows(x.rows()) = x;
  in.middleRows(x.rows(), te) = time_embedding(times, shape_.time_embedding_dim);
  for (Eigen::Index b = 0; b < batch; ++b) in.col(b).tail(ce) = embedding_.col(columns[static_cast<std::size_t>(b)]);
  return in;
}

MatrixXd ToyScoreNet::forward(const MatrixXd& x, const VectorXd& times, const std::vector<int>& columns) const {
  MatrixXd h = inputs(x, times, columns);
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l)
    h = silu((layers_[l].weight * h).colwise() + layers_[l].bias);
  return (layers_.back().weight * h).colwise() + layers_.back().bias;
}

Vector ToyScoreNet::score(const Vector& x, const TimePoint& tp, const ConditionId& y) const {
  if (static_cast<std::size_t>(x.size()) != dim_) throw std::invalid_argument("ToyScoreNet: dimension mismatch");
  VectorXd t(1);
  t[0] = tp.t;
  return forward(x, t, {embedding_column(y)}).col(0);
}

void ToyScoreNet::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["schedule"] = schedule_process_;
  j["schedule_hash"] = hex64(schedule_hash_);
  j["dim"] = dim_;
  j["shape"] = {{"hidden_layers", shape_.hidden_layers},
                {"hidden_width", shape_.hidden_width},
                {"time_embedding_dim", shape_.time_embedding_dim},
                {"condition_embedding_dim", shape_.condition_embedding_dim}};
  nlohmann::json vocab = nlohmann::json::array();
  for (const auto& c : vocabulary_.entries()) vocab.push_back({{"id", c.id}, {"display", c.display}});
  j["vocabulary"] = vocab;
  j["embedding"] = to_json(embedding_);
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) layers.push_back({{"weight", to_json(l.weight)}, {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  j["layers"] = layers;
  j["training"] = {{"loss_curve", log_.loss_curve},
                   {"validation_loss", log_.validation_loss},
                   {"epochs", log_.epochs},
                   {"seed", log_.seed}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

ToyScoreNet ToyScoreNet::load(const std::filesystem::path& path, const DiffusionSchedule& schedule) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw Error("not a toy score net checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw Error("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    if (j.at("schedule_hash").get<std::string>() != hex64(schedule.process_hash()))
      throw CheckpointMismatch("checkpoint trained on " + j.at("schedule").get<std::string>() + ", requested " +
                               schedule.process_id());

    ToyScoreNet net;
    net.dim_ = j.at("dim").get<std::size_t>();
    const auto& shape = j.at("shape");
    net.shape_.hidden_layers = shape.at("hidden_layers").get<std::size_t>();
    net.shape_.hidden_width = shape.at("hidden_width").get<std::size_t>();
    net.shape_.time_embedding_dim = shape.at("time_embedding_dim").get<std::size_t>();
    net.shape_.condition_embedding_dim = shape.at("condition_embedding_dim").get<std::size_t>();
    net.schedule_process_ = j.at("schedule").get<std::string>();
    net.schedule_hash_ = schedule.process_hash();
    std::vector<ConditionId> entries;
    for (const auto& c : j.at("vocabulary")) entries.push_back({c.at("id").get<int>(), c.at("display").get<std::string>()});
    net.vocabulary_ = Vocabulary(std::move(entries));
    net.embedding_ = matrix_from_json(j.at("embedding"));
    net.columns_[kNullConditionId] = 0;
    for (std::size_t i = 0; i < net.vocabulary_.size(); ++i) net.columns_[net.vocabulary_[i].id] = static_cast<int>(i + 1);
    for (const auto& l : j.at("layers")) net.layers_.push_back({matrix_from_json(l.at("weight")), vector_from_json(l.at("bias"))});

    const auto& tr = j.at("training");
    net.log_.loss_curve = tr.at("loss_curve").get<std::vector<double>>();
    net.log_.validation_loss = tr.at("validation_loss").get<double>();
    net.log_.epochs = tr.at("epochs").get<std::size_t>();
    net.log_.seed = tr.at("seed").get<std::uint64_t>();

    if (net.layers_.size() != net.shape_.hidden_layers + 1 ||
        net.embedding_.cols() != static_cast<Eigen::Index>(net.vocabulary_.size() + 1) ||
        net.embedding_.rows() != static_cast<Eigen::Index>(net.shape_.condition_embedding_dim) ||
        net.layers_.back().weight.rows() != static_cast<Eigen::Index>(net.dim_))
      throw Error("checkpoint tensors do not match the declared shape");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

// Backprop and Adam state for train_toy.
class ToyNetTrainer {
 public:
  explicit ToyNetTrainer(ToyScoreNet& net) : net_(net) {
    for (const auto& l : net_.layers_) {
      w_m_.push_back(MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
      w_v_.push_back(MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
      b_m_.push_back(VectorXd::Zero(l.bias.size()));
      b_v_.push_back(VectorXd::Zero(l.bias.size()));
    }
    e_m_ = MatrixXd::Zero(net_.embedding_.rows(), net_.embedding_.cols());
    e_v_ = e_m_;
  }

  // One Adam step on sum_b w_b || sigma_b s_b + eps_b ||^2 / B. Returns the loss.
  double step(const MatrixXd& xt, const VectorXd& times, const VectorXd& sigmas, const MatrixXd& eps,
              const std::vector<int>& columns, double lr) {
    const auto batch = static_cast<double>(xt.cols());
    const std::size_t hidden = net_.layers_.size() - 1;

    std::vector<MatrixXd> acts;  // acts[0] = input, acts[l+1] = silu(pre[l])
    std::vector<MatrixXd> pre;
    acts.push_back(net_.inputs(xt, times, columns));
    for (std::size_t l = 0; l < hidden; ++l) {
      pre.push_back((net_.layers_[l].weight * acts.back()).colwise() + net_.layers_[l].bias);
      acts.push_back(silu(pre.back()));
    }
    const MatrixXd out = (net_.layers_.back().weight * acts.back()).colwise() + net_.layers_.back().bias;

    const MatrixXd resid = (out.array().rowwise() * sigmas.transpose().array()).matrix() + eps;
    const double loss = resid.squaredNorm() / batch;

    MatrixXd grad = (2.0 / batch) * (resid.array().rowwise() * sigmas.transpose().array()).matrix();
    std::vector<MatrixXd> dw(net_.layers_.size());
    std::vector<VectorXd> db(net_.layers_.size());
    for (std::size_t l = net_.layers_.size(); l-- > 0;) {
      dw[l] = grad * acts[l].transpose();
      db[l] = grad.rowwise().sum();
      MatrixXd back = net_.layers_[l].weight.transpose() * grad;
      if (l > 0) {
        grad = back.cwiseProduct(silu_grad(pre[l - 1]));
      } else {
        grad = std::move(back);
      }
    }
    MatrixXd de = MatrixXd::Zero(net_.embedding_.rows(), net_.embedding_.cols());
    const auto ce = net_.embedding_.rows();
    for (Eigen::Index b = 0; b < grad.cols(); ++b) de.col(columns[static_cast<std::size_t>(b)]) += grad.col(b).tail(ce);

    ++t_;
    for (std::size_t l = 0; l < net_.layers_.size(); ++l) {
      adam(net_.layers_[l].weight, dw[l], w_m_[l], w_v_[l], lr);
      adam(net_.layers_[l].bias, db[l], b_m_[l], b_v_[l], lr);
    }
    adam(net_.embedding_, de, e_m_, e_v_, lr);
    return loss;
  }

 private:
  template <typename P>
  void adam(P& param, const P& grad, P& m, P& v, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }

  ToyScoreNet& net_;
  std::vector<MatrixXd> w_m_, w_v_;
  std::vector<VectorXd> b_m_, b_v_;
  MatrixXd e_m_, e_v_;
  std::size_t t_ = 0;
};

namespace {

struct NoisedBatch {
  MatrixXd xt;
  VectorXd times;
  VectorXd sigmas;
  MatrixXd eps;
};

NoisedBatch noise_batch(const LabeledDataset& data, const std::vector<std::size_t>& idx, std::size_t begin,
                        std::size_t end, const DiffusionSchedule& schedule, double t_min, Rng& rng) {
  const auto d = data.x0.front().size();
  const auto n = static_cast<Eigen::Index>(end - begin);
  NoisedBatch b{MatrixXd(d, n), VectorXd(n), VectorXd(n), standard_normal(d, n, rng)};
  std::uniform_real_distribution<double> unif(t_min, 1.0);
  for (Eigen::Index c = 0; c < n; ++c) {
    const TimePoint tp = schedule.at_time(unif(rng));
    b.times[c] = tp.t;
    b.sigmas[c] = tp.sigma;
    b.xt.col(c) = tp.alpha * data.x0[idx[begin + static_cast<std::size_t>(c)]] + tp.sigma * b.eps.col(c);
  }
  return b;
}

}  // namespace

ToyScoreNet train_toy(const LabeledDataset& dataset, const DiffusionSchedule& schedule, const TrainConfig& config) {
  if (dataset.size() == 0) throw std::invalid_argument("train_toy: empty dataset");
  if (dataset.labels.size() != dataset.size()) throw std::invalid_argument("train_toy: labels and samples disagree");
  if (config.epochs == 0 || config.batch_size == 0) throw std::invalid_argument("train_toy: epochs and batch size must be positive");
  if (!(config.t_min > 0.0 && config.t_min < 1.0)) throw std::invalid_argument("train_toy: t_min must lie in (0, 1)");
  const auto dim = static_cast<std::size_t>(dataset.x0.front().size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (static_cast<std::size_t>(dataset.x0[i].size()) != dim) throw std::invalid_argument("train_toy: ragged samples");
    if (!dataset.vocabulary.contains(dataset.labels[i]))
      throw std::invalid_argument("train_toy: label " + std::to_string(dataset.labels[i]) + " not in vocabulary");
  }

  Rng rng(config.seed);
  ToyScoreNet net(dim, dataset.vocabulary, config.shape, schedule, rng);
  ToyNetTrainer trainer(net);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(dataset.size())));
  if (n_val >= dataset.size()) n_val = 0;
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  auto columns_for = [&](const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end, bool dropout) {
    std::bernoulli_distribution drop(config.condition_dropout);
    std::vector<int> cols;
    cols.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      const bool null = dropout && config.condition_dropout > 0.0 && drop(rng);
      cols.push_back(null ? 0 : net.columns_.at(dataset.labels[idx[i]]));
    }
    return cols;
  };

  const std::size_t batches = (train.size() + config.batch_size - 1) / config.batch_size;
  const double total_steps = static_cast<double>(batches * config.epochs);
  std::size_t global = 0;
  constexpr double kPi = 3.14159265358979323846;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    double sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b, ++global) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(train.size(), begin + config.batch_size);
      const NoisedBatch batch = noise_batch(dataset, train, begin, end, schedule, config.t_min, rng);
      const auto cols = columns_for(train, begin, end, true);
      const double progress = static_cast<double>(global) / total_steps;
      const double floor = config.final_learning_rate_fraction;
      const double lr = config.learning_rate * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(kPi * progress)));
      const double loss = trainer.step(batch.xt, batch.times, batch.sigmas, batch.eps, cols, lr);
      if (!std::isfinite(loss)) throw TrainingFailure("non-finite DSM loss", epoch);
      sum += loss * static_cast<double>(end - begin);
    }
    net.log_.loss_curve.push_back(sum / static_cast<double>(train.size()));
  }

  // validation noise is drawn from its own stream so it is identical across runs
  if (!val.empty()) {
    Rng vrng(derive_seed(config.seed, 0x7a1));
    double sum = 0.0;
    for (std::size_t begin = 0; begin < val.size(); begin += 1024) {
      const std::size_t end = std::min(val.size(), begin + 1024);
      const NoisedBatch batch = noise_batch(dataset, val, begin, end, schedule, config.t_min, vrng);
      const MatrixXd out = net.forward(batch.xt, batch.times, columns_for(val, begin, end, false));
      sum += ((out.array().rowwise() * batch.sigmas.transpose().array()).matrix() + batch.eps).squaredNorm();
    }
    net.log_.validation_loss = sum / static_cast<double>(val.size());
  } else {
    net.log_.validation_loss = net.log_.loss_curve.back();
  }
  net.log_.epochs = config.epochs;
  net.log_.seed = config.seed;
  return net;
}

}  // namespace conjure
