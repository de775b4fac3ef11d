#include "passifi/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "passifi/errors.hpp"
#include "passifi/random.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts are unsupported");

namespace passifi {

void ModelConfig::validate() const {
  if (input_size < 1) throw DataError("model input size must be >= 1");
  if (hidden_layers < 0) throw DataError("hidden layer count must be >= 0");
  if (hidden_width < 1) throw DataError("hidden width must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw DataError("dropout rate must be in [0, 1)");
  if (learning_rate <= 0.0) throw DataError("learning rate must be > 0");
  if (patience < 1) throw DataError("patience must be >= 1");
  if (max_epochs < 1) throw DataError("max epochs must be >= 1");
  if (batch_size < 1) throw DataError("batch size must be >= 1");
  if (validation_fraction <= 0.0 || validation_fraction >= 1.0)
    throw DataError("validation fraction must be in (0, 1)");
}

std::vector<int> TrainedModel::layer_sizes() const {
  std::vector<int> sizes{config.input_size};
  for (int l = 0; l < config.hidden_layers; ++l) sizes.push_back(config.hidden_width);
  sizes.push_back(2);
  return sizes;
}

std::size_t TrainedModel::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    count += static_cast<std::size_t>(weights[l].size()) + static_cast<std::size_t>(biases[l].size());
  return count;
}

TrainedModel init_model(const ModelConfig& config) {
  config.validate();
  TrainedModel model;
  model.config = config;
  const auto sizes = model.layer_sizes();
  rng::Engine eng(rng::derive_seed(config.seed, 0x696e6974ull));
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = rng::uniform(eng, -scale, scale);
    model.weights.push_back(std::move(w));
    model.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return model;
}

namespace {

// Dropout mask entries are 0 or 1/keep so inference needs no rescaling.
Eigen::MatrixXd dropout_mask(rng::Engine& eng, Eigen::Index rows, Eigen::Index cols, double rate) {
  const double keep = 1.0 - rate;
  const double inv_keep = 1.0 / keep;
  Eigen::MatrixXd mask(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r)
      mask(r, c) = rng::uniform01(eng) < keep ? inv_keep : 0.0;
  return mask;
}

struct ForwardCache {
  std::vector<Eigen::MatrixXd> pre_activations;   // z_l per layer
  std::vector<Eigen::MatrixXd> activations;       // a_0 = input, then post relu/dropout
  std::vector<Eigen::MatrixXd> dropout_masks;     // empty in infer mode / rate 0
};

Eigen::MatrixXd forward_batch(const TrainedModel& model, const Eigen::MatrixXd& input,
                              ForwardMode mode, rng::Engine* dropout_eng, ForwardCache* cache) {
  const std::size_t layer_count = model.weights.size();
  const bool use_dropout =
      mode == ForwardMode::Train && model.config.dropout_rate > 0.0 && dropout_eng != nullptr;
  Eigen::MatrixXd a = input;
  if (cache) cache->activations.push_back(a);
  for (std::size_t l = 0; l < layer_count; ++l) {
    Eigen::MatrixXd z = (model.weights[l] * a).colwise() + model.biases[l];
    if (cache) cache->pre_activations.push_back(z);
    if (l + 1 == layer_count) {
      a = std::move(z);  // linear output layer
    } else {
      a = z.cwiseMax(0.0);
      if (use_dropout) {
        Eigen::MatrixXd mask = dropout_mask(*dropout_eng, a.rows(), a.cols(), model.config.dropout_rate);
        a = a.cwiseProduct(mask);
        if (cache) cache->dropout_masks.push_back(std::move(mask));
      } else if (cache) {
        cache->dropout_masks.emplace_back();
      }
    }
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Mean squared coordinate error over the batch and its gradients.
double backward_batch(const TrainedModel& model, const ForwardCache& cache,
                      const Eigen::MatrixXd& output, const Eigen::MatrixXd& labels,
                      Gradients& grads) {
  const std::size_t layer_count = model.weights.size();
  const double batch = static_cast<double>(output.cols());
  const Eigen::MatrixXd diff = output - labels;
  const double loss = diff.squaredNorm() / batch;

  Eigen::MatrixXd delta = (2.0 / batch) * diff;  // d loss / d z_last
  for (std::size_t l = layer_count; l-- > 0;) {
    grads.weights[l] = delta * cache.activations[l].transpose();
    grads.biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd upstream = model.weights[l].transpose() * delta;
    if (cache.dropout_masks.size() >= l && cache.dropout_masks[l - 1].size() > 0)
      upstream = upstream.cwiseProduct(cache.dropout_masks[l - 1]);
    delta = upstream.cwiseProduct(
        (cache.pre_activations[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return loss;
}

Eigen::MatrixXd records_to_inputs(std::span<const FingerprintRecord> records,
                                  std::span<const std::size_t> indices, int input_size) {
  Eigen::MatrixXd x(input_size, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    const auto& values = records[indices[c]].features.values;
    if (static_cast<int>(values.size()) != input_size)
      throw DataError("record feature length does not match model input size");
    for (int r = 0; r < input_size; ++r) x(r, static_cast<Eigen::Index>(c)) = values[r];
  }
  return x;
}

Eigen::MatrixXd records_to_labels(std::span<const FingerprintRecord> records,
                                  std::span<const std::size_t> indices) {
  Eigen::MatrixXd y(2, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    y(0, static_cast<Eigen::Index>(c)) = records[indices[c]].label.x;
    y(1, static_cast<Eigen::Index>(c)) = records[indices[c]].label.y;
  }
  return y;
}

double evaluate_loss(const TrainedModel& model, const Eigen::MatrixXd& x,
                     const Eigen::MatrixXd& y) {
  const Eigen::MatrixXd out = forward_batch(model, x, ForwardMode::Infer, nullptr, nullptr);
  return (out - y).squaredNorm() / static_cast<double>(x.cols());
}

struct AdamState {
  std::vector<Eigen::MatrixXd> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;
  long step{0};

  explicit AdamState(const TrainedModel& model) {
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      m_w.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
      v_w.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
      m_b.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
      v_b.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
    }
  }

  void update(TrainedModel& model, const Gradients& grads, double lr) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      m_w[l] = beta1 * m_w[l] + (1.0 - beta1) * grads.weights[l];
      v_w[l] = beta2 * v_w[l] + (1.0 - beta2) * grads.weights[l].cwiseProduct(grads.weights[l]);
      model.weights[l].array() -=
          lr * (m_w[l].array() / bc1) / ((v_w[l].array() / bc2).sqrt() + eps);
      m_b[l] = beta1 * m_b[l] + (1.0 - beta1) * grads.biases[l];
      v_b[l] = beta2 * v_b[l] + (1.0 - beta2) * grads.biases[l].cwiseProduct(grads.biases[l]);
      model.biases[l].array() -=
          lr * (m_b[l].array() / bc1) / ((v_b[l].array() / bc2).sqrt() + eps);
    }
  }
};

}  // namespace

Point2D forward(const TrainedModel& model, std::span<const double> features, ForwardMode mode,
                std::uint64_t seed) {
  if (static_cast<int>(features.size()) != model.config.input_size)
    throw std::invalid_argument("feature length does not match model input size");
  Eigen::MatrixXd x(model.config.input_size, 1);
  for (int r = 0; r < model.config.input_size; ++r) x(r, 0) = features[static_cast<std::size_t>(r)];
  rng::Engine eng(rng::derive_seed(seed, 0x64726f70ull));
  const Eigen::MatrixXd out =
      forward_batch(model, x, mode, mode == ForwardMode::Train ? &eng : nullptr, nullptr);
  return Point2D{out(0, 0), out(1, 0)};
}

TrainedModel train(TrainedModel model, std::span<const FingerprintRecord> records,
                   const ModelConfig& config) {
  config.validate();
  if (records.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  if (model.weights.empty() || model.weights.front().cols() != config.input_size)
    throw std::invalid_argument("model architecture does not match training config");

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  rng::Engine split_eng(rng::derive_seed(config.seed, 0x73706c6974ull));
  std::shuffle(order.begin(), order.end(), split_eng);

  const std::size_t val_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::lround(config.validation_fraction * static_cast<double>(records.size()))));
  if (records.size() < val_count + 2)
    throw std::invalid_argument("need at least 2 training records after the validation split");
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<long>(val_count));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(val_count), order.end());

  const Eigen::MatrixXd val_x = records_to_inputs(records, val_idx, config.input_size);
  const Eigen::MatrixXd val_y = records_to_labels(records, val_idx);

  AdamState adam(model);
  Gradients grads;
  grads.weights.resize(model.weights.size());
  grads.biases.resize(model.biases.size());

  TrainedModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;
  model.history.clear();

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    rng::Engine epoch_eng(
        rng::derive_seed(config.seed, 0x65706f63ull + static_cast<std::uint64_t>(epoch)));
    std::shuffle(train_idx.begin(), train_idx.end(), epoch_eng);

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(train_idx.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::span<const std::size_t> batch(train_idx.data() + start, end - start);
      const Eigen::MatrixXd x = records_to_inputs(records, batch, config.input_size);
      const Eigen::MatrixXd y = records_to_labels(records, batch);

      ForwardCache cache;
      const Eigen::MatrixXd out = forward_batch(model, x, ForwardMode::Train, &epoch_eng, &cache);
      const double batch_loss = backward_batch(model, cache, out, y, grads);
      if (!std::isfinite(batch_loss)) throw NumericalError("training loss diverged");
      adam.update(model, grads, config.learning_rate);
      epoch_loss += batch_loss * static_cast<double>(batch.size());
      seen += batch.size();
    }

    const double train_loss = epoch_loss / static_cast<double>(seen);
    const double val_loss = evaluate_loss(model, val_x, val_y);
    model.history.push_back({train_loss, val_loss});

    if (val_loss < best_val) {
      best_val = val_loss;
      best.weights = model.weights;
      best.biases = model.biases;
      epochs_since_improvement = 0;
    } else {
      ++epochs_since_improvement;
      if (epochs_since_improvement >= config.patience) break;
    }
  }

  best.config = config;
  best.history = model.history;
  best.feature_min = model.feature_min;
  best.feature_max = model.feature_max;
  return best;
}

double gradient_check(const TrainedModel& model, const FingerprintRecord& record, double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("finite-difference step must be > 0");
  if (static_cast<int>(record.features.values.size()) != model.config.input_size)
    throw std::invalid_argument("record feature length does not match model input size");

  Eigen::MatrixXd x(model.config.input_size, 1);
  for (int r = 0; r < model.config.input_size; ++r) x(r, 0) = record.features.values[static_cast<std::size_t>(r)];
  Eigen::MatrixXd y(2, 1);
  y(0, 0) = record.label.x;
  y(1, 0) = record.label.y;

  ForwardCache cache;
  const Eigen::MatrixXd out = forward_batch(model, x, ForwardMode::Infer, nullptr, &cache);
  Gradients grads;
  grads.weights.resize(model.weights.size());
  grads.biases.resize(model.biases.size());
  backward_batch(model, cache, out, y, grads);

  const auto loss_with = [&](const TrainedModel& m) { return evaluate_loss(m, x, y); };

  // flat index space over all weight and bias coordinates
  std::size_t total = 0;
  for (std::size_t l = 0; l < model.weights.size(); ++l)
    total += static_cast<std::size_t>(model.weights[l].size()) +
             static_cast<std::size_t>(model.biases[l].size());

  const std::size_t samples = std::min<std::size_t>(std::max<std::size_t>(total, 1), 120);
  rng::Engine eng(rng::derive_seed(model.config.seed, 0x67726164ull));
  double worst = 0.0;
  TrainedModel probe = model;
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t flat = static_cast<std::size_t>(eng() % total);
    double analytic = 0.0;
    double* slot = nullptr;
    for (std::size_t l = 0; l < probe.weights.size(); ++l) {
      const std::size_t wsize = static_cast<std::size_t>(probe.weights[l].size());
      if (flat < wsize) {
        slot = probe.weights[l].data() + flat;
        analytic = grads.weights[l].data()[flat];
        break;
      }
      flat -= wsize;
      const std::size_t bsize = static_cast<std::size_t>(probe.biases[l].size());
      if (flat < bsize) {
        slot = probe.biases[l].data() + flat;
        analytic = grads.biases[l].data()[flat];
        break;
      }
      flat -= bsize;
    }

    const double saved = *slot;
    *slot = saved + epsilon;
    const double plus = loss_with(probe);
    *slot = saved - epsilon;
    const double minus = loss_with(probe);
    *slot = saved;

    const double numeric = (plus - minus) / (2.0 * epsilon);
    const double scale = std::max(std::abs(analytic) + std::abs(numeric), 1e-12);
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  }
  return worst;
}

namespace {

void write_raw(std::ofstream& out, const void* data, std::size_t bytes) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

template <typename T>
void write_value(std::ofstream& out, T value) {
  write_raw(out, &value, sizeof(T));
}

template <typename T>
T read_value(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw DataError("model file truncated");
  return value;
}

void write_doubles(std::ofstream& out, const double* data, std::size_t count) {
  write_raw(out, data, count * sizeof(double));
}

void read_doubles(std::ifstream& in, double* data, std::size_t count) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw DataError("model file truncated");
}

constexpr char kMagic[8] = {'P', 'S', 'F', 'M', 'O', 'D', 'L', '1'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_model(const std::string& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file: " + path);
  write_raw(out, kMagic, sizeof(kMagic));
  write_value<std::uint32_t>(out, kVersion);
  write_value<std::uint32_t>(out, static_cast<std::uint32_t>(model.config.input_size));
  write_value<std::uint32_t>(out, static_cast<std::uint32_t>(model.config.hidden_layers));
  write_value<std::uint32_t>(out, static_cast<std::uint32_t>(model.config.hidden_width));
  write_value<double>(out, model.config.dropout_rate);
  write_value<double>(out, model.config.learning_rate);
  write_value<std::uint32_t>(out, static_cast<std::uint32_t>(model.config.patience));
  write_value<std::uint32_t>(out, static_cast<std::uint32_t>(model.config.max_epochs));
  write_value<std::uint32_t>(out, static_cast<std::uint32_t>(model.config.batch_size));
  write_value<double>(out, model.config.validation_fraction);
  write_value<std::uint64_t>(out, model.config.seed);

  const auto sizes = model.layer_sizes();
  write_value<std::uint32_t>(out, static_cast<std::uint32_t>(sizes.size()));
  for (int s : sizes) write_value<std::uint32_t>(out, static_cast<std::uint32_t>(s));

  write_value<std::uint32_t>(out, static_cast<std::uint32_t>(model.feature_min.size()));
  write_doubles(out, model.feature_min.data(), model.feature_min.size());
  write_doubles(out, model.feature_max.data(), model.feature_max.size());

  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    // row-major on disk
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w =
        model.weights[l];
    write_doubles(out, w.data(), static_cast<std::size_t>(w.size()));
    write_doubles(out, model.biases[l].data(), static_cast<std::size_t>(model.biases[l].size()));
  }

  write_value<std::uint32_t>(out, static_cast<std::uint32_t>(model.history.size()));
  for (const auto& h : model.history) {
    write_value<double>(out, h.train_loss);
    write_value<double>(out, h.validation_loss);
  }
  if (!out) throw DataError("failed writing model file: " + path);
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a model file: " + path);
  if (read_value<std::uint32_t>(in) != kVersion) throw DataError("unsupported model version");

  TrainedModel model;
  model.config.input_size = static_cast<int>(read_value<std::uint32_t>(in));
  model.config.hidden_layers = static_cast<int>(read_value<std::uint32_t>(in));
  model.config.hidden_width = static_cast<int>(read_value<std::uint32_t>(in));
  model.config.dropout_rate = read_value<double>(in);
  model.config.learning_rate = read_value<double>(in);
  model.config.patience = static_cast<int>(read_value<std::uint32_t>(in));
  model.config.max_epochs = static_cast<int>(read_value<std::uint32_t>(in));
  model.config.batch_size = static_cast<int>(read_value<std::uint32_t>(in));
  model.config.validation_fraction = read_value<double>(in);
  model.config.seed = read_value<std::uint64_t>(in);

  const auto layer_count = read_value<std::uint32_t>(in);
  std::vector<int> sizes(layer_count);
  for (auto& s : sizes) s = static_cast<int>(read_value<std::uint32_t>(in));
  if (sizes != model.layer_sizes()) throw DataError("model file layer sizes are inconsistent");

  const auto n_features = read_value<std::uint32_t>(in);
  model.feature_min.resize(n_features);
  model.feature_max.resize(n_features);
  read_doubles(in, model.feature_min.data(), n_features);
  read_doubles(in, model.feature_max.data(), n_features);

  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(sizes[l + 1], sizes[l]);
    read_doubles(in, w.data(), static_cast<std::size_t>(w.size()));
    model.weights.emplace_back(w);
    Eigen::VectorXd b(sizes[l + 1]);
    read_doubles(in, b.data(), static_cast<std::size_t>(b.size()));
    model.biases.push_back(std::move(b));
  }

  const auto history_len = read_value<std::uint32_t>(in);
  model.history.resize(history_len);
  for (auto& h : model.history) {
    h.train_loss = read_value<double>(in);
    h.validation_loss = read_value<double>(in);
  }
  return model;
}

}  // namespace passifi
