#include "csiloc/track/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "csiloc/error.hpp"
#include "csiloc/nn/adam.hpp"
#include "csiloc/nn/layers.hpp"
#include "csiloc/nn/loss.hpp"
#include "csiloc/nn/lstm.hpp"
#include "csiloc/parallel.hpp"
#include "csiloc/rng.hpp"

namespace csiloc::track {

namespace {

constexpr std::uint64_t kTagWalk = 0x7a1c;
constexpr std::uint64_t kTagSelf = 0x5e1f;
constexpr std::uint64_t kTagInit = 0x1573;
constexpr std::uint64_t kTagShuffle = 0x15ff;
constexpr std::uint64_t kTagDropout = 0xd0;
constexpr std::size_t kInferenceChunk = 256;

// RP positions and, per RP, the list of RPs within `radius` (itself included).
struct RpIndex {
  std::vector<Point2> position;
  std::vector<std::vector<std::uint64_t>> rows;
  std::vector<std::vector<std::uint32_t>> neighbours;
  std::vector<std::uint32_t> populated;
};

RpIndex index_rps(const FeatureMatrix& features, double radius) {
  RpIndex idx;
  idx.rows = features.rows_by_rp();
  idx.position.assign(idx.rows.size(), Point2{});
  for (std::size_t rp = 0; rp < idx.rows.size(); ++rp) {
    if (idx.rows[rp].empty()) continue;
    idx.position[rp] = features.location[idx.rows[rp].front()];
    idx.populated.push_back(static_cast<std::uint32_t>(rp));
  }
  if (idx.populated.empty()) throw InputError("feature matrix has no rows tied to an RP");
  idx.neighbours.resize(idx.rows.size());
  parallel_for(idx.populated.size(), [&](std::size_t i) {
    const std::uint32_t a = idx.populated[i];
    for (std::uint32_t b : idx.populated)
      if (distance(idx.position[a], idx.position[b]) <= radius + 1e-9) idx.neighbours[a].push_back(b);
  });
  return idx;
}

std::uint64_t pick(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng);
}

void check_features(const TrajectorySet& set, const FeatureMatrix& features) {
  set.validate();
  for (const auto& t : set.trajectories)
    for (std::size_t s = 0; s < t.row.size(); ++s) {
      if (t.row[s] >= features.rows())
        throw InputError("trajectory refers to feature row " + std::to_string(t.row[s]) + " beyond " +
                         std::to_string(features.rows()));
      if (features.rp_index[t.row[s]] != static_cast<std::int32_t>(t.rp[s]))
        throw InputError("trajectory step RP does not match its feature row");
    }
}

}  // namespace

void TrajectoryConfig::apply(const KeyValueConfig& cfg) {
  memory_length = cfg.get_uint("T", memory_length);
  step_bound = cfg.get_double("sigma", step_bound);
  sample_interval = cfg.get_double("dt", sample_interval);
  train_count = cfg.get_uint("train_count", train_count);
  validation_count = cfg.get_uint("val_count", validation_count);
}

void TrajectoryConfig::validate() const {
  if (memory_length == 0) throw ConfigError("memory length T must be positive");
  if (!(step_bound > 0.0)) throw ConfigError("step bound sigma must be positive");
  if (!(sample_interval > 0.0)) throw ConfigError("sample interval dt must be positive");
  if (train_count == 0 || validation_count == 0) throw ConfigError("trajectory counts must be positive");
}

TrajectorySet generate_trajectories(const FeatureMatrix& features, const TrajectoryConfig& config, std::size_t count,
                                    std::uint64_t seed) {
  config.validate();
  const RpIndex idx = index_rps(features, config.step_bound);
  TrajectorySet set;
  set.steps = static_cast<std::uint32_t>(config.memory_length);
  set.trajectories.resize(count);
  parallel_for(count, [&](std::size_t i) {
    Rng rng = make_rng(seed, {kTagWalk, i});
    Trajectory& t = set.trajectories[i];
    std::uint32_t rp = idx.populated[pick(rng, idx.populated.size())];
    for (std::size_t s = 0; s < config.memory_length; ++s) {
      if (s > 0) {
        const auto& near = idx.neighbours[rp];
        rp = near[pick(rng, near.size())];
      }
      const auto& rows = idx.rows[rp];
      t.rp.push_back(rp);
      t.row.push_back(rows[pick(rng, rows.size())]);
    }
  });
  return set;
}

Trajectory self_trajectory(const FeatureMatrix& features, std::uint32_t rp, std::size_t steps, std::uint64_t seed) {
  const auto by_rp = features.rows_by_rp();
  if (rp >= by_rp.size() || by_rp[rp].empty()) throw InputError("RP " + std::to_string(rp) + " has no feature rows");
  std::vector<std::uint64_t> rows = by_rp[rp];
  Rng rng = make_rng(seed, {kTagSelf, rp});
  std::shuffle(rows.begin(), rows.end(), rng);
  Trajectory t;
  for (std::size_t s = 0; s < steps; ++s) {
    t.rp.push_back(rp);
    t.row.push_back(rows[s % rows.size()]);
  }
  return t;
}

void LstmConfig::apply(const KeyValueConfig& cfg) {
  hidden = cfg.get_uint("hidden", hidden);
  dropout = cfg.get_double("dropout", dropout);
  learning_rate = cfg.get_double("lstm_lr", learning_rate);
  epochs = cfg.get_uint("lstm_epochs", epochs);
  batch_size = cfg.get_uint("lstm_batch", batch_size);
}

void LstmConfig::validate() const {
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("LSTM learning rate must be positive");
  if (epochs == 0) throw ConfigError("LSTM epochs must be positive");
  if (batch_size == 0) throw ConfigError("LSTM batch size must be positive");
}

// ------------------------------------------------------------------ TrackerNet

TrackerNet TrackerNet::build(std::size_t feature_dim, const LstmConfig& config, Point2 target_mean,
                             std::uint64_t seed) {
  config.validate();
  if (feature_dim == 0) throw ConfigError("feature width must be positive");
  TrackerNet net;
  net.feature_dim_ = feature_dim;
  net.hidden_ = config.hidden_for(feature_dim);
  Rng rng = make_rng(seed, {kTagInit});
  auto lstm = std::make_unique<nn::Lstm>(feature_dim, net.hidden_);
  lstm->initialize(rng);
  net.recurrent_.add(std::move(lstm));
  net.head_.add(std::make_unique<nn::Dropout>(config.dropout, derive_seed(seed, {kTagDropout})));
  auto dense = std::make_unique<nn::FullyConnected>(net.hidden_, 2);
  dense->initialize(rng);
  dense->bias()[0] = target_mean.x;
  dense->bias()[1] = target_mean.y;
  net.head_.add(std::move(dense));
  return net;
}

TrackerNet TrackerNet::from_checkpoint(const std::vector<nn::CheckpointLayer>& layers) {
  if (layers.size() != 3 || layers[0].kind != nn::LayerKind::lstm_cell || layers[1].kind != nn::LayerKind::dropout ||
      layers[2].kind != nn::LayerKind::fully_connected)
    throw DataError("tracker checkpoint must hold lstm, dropout and dense layers");
  TrackerNet net;
  net.recurrent_ = nn::Sequential::from_checkpoint({layers[0]});
  net.head_ = nn::Sequential::from_checkpoint({layers[1], layers[2]}, derive_seed(0, {kTagDropout}));
  const auto& lstm = static_cast<const nn::Lstm&>(net.recurrent_.layer(0));
  net.feature_dim_ = lstm.params().input_size();
  net.hidden_ = lstm.params().hidden_size();
  const auto shapes = net.head_.trace_shapes({net.hidden_});
  if (shapes.back() != nn::Shape{2}) throw DataError("tracker head does not map the hidden state to 2 coordinates");
  return net;
}

nn::Tensor TrackerNet::forward(const nn::Tensor& input, bool training) {
  if (input.rank() != 3 || input.dim(2) != feature_dim_)
    throw InputError("tracker input must be [N,T," + std::to_string(feature_dim_) + "], got " +
                     nn::shape_string(input.dims()));
  batch_ = input.dim(0);
  steps_ = input.dim(1);
  nn::Tensor hidden = recurrent_.forward(input, training);
  hidden.reshape({batch_ * steps_, hidden_});
  nn::Tensor out = head_.forward(hidden, training);
  out.reshape({batch_, steps_, 2});
  return out;
}

nn::Tensor TrackerNet::infer(const nn::Tensor& input) const {
  if (input.rank() != 3 || input.dim(2) != feature_dim_)
    throw InputError("tracker input must be [N,T," + std::to_string(feature_dim_) + "], got " +
                     nn::shape_string(input.dims()));
  const std::size_t n = input.dim(0), t = input.dim(1);
  nn::Tensor hidden = recurrent_.infer(input);
  hidden.reshape({n * t, hidden_});
  nn::Tensor out = head_.infer(hidden);
  out.reshape({n, t, 2});
  return out;
}

void TrackerNet::backward(const nn::Tensor& grad_output) {
  nn::require_shape(grad_output, {batch_, steps_, 2}, "tracker grad_output");
  nn::Tensor g = head_.backward(grad_output.reshaped({batch_ * steps_, 2}));
  g.reshape({batch_, steps_, hidden_});
  recurrent_.backward(g);
}

std::vector<nn::Tensor*> TrackerNet::parameters() {
  auto p = recurrent_.parameters();
  for (auto* t : head_.parameters()) p.push_back(t);
  return p;
}

std::vector<nn::CheckpointLayer> TrackerNet::to_checkpoint() const {
  auto layers = recurrent_.to_checkpoint();
  for (auto& l : head_.to_checkpoint()) layers.push_back(std::move(l));
  return layers;
}

TrackerNet TrackerNet::clone() const {
  TrackerNet c;
  c.recurrent_ = recurrent_.clone();
  c.head_ = head_.clone();
  c.feature_dim_ = feature_dim_;
  c.hidden_ = hidden_;
  return c;
}

// -------------------------------------------------------------------- training

nn::Tensor trajectory_inputs(const TrajectorySet& set, const FeatureMatrix& features, std::size_t first,
                             std::size_t count) {
  const std::size_t t_len = set.steps, d = features.dim;
  nn::Tensor x({count, t_len, d});
  for (std::size_t i = 0; i < count; ++i) {
    const Trajectory& tr = set.trajectories[first + i];
    for (std::size_t s = 0; s < t_len; ++s) {
      const auto row = features.row(tr.row[s]);
      std::copy(row.begin(), row.end(), x.values().begin() + static_cast<std::ptrdiff_t>((i * t_len + s) * d));
    }
  }
  return x;
}

nn::Tensor trajectory_targets(const TrajectorySet& set, const FeatureMatrix& features, std::size_t first,
                              std::size_t count) {
  const std::size_t t_len = set.steps;
  nn::Tensor y({count, t_len, 2});
  for (std::size_t i = 0; i < count; ++i) {
    const Trajectory& tr = set.trajectories[first + i];
    for (std::size_t s = 0; s < t_len; ++s) {
      const Point2 p = features.location[tr.row[s]];
      y[(i * t_len + s) * 2] = p.x;
      y[(i * t_len + s) * 2 + 1] = p.y;
    }
  }
  return y;
}

double trajectory_error(const TrainedTracker& tracker, const TrajectorySet& set, const FeatureMatrix& features) {
  check_features(set, features);
  if (set.trajectories.empty()) throw InputError("cannot evaluate on an empty trajectory set");
  if (features.dim != tracker.net.feature_dim()) throw InputError("feature width does not match the tracker");
  double sum = 0.0;
  const std::size_t n = set.trajectories.size();
  for (std::size_t start = 0; start < n; start += kInferenceChunk) {
    const std::size_t count = std::min(kInferenceChunk, n - start);
    const nn::Tensor pred = tracker.net.infer(trajectory_inputs(set, features, start, count));
    const nn::Tensor target = trajectory_targets(set, features, start, count);
    for (std::size_t r = 0; r < pred.size() / 2; ++r)
      sum += distance(tracker.bounds.clamp({pred[2 * r], pred[2 * r + 1]}), {target[2 * r], target[2 * r + 1]});
  }
  return sum / static_cast<double>(n * set.steps);
}

LstmTrainResult train_lstm(const FeatureMatrix& features, const TrajectorySet& train,
                           const FeatureMatrix& val_features, const TrajectorySet& validation, const LstmConfig& config, Box bounds, std::uint64_t seed,
                           const std::function<void(const LstmEpochStats&)>& on_epoch) {
  config.validate();
  if (train.trajectories.empty()) throw InputError("training trajectory set is empty");
  if (validation.trajectories.empty()) throw InputError("validation trajectory set is empty");
  if (train.steps != validation.steps) throw InputError("training and validation trajectories differ in length");
  if (!bounds.valid()) throw ConfigError("site bounds must have positive extent");
  check_features(train, features);
  check_features(validation, val_features);
  if (val_features.dim != features.dim) throw InputError("training and validation features differ in width");

  Point2 mean{0.0, 0.0};
  for (const auto& t : train.trajectories)
    for (auto row : t.row) mean = mean + features.location[row];
  mean = (1.0 / static_cast<double>(train.trajectories.size() * train.steps)) * mean;

  LstmTrainResult result;
  TrainedTracker current{config, TrackerNet::build(features.dim, config, mean, seed), train.steps, bounds};
  result.tracker = {config, current.net.clone(), train.steps, bounds};
  double best_error = INFINITY;

  nn::AdamOptimizer adam(current.net.parameters(), {config.learning_rate});
  const std::size_t n = train.trajectories.size();
  std::vector<std::size_t> order(n);
  TrajectorySet batch_set;
  batch_set.steps = train.steps;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = make_rng(seed, {kTagShuffle, epoch});
    std::shuffle(order.begin(), order.end(), shuffle);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      batch_set.trajectories.clear();
      for (std::size_t i = start; i < stop; ++i) batch_set.trajectories.push_back(train.trajectories[order[i]]);
      adam.zero_grad();
      const nn::Tensor pred = current.net.forward(trajectory_inputs(batch_set, features, 0, stop - start), true);
      const nn::LossAndGrad loss =
          nn::euclidean_loss_rows(pred, trajectory_targets(batch_set, features, 0, stop - start));
      if (!std::isfinite(loss.value))
        throw NumericError("LSTM training loss became non-finite in epoch " + std::to_string(epoch));
      current.net.backward(loss.grad);
      adam.step();
      loss_sum += loss.value * static_cast<double>(stop - start);
    }
    if (!adam.all_finite()) throw NumericError("LSTM parameters became non-finite in epoch " + std::to_string(epoch));

    LstmEpochStats stats{epoch, loss_sum / static_cast<double>(n), trajectory_error(current, validation, val_features)};
    result.curve.push_back(stats);
    if (stats.val_error < best_error) {
      best_error = stats.val_error;
      result.tracker.net = current.net.clone();
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

// ------------------------------------------------------------------ persistence

void save_tracker(const std::filesystem::path& path, const TrainedTracker& tracker) {
  nn::save_checkpoint(path, tracker.net.to_checkpoint());
  std::filesystem::path meta = path;
  meta += ".meta";
  std::ofstream out(meta);
  if (!out) throw DataError(meta.string() + ": cannot open for writing");
  const LstmConfig& c = tracker.config;
  out << "format=csiloc-tracker\nversion=1\nT=" << tracker.steps << "\nfeature_dim=" << tracker.net.feature_dim()
      << "\nhidden=" << tracker.net.hidden() << "\ndropout=" << format_double(c.dropout)
      << "\nlstm_lr=" << format_double(c.learning_rate) << "\nlstm_epochs=" << c.epochs
      << "\nlstm_batch=" << c.batch_size << "\nbounds_x0=" << format_double(tracker.bounds.x0)
      << "\nbounds_y0=" << format_double(tracker.bounds.y0) << "\nbounds_x1=" << format_double(tracker.bounds.x1)
      << "\nbounds_y1=" << format_double(tracker.bounds.y1) << "\n";
  if (!out) throw DataError(meta.string() + ": write failed");
}

TrainedTracker load_tracker(const std::filesystem::path& path) {
  std::filesystem::path meta_path = path;
  meta_path += ".meta";
  const KeyValueConfig meta = KeyValueConfig::load(meta_path);
  if (meta.get_string("format", "") != "csiloc-tracker")
    throw DataError(meta_path.string() + ": field 'format' is not csiloc-tracker");
  if (meta.get_string("version", "") != "1") throw DataError(meta_path.string() + ": unsupported field 'version'");
  TrainedTracker t;
  t.config.apply(meta);
  t.steps = meta.get_uint("T", 0);
  if (t.steps == 0) throw DataError(meta_path.string() + ": field 'T' must be positive");
  t.bounds = {meta.get_double("bounds_x0", 0), meta.get_double("bounds_y0", 0), meta.get_double("bounds_x1", 0),
              meta.get_double("bounds_y1", 0)};
  if (!t.bounds.valid()) throw DataError(meta_path.string() + ": field 'bounds' is empty");
  t.net = TrackerNet::from_checkpoint(nn::load_checkpoint(path));
  if (t.net.feature_dim() != meta.get_uint("feature_dim", 0))
    throw DataError(path.string() + ": LSTM input width does not match field 'feature_dim'");
  if (t.net.hidden() != meta.get_uint("hidden", 0))
    throw DataError(path.string() + ": LSTM hidden size does not match field 'hidden'");
  return t;
}

// ---------------------------------------------------------------------- online

OnlineTracker::OnlineTracker(const quant::TrainedQuantifier& quantifier, const TrainedTracker& tracker, Warmup warmup)
    : quantifier_(quantifier), tracker_(tracker), warmup_(warmup) {
  if (quantifier.feature_dim() != tracker.net.feature_dim())
    throw InputError("quantifier feature width " + std::to_string(quantifier.feature_dim()) +
                     " does not match tracker input width " + std::to_string(tracker.net.feature_dim()));
}

void OnlineTracker::reset() {
  window_.clear();
  window_outputs_.clear();
}

Point2 OnlineTracker::update(const csi::CsiImage& raw_image) {
  const csi::CsiImage image = quant::prepare_test_image(quantifier_, raw_image);
  const auto feature = quant::extract_features(quantifier_, image);
  const Point2 cnn = warmup_ == Warmup::cnn_only && window_.size() + 1 < tracker_.steps
                         ? quant::predict_cnn_only(quantifier_, image)
                         : Point2{};
  return update_feature(feature, cnn);
}

Point2 OnlineTracker::update_feature(const std::vector<double>& feature, Point2 cnn_estimate) {
  const std::size_t t_len = tracker_.steps, d = tracker_.net.feature_dim();
  if (feature.size() != d) throw InputError("feature width does not match the tracker");
  window_.push_back(feature);
  if (window_.size() > t_len) window_.pop_front();
  if (window_.size() < t_len && warmup_ == Warmup::cnn_only) {
    window_outputs_.assign(1, tracker_.bounds.clamp(cnn_estimate));
    return window_outputs_.back();
  }
  // Until the window is full, the oldest feature stands in for the missing history.
  const std::size_t pad = t_len - window_.size();
  nn::Tensor x({1, t_len, d});
  for (std::size_t s = 0; s < t_len; ++s) {
    const auto& f = window_[s < pad ? 0 : s - pad];
    std::copy(f.begin(), f.end(), x.values().begin() + static_cast<std::ptrdiff_t>(s * d));
  }
  const nn::Tensor out = tracker_.net.infer(x);
  window_outputs_.clear();
  for (std::size_t s = 0; s < t_len; ++s) window_outputs_.push_back(tracker_.bounds.clamp({out[2 * s], out[2 * s + 1]}));
  return window_outputs_.back();
}

std::vector<Point2> track(const std::vector<csi::CsiImage>& raw_images, const quant::TrainedQuantifier& quantifier,
                          const TrainedTracker& tracker, Warmup warmup) {
  OnlineTracker online(quantifier, tracker, warmup);
  std::vector<Point2> out;
  out.reserve(raw_images.size());
  for (const auto& img : raw_images) out.push_back(online.update(img));
  return out;
}

}  // namespace csiloc::track
