#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <vector>

#include "csiloc/config.hpp"
#include "csiloc/csi/image.hpp"
#include "csiloc/geometry.hpp"
#include "csiloc/nn/sequential.hpp"
#include "csiloc/quant/quantifier.hpp"
#include "csiloc/track/features.hpp"

namespace csiloc::track {

struct TrajectoryConfig {
  std::size_t memory_length = 5;  // T
  double step_bound = 2.0;        // sigma, meters
  double sample_interval = 1.0;   // delta t, seconds
  std::size_t train_count = 30000;
  std::size_t validation_count = 15000;

  void apply(const KeyValueConfig& cfg);
  void validate() const;
};

/// Random walks over RPs: a uniform start, then each next RP uniform among the RPs
/// within step_bound of the current one (itself included), and for every step a
/// uniformly chosen stored snapshot of that RP.
TrajectorySet generate_trajectories(const FeatureMatrix& features, const TrajectoryConfig& config, std::size_t count,
                                    std::uint64_t seed);

/// A trajectory that stays on one RP: T distinct snapshots when available.
Trajectory self_trajectory(const FeatureMatrix& features, std::uint32_t rp, std::size_t steps, std::uint64_t seed);

struct LstmConfig {
  std::size_t hidden = 0;  // 0 means the feature width
  double dropout = 0.2;
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;

  void apply(const KeyValueConfig& cfg);
  void validate() const;
  std::size_t hidden_for(std::size_t feature_dim) const { return hidden != 0 ? hidden : feature_dim; }
};

/// LSTM over [N,T,D] features, dropout on its outputs, and a 2-D head applied at
/// every step, so one T-step window yields T location estimates.
class TrackerNet {
 public:
  static TrackerNet build(std::size_t feature_dim, const LstmConfig& config, Point2 target_mean, std::uint64_t seed);
  static TrackerNet from_checkpoint(const std::vector<nn::CheckpointLayer>& layers);

  nn::Tensor forward(const nn::Tensor& input, bool training);
  nn::Tensor infer(const nn::Tensor& input) const;
  void backward(const nn::Tensor& grad_output);
  std::vector<nn::Tensor*> parameters();
  std::vector<nn::CheckpointLayer> to_checkpoint() const;
  TrackerNet clone() const;

  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t hidden() const { return hidden_; }

 private:
  nn::Sequential recurrent_;
  nn::Sequential head_;
  std::size_t feature_dim_ = 0;
  std::size_t hidden_ = 0;
  std::size_t batch_ = 0;
  std::size_t steps_ = 0;
};

struct TrainedTracker {
  LstmConfig config;
  TrackerNet net;
  std::size_t steps = 5;
  Box bounds;
};

struct LstmEpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per-step Euclidean loss, meters
  double val_error = 0.0;   // mean clamped per-step error over validation windows
};

struct LstmTrainResult {
  TrainedTracker tracker;
  std::vector<LstmEpochStats> curve;
  std::size_t best_epoch = 0;
};

/// [N,T,D] features and [N,T,2] targets for a set of trajectories.
nn::Tensor trajectory_inputs(const TrajectorySet& set, const FeatureMatrix& features, std::size_t first,
                             std::size_t count);
nn::Tensor trajectory_targets(const TrajectorySet& set, const FeatureMatrix& features, std::size_t first,
                              std::size_t count);

/// Trajectories index rows of the feature matrix they are paired with.
LstmTrainResult train_lstm(const FeatureMatrix& train_features, const TrajectorySet& train,
                           const FeatureMatrix& val_features, const TrajectorySet& validation, const LstmConfig& config, Box bounds, std::uint64_t seed,
                           const std::function<void(const LstmEpochStats&)>& on_epoch = {});

/// Mean clamped per-step error of the tracker over every trajectory of a set.
double trajectory_error(const TrainedTracker& tracker, const TrajectorySet& set, const FeatureMatrix& features);

void save_tracker(const std::filesystem::path& path, const TrainedTracker& tracker);
TrainedTracker load_tracker(const std::filesystem::path& path);

/// How predictions are made before T features have arrived.
enum class Warmup { repeat_oldest, cnn_only };

/// Online location updates for one device. Keeps the last T features; each update
/// returns the estimate for the newest step of the window.
class OnlineTracker {
 public:
  OnlineTracker(const quant::TrainedQuantifier& quantifier, const TrainedTracker& tracker,
                Warmup warmup = Warmup::repeat_oldest);

  /// Takes a raw CSI image, preprocesses it and returns the current estimate.
  Point2 update(const csi::CsiImage& raw_image);
  /// Same as update() but for an already extracted feature vector.
  Point2 update_feature(const std::vector<double>& feature, Point2 cnn_estimate);
  /// All T outputs of the most recent window, oldest first.
  const std::vector<Point2>& last_window_outputs() const { return window_outputs_; }
  void reset();

 private:
  const quant::TrainedQuantifier& quantifier_;
  const TrainedTracker& tracker_;
  Warmup warmup_;
  std::deque<std::vector<double>> window_;
  std::vector<Point2> window_outputs_;
};

/// Runs an OnlineTracker over an image sequence in time order.
std::vector<Point2> track(const std::vector<csi::CsiImage>& raw_images, const quant::TrainedQuantifier& quantifier,
                          const TrainedTracker& tracker, Warmup warmup = Warmup::repeat_oldest);

}  // namespace csiloc::track
