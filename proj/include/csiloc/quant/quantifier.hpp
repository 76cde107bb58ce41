#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "csiloc/config.hpp"
#include "csiloc/csi/database.hpp"
#include "csiloc/csi/preprocess.hpp"
#include "csiloc/geometry.hpp"
#include "csiloc/nn/sequential.hpp"

namespace csiloc::quant {

/// CNN regression model: conv stack, two fully connected layers, 2-D linear head.
struct CnnConfig {
  csi::DeviceProfile profile = csi::DeviceProfile::nic();
  std::size_t conv_layers = 3;
  std::size_t kernel = 5;
  std::size_t filters = 10;
  std::size_t fc1 = 0;  // 0 means H * W * filters
  std::size_t fc2 = 0;  // 0 means fc1 / 10
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t median_window = csi::kDefaultMedianWindow;

  /// Architecture-table defaults; 100 epochs for the NIC, 300 for the phone.
  static CnnConfig defaults(const csi::DeviceProfile& profile);
  /// Applies overrides (fc1, fc2, epochs, batch, lr, window, kernel, filters, conv_layers).
  void apply(const KeyValueConfig& cfg);
  void validate() const;

  std::size_t fc1_size() const;
  std::size_t fc2_size() const;
  nn::Shape input_shape() const { return {profile.scans, profile.subcarriers, profile.antennae}; }
  std::vector<nn::LayerSpec> layer_specs() const;
  /// Layers [0, feature_end()) produce the FC2 post-ReLU features.
  std::size_t feature_end() const { return 2 * conv_layers + 4; }
};

struct TrainedQuantifier {
  CnnConfig config;
  nn::Sequential model;
  csi::NormalizationContext context;
  Box bounds;

  std::size_t feature_dim() const { return config.fc2_size(); }
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean Euclidean loss over the epoch's mini-batches, meters
  double val_error = 0.0;   // mean clamped validation error, meters
};

struct CnnTrainResult {
  TrainedQuantifier quantifier;  // best-validation parameters
  std::vector<EpochStats> curve;
  std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Copies preprocessed images into an [N,H,W,C] batch.
nn::Tensor image_batch(const std::vector<const csi::CsiImage*>& images);

/// Builds a freshly initialised model; the head bias starts at `target_mean`.
nn::Sequential build_cnn(const CnnConfig& config, Point2 target_mean, std::uint64_t seed);

/// Adam on the Euclidean loss over shuffled mini-batches; keeps the epoch with the
/// lowest validation error. Both databases must already be preprocessed.
CnnTrainResult train_cnn(const csi::CsiDatabase& train, const csi::CsiDatabase& validation, const CnnConfig& config,
                         const csi::NormalizationContext& context, Box bounds, std::uint64_t seed,
                         const EpochCallback& on_epoch = {});

/// FC2 activations for preprocessed images, one row per image.
std::vector<std::vector<double>> extract_features(const TrainedQuantifier& q,
                                                  const std::vector<const csi::CsiImage*>& images);
std::vector<double> extract_features(const TrainedQuantifier& q, const csi::CsiImage& image);

/// Full forward pass, clamped to the site bounds.
std::vector<Point2> predict_cnn_only(const TrainedQuantifier& q, const std::vector<const csi::CsiImage*>& images);
Point2 predict_cnn_only(const TrainedQuantifier& q, const csi::CsiImage& image);

/// Mean clamped error of CNN-only predictions over a preprocessed database.
double mean_error(const TrainedQuantifier& q, const csi::CsiDatabase& db);

/// Preprocesses a raw test image with the stored context (own power level).
csi::CsiImage prepare_test_image(const TrainedQuantifier& q, const csi::CsiImage& raw);

/// Writes `path` (NNCK), `path`.meta (config and bounds) and `path`.context.
void save_quantifier(const std::filesystem::path& path, const TrainedQuantifier& q);
TrainedQuantifier load_quantifier(const std::filesystem::path& path);

}  // namespace csiloc::quant
