#include "csiloc/quant/quantifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "csiloc/error.hpp"
#include "csiloc/nn/adam.hpp"
#include "csiloc/nn/loss.hpp"
#include "csiloc/rng.hpp"

namespace csiloc::quant {

namespace {

constexpr std::size_t kInferenceChunk = 64;
constexpr std::uint64_t kTagInit = 0x1417;
constexpr std::uint64_t kTagShuffle = 0x5cff1e;
constexpr std::uint64_t kTagDropout = 0xd0;

std::vector<const csi::CsiImage*> images_of(const csi::CsiDatabase& db) {
  std::vector<const csi::CsiImage*> out;
  out.reserve(db.records.size());
  for (const auto& r : db.records) out.push_back(&r.image);
  return out;
}

void check_profile(const CnnConfig& config, const csi::CsiImage& image) {
  if (!(image.profile == config.profile))
    throw InputError("image profile " + csi::to_string(image.profile) + " does not match model profile " +
                     csi::to_string(config.profile));
}

// Runs layers [0, end) over the images in fixed-size chunks.
std::vector<std::vector<double>> run_chunks(const TrainedQuantifier& q, const std::vector<const csi::CsiImage*>& images,
                                            std::size_t end) {
  std::vector<std::vector<double>> rows;
  rows.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += kInferenceChunk) {
    const std::size_t stop = std::min(images.size(), start + kInferenceChunk);
    std::vector<const csi::CsiImage*> chunk(images.begin() + static_cast<std::ptrdiff_t>(start),
                                            images.begin() + static_cast<std::ptrdiff_t>(stop));
    for (const auto* img : chunk) check_profile(q.config, *img);
    const nn::Tensor out = q.model.infer(image_batch(chunk), end);
    const std::size_t width = out.size() / chunk.size();
    for (std::size_t i = 0; i < chunk.size(); ++i)
      rows.emplace_back(out.values().begin() + static_cast<std::ptrdiff_t>(i * width),
                        out.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
  }
  return rows;
}

}  // namespace

CnnConfig CnnConfig::defaults(const csi::DeviceProfile& profile) {
  CnnConfig c;
  c.profile = profile;
  c.epochs = profile == csi::DeviceProfile::phone() ? 300 : 100;
  return c;
}

void CnnConfig::apply(const KeyValueConfig& cfg) {
  conv_layers = cfg.get_uint("conv_layers", conv_layers);
  kernel = cfg.get_uint("kernel", kernel);
  filters = cfg.get_uint("filters", filters);
  fc1 = cfg.get_uint("fc1", fc1);
  fc2 = cfg.get_uint("fc2", fc2);
  epochs = cfg.get_uint("epochs", epochs);
  batch_size = cfg.get_uint("batch", batch_size);
  learning_rate = cfg.get_double("lr", learning_rate);
  median_window = cfg.get_uint("window", median_window);
}

void CnnConfig::validate() const {
  if (profile.element_count() == 0) throw ConfigError("CNN input profile is empty");
  if (conv_layers == 0) throw ConfigError("need at least one convolution layer");
  if (kernel == 0 || kernel % 2 == 0) throw ConfigError("convolution kernel must be odd");
  if (filters == 0) throw ConfigError("convolution filter count must be positive");
  if (fc1_size() == 0 || fc2_size() == 0) throw ConfigError("fully connected sizes must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (median_window == 0 || median_window % 2 == 0) throw ConfigError("median window must be odd");
}

std::size_t CnnConfig::fc1_size() const {
  return fc1 != 0 ? fc1 : std::size_t{profile.scans} * profile.subcarriers * filters;
}

std::size_t CnnConfig::fc2_size() const { return fc2 != 0 ? fc2 : fc1_size() / 10; }

std::vector<nn::LayerSpec> CnnConfig::layer_specs() const {
  std::vector<nn::LayerSpec> specs;
  for (std::size_t i = 0; i < conv_layers; ++i) {
    specs.push_back(nn::LayerSpec::conv(kernel, kernel, filters));
    specs.push_back(nn::LayerSpec::relu());
  }
  const std::size_t flat = std::size_t{profile.scans} * profile.subcarriers * filters;
  specs.push_back(nn::LayerSpec::dense(flat, fc1_size()));
  specs.push_back(nn::LayerSpec::relu());
  specs.push_back(nn::LayerSpec::dense(fc1_size(), fc2_size()));
  specs.push_back(nn::LayerSpec::relu());
  specs.push_back(nn::LayerSpec::dense(fc2_size(), 2));
  return specs;
}

nn::Tensor image_batch(const std::vector<const csi::CsiImage*>& images) {
  if (images.empty()) throw InputError("empty image batch");
  const csi::DeviceProfile p = images.front()->profile;
  nn::Tensor batch({images.size(), p.scans, p.subcarriers, p.antennae});
  const std::size_t n = p.element_count();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!(images[i]->profile == p)) throw InputError("mixed device profiles in one batch");
    std::copy(images[i]->amplitudes.begin(), images[i]->amplitudes.end(),
              batch.values().begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return batch;
}

nn::Sequential build_cnn(const CnnConfig& config, Point2 target_mean, std::uint64_t seed) {
  config.validate();
  Rng rng = make_rng(seed, {kTagInit});
  nn::Sequential model = nn::Sequential::build(config.layer_specs(), config.input_shape(), rng);
  // Targets are raw meters; starting the head at the mean target saves the many early
  // epochs a zero bias would spend drifting towards the middle of the site.
  auto params = model.parameters();
  nn::Tensor& head_bias = *params.back();
  head_bias[0] = target_mean.x;
  head_bias[1] = target_mean.y;
  return model;
}

CnnTrainResult train_cnn(const csi::CsiDatabase& train, const csi::CsiDatabase& validation, const CnnConfig& config,
                         const csi::NormalizationContext& context, Box bounds, std::uint64_t seed,
                         const EpochCallback& on_epoch) {
  config.validate();
  if (train.records.empty()) throw InputError("training database is empty");
  if (validation.records.empty()) throw InputError("validation database is empty");
  if (!(train.profile == config.profile) || !(validation.profile == config.profile))
    throw InputError("database profile does not match the CNN input profile " + csi::to_string(config.profile));
  if (!bounds.valid()) throw ConfigError("site bounds must have positive extent");

  Point2 mean{0.0, 0.0};
  for (const auto& r : train.records) mean = mean + r.location;
  mean = (1.0 / static_cast<double>(train.records.size())) * mean;

  CnnTrainResult result;
  result.quantifier.config = config;
  result.quantifier.context = context;
  result.quantifier.bounds = bounds;
  result.quantifier.model = build_cnn(config, mean, seed);
  nn::Sequential& model = result.quantifier.model;

  TrainedQuantifier best;
  best.config = config;
  best.context = context;
  best.bounds = bounds;
  double best_error = INFINITY;

  nn::AdamOptimizer adam(model.parameters(), {config.learning_rate});
  const std::size_t n = train.records.size();
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = make_rng(seed, {kTagShuffle, epoch});
    std::shuffle(order.begin(), order.end(), shuffle);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      std::vector<const csi::CsiImage*> batch;
      nn::Tensor target({stop - start, 2});
      for (std::size_t i = start; i < stop; ++i) {
        const auto& rec = train.records[order[i]];
        batch.push_back(&rec.image);
        target[2 * (i - start)] = rec.location.x;
        target[2 * (i - start) + 1] = rec.location.y;
      }
      adam.zero_grad();
      const nn::Tensor pred = model.forward(image_batch(batch), true);
      const nn::LossAndGrad loss = nn::euclidean_loss_rows(pred, target);
      if (!std::isfinite(loss.value)) throw NumericError("CNN training loss became non-finite in epoch " + std::to_string(epoch));
      model.backward(loss.grad);
      adam.step();
      loss_sum += loss.value * static_cast<double>(stop - start);
    }
    if (!adam.all_finite()) throw NumericError("CNN parameters became non-finite in epoch " + std::to_string(epoch));

    EpochStats stats{epoch, loss_sum / static_cast<double>(n), mean_error(result.quantifier, validation)};
    result.curve.push_back(stats);
    if (stats.val_error < best_error) {
      best_error = stats.val_error;
      best.model = model.clone();
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(stats);
  }
  result.quantifier = std::move(best);
  return result;
}

std::vector<std::vector<double>> extract_features(const TrainedQuantifier& q,
                                                  const std::vector<const csi::CsiImage*>& images) {
  if (images.empty()) return {};
  return run_chunks(q, images, q.config.feature_end());
}

std::vector<double> extract_features(const TrainedQuantifier& q, const csi::CsiImage& image) {
  return extract_features(q, std::vector<const csi::CsiImage*>{&image}).front();
}

std::vector<Point2> predict_cnn_only(const TrainedQuantifier& q, const std::vector<const csi::CsiImage*>& images) {
  std::vector<Point2> out;
  if (images.empty()) return out;
  for (const auto& row : run_chunks(q, images, nn::Sequential::npos)) out.push_back(q.bounds.clamp({row[0], row[1]}));
  return out;
}

Point2 predict_cnn_only(const TrainedQuantifier& q, const csi::CsiImage& image) {
  return predict_cnn_only(q, std::vector<const csi::CsiImage*>{&image}).front();
}

double mean_error(const TrainedQuantifier& q, const csi::CsiDatabase& db) {
  if (db.records.empty()) throw InputError("cannot evaluate on an empty database");
  const auto pred = predict_cnn_only(q, images_of(db));
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += distance(pred[i], db.records[i].location);
  return sum / static_cast<double>(pred.size());
}

csi::CsiImage prepare_test_image(const TrainedQuantifier& q, const csi::CsiImage& raw) {
  check_profile(q.config, raw);
  return csi::preprocess(raw, q.context, q.config.median_window);
}

void save_quantifier(const std::filesystem::path& path, const TrainedQuantifier& q) {
  nn::save_checkpoint(path, q.model.to_checkpoint());
  std::filesystem::path meta = path;
  meta += ".meta";
  std::ofstream out(meta);
  if (!out) throw DataError(meta.string() + ": cannot open for writing");
  const CnnConfig& c = q.config;
  out << "format=csiloc-quantifier\nversion=1\n"
      << "profile=" << c.profile.name() << "\nscans=" << c.profile.scans << "\nsubcarriers=" << c.profile.subcarriers
      << "\nantennae=" << c.profile.antennae << "\nconv_layers=" << c.conv_layers << "\nkernel=" << c.kernel
      << "\nfilters=" << c.filters << "\nfc1=" << c.fc1_size() << "\nfc2=" << c.fc2_size() << "\nepochs=" << c.epochs
      << "\nbatch=" << c.batch_size << "\nlr=" << format_double(c.learning_rate) << "\nwindow=" << c.median_window
      << "\nbounds_x0=" << format_double(q.bounds.x0) << "\nbounds_y0=" << format_double(q.bounds.y0)
      << "\nbounds_x1=" << format_double(q.bounds.x1) << "\nbounds_y1=" << format_double(q.bounds.y1) << "\n";
  if (!out) throw DataError(meta.string() + ": write failed");
  std::filesystem::path ctx = path;
  ctx += ".context";
  csi::write_context(ctx, q.context);
}

TrainedQuantifier load_quantifier(const std::filesystem::path& path) {
  std::filesystem::path meta_path = path, ctx_path = path;
  meta_path += ".meta";
  ctx_path += ".context";
  const KeyValueConfig meta = KeyValueConfig::load(meta_path);
  if (meta.get_string("format", "") != "csiloc-quantifier")
    throw DataError(meta_path.string() + ": field 'format' is not csiloc-quantifier");
  if (meta.get_string("version", "") != "1") throw DataError(meta_path.string() + ": unsupported field 'version'");

  TrainedQuantifier q;
  const csi::DeviceProfile profile{static_cast<std::uint16_t>(meta.get_uint("scans", 0)),
                                   static_cast<std::uint16_t>(meta.get_uint("subcarriers", 0)),
                                   static_cast<std::uint16_t>(meta.get_uint("antennae", 0))};
  if (profile.element_count() == 0 || profile.element_count() > (1u << 24))
    throw DataError(meta_path.string() + ": image dimensions are missing or implausible");
  if (meta.get_string("profile", "") != profile.name())
    throw DataError(meta_path.string() + ": field 'profile' does not match the image dimensions");
  q.config = CnnConfig::defaults(profile);
  KeyValueConfig overrides = meta;
  q.config.apply(overrides);
  q.config.validate();
  q.bounds = {meta.get_double("bounds_x0", 0), meta.get_double("bounds_y0", 0), meta.get_double("bounds_x1", 0),
              meta.get_double("bounds_y1", 0)};
  if (!q.bounds.valid()) throw DataError(meta_path.string() + ": field 'bounds' is empty");
  q.context = csi::read_context(ctx_path);
  q.model = nn::Sequential::from_checkpoint(nn::load_checkpoint(path), derive_seed(0, {kTagDropout}));

  // The checkpoint must describe the architecture recorded in the metadata.
  const auto expected = q.config.layer_specs();
  if (q.model.size() != expected.size())
    throw DataError(path.string() + ": layer count " + std::to_string(q.model.size()) + " does not match metadata");
  const auto shapes = q.model.trace_shapes(q.config.input_shape());
  if (shapes.back() != nn::Shape{2}) throw DataError(path.string() + ": model head does not emit 2 coordinates");
  if (shapes[q.config.feature_end() - 1] != nn::Shape{q.config.fc2_size()})
    throw DataError(path.string() + ": feature layer width does not match field 'fc2'");
  return q;
}

}  // namespace csiloc::quant
