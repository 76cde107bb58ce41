#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "csiloc/csi/preprocess.hpp"
#include "csiloc/error.hpp"
#include "csiloc/quant/quantifier.hpp"

using namespace csiloc;
using namespace csiloc::quant;

namespace {

const csi::DeviceProfile kSmall{6, 6, 1};

CnnConfig small_config() {
  CnnConfig c;
  c.profile = kSmall;
  c.conv_layers = 2;
  c.kernel = 3;
  c.filters = 4;
  c.fc1 = 32;
  c.fc2 = 16;
  c.epochs = 5;
  c.batch_size = 4;
  c.learning_rate = 3e-3;
  c.median_window = 3;
  return c;
}

// Distinct random images in [0,1] at random locations, one per RP.
csi::CsiDatabase random_db(std::size_t count, std::uint64_t seed) {
  csi::CsiDatabase db;
  db.profile = kSmall;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0), loc(0.5, 9.5);
  for (std::size_t i = 0; i < count; ++i) {
    csi::FingerprintRecord r;
    r.image = csi::CsiImage(kSmall);
    for (auto& a : r.image.amplitudes) a = u(rng);
    r.location = {loc(rng), loc(rng)};
    r.rp_index = static_cast<std::int32_t>(i);
    r.snapshot_time = static_cast<double>(i);
    db.records.push_back(std::move(r));
  }
  return db;
}

csi::NormalizationContext unit_context(const csi::CsiDatabase& db) {
  csi::NormalizationContext ctx;
  for (const auto& r : db.records) ctx.per_rp_average[r.rp_index] = 0.5;
  ctx.a_max = 0.5;
  ctx.source = "unit";
  return ctx;
}

const Box kBounds{0, 0, 10, 10};

}  // namespace

TEST_CASE("default sizes follow the architecture table") {
  const CnnConfig nic = CnnConfig::defaults(csi::DeviceProfile::nic());
  CHECK(nic.fc1_size() == 9000);
  CHECK(nic.fc2_size() == 900);
  CHECK(nic.epochs == 100);
  const CnnConfig phone = CnnConfig::defaults(csi::DeviceProfile::phone());
  CHECK(phone.fc1_size() == 4700);
  CHECK(phone.fc2_size() == 470);
  CHECK(phone.epochs == 300);
  const auto specs = nic.layer_specs();
  REQUIRE(specs.size() == 11);
  CHECK(specs[0].kind == nn::LayerKind::conv2d);
  CHECK(specs[0].kernel_h == 5);
  CHECK(specs[0].filters == 10);
  CHECK(specs.back().out_features == 2);
  CHECK(nic.feature_end() == 10);
}

TEST_CASE("small model traces the expected shapes") {
  const CnnConfig c = small_config();
  const nn::Sequential m = build_cnn(c, {1, 1}, 1);
  const auto shapes = m.trace_shapes(c.input_shape());
  CHECK(shapes[0] == nn::Shape{6, 6, 4});
  CHECK(shapes[c.feature_end() - 1] == nn::Shape{16});
  CHECK(shapes.back() == nn::Shape{2});
}

TEST_CASE("config overrides and validation") {
  CnnConfig c = small_config();
  c.apply(KeyValueConfig::parse("fc1=64\nepochs=7\nlr=0.01\n", "unit"));
  CHECK(c.fc1_size() == 64);
  CHECK(c.fc2_size() == 16);
  CHECK(c.epochs == 7);
  CHECK(c.learning_rate == 0.01);
  c.kernel = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.median_window = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("head bias starts at the mean target") {
  const nn::Sequential m = build_cnn(small_config(), {3.25, 7.5}, 2);
  const nn::Tensor zeros({1, 6, 6, 1}, 0.0);
  // With zero input and zero conv/FC biases every hidden unit is zero, so only the
  // head bias survives.
  const nn::Tensor out = m.infer(zeros);
  CHECK(out[0] == doctest::Approx(3.25));
  CHECK(out[1] == doctest::Approx(7.5));
}

TEST_CASE("memorizes a handful of images") {
  const csi::CsiDatabase db = random_db(10, 1);
  CnnConfig c = small_config();
  c.epochs = 400;
  c.batch_size = 10;
  const CnnTrainResult r = train_cnn(db, db, c, unit_context(db), kBounds, 3);
  CHECK(r.curve.size() == 400);
  CHECK(mean_error(r.quantifier, db) < 0.1);
}

TEST_CASE("a single RP collapses to its location") {
  csi::CsiDatabase db = random_db(6, 2);
  for (auto& r : db.records) {
    r.location = {4.0, 6.0};
    r.rp_index = 0;
  }
  CnnConfig c = small_config();
  c.epochs = 30;
  const CnnTrainResult r = train_cnn(db, db, c, unit_context(db), kBounds, 5);
  CHECK(mean_error(r.quantifier, db) < 0.05);
}

TEST_CASE("training beats the untrained model and keeps the best epoch") {
  const csi::CsiDatabase train = random_db(40, 3);
  CnnConfig c = small_config();
  c.epochs = 60;
  const CnnTrainResult r = train_cnn(train, train, c, unit_context(train), kBounds, 7);
  TrainedQuantifier untrained{c, build_cnn(c, {5, 5}, 7), unit_context(train), kBounds};
  CHECK(mean_error(r.quantifier, train) < 0.5 * mean_error(untrained, train));
  double best = INFINITY;
  for (const auto& e : r.curve) best = std::min(best, e.val_error);
  CHECK(mean_error(r.quantifier, train) == doctest::Approx(best).epsilon(1e-12));
  CHECK(r.curve[r.best_epoch - 1].val_error == best);
}

TEST_CASE("training is deterministic and the checkpoint reproduces predictions exactly") {
  const csi::CsiDatabase train = random_db(12, 4), val = random_db(5, 5);
  const CnnConfig c = small_config();
  const CnnTrainResult a = train_cnn(train, val, c, unit_context(train), kBounds, 11);
  const CnnTrainResult b = train_cnn(train, val, c, unit_context(train), kBounds, 11);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].train_loss == b.curve[i].train_loss);
    CHECK(a.curve[i].val_error == b.curve[i].val_error);
  }

  const auto dir = std::filesystem::temp_directory_path() / "csiloc_test_quantifier";
  std::filesystem::create_directories(dir);
  save_quantifier(dir / "cnn.nnck", a.quantifier);
  const TrainedQuantifier back = load_quantifier(dir / "cnn.nnck");
  CHECK(back.bounds == kBounds);
  CHECK(back.config.fc1_size() == 32);
  CHECK(back.context.per_rp_average == a.quantifier.context.per_rp_average);
  for (const auto& r : val.records) {
    CHECK(predict_cnn_only(back, r.image) == predict_cnn_only(a.quantifier, r.image));
    CHECK(extract_features(back, r.image) == extract_features(a.quantifier, r.image));
  }

  // Metadata that disagrees with the checkpoint is rejected.
  {
    std::ofstream meta(dir / "cnn.nnck.meta", std::ios::app);
    meta << "fc2=17\n";
  }
  CHECK_THROWS_AS(load_quantifier(dir / "cnn.nnck"), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("features have the FC2 width and are non-negative") {
  const CnnConfig c = small_config();
  const csi::CsiDatabase db = random_db(3, 6);
  TrainedQuantifier q{c, build_cnn(c, {5, 5}, 1), unit_context(db), kBounds};
  for (const auto& r : db.records) {
    const auto f = extract_features(q, r.image);
    CHECK(f.size() == 16);
    for (double v : f) CHECK(v >= 0.0);
  }
}

TEST_CASE("predictions are clamped to the site") {
  const CnnConfig c = small_config();
  const csi::CsiDatabase db = random_db(2, 7);
  TrainedQuantifier q{c, build_cnn(c, {50, -50}, 1), unit_context(db), kBounds};
  const Point2 p = predict_cnn_only(q, db.records[0].image);
  CHECK(p.x == 10.0);
  CHECK(p.y == 0.0);
}

TEST_CASE("mismatched device profiles are rejected") {
  const CnnConfig c = small_config();
  const csi::CsiDatabase db = random_db(2, 8);
  TrainedQuantifier q{c, build_cnn(c, {5, 5}, 1), unit_context(db), kBounds};
  const csi::CsiImage phone(csi::DeviceProfile::phone(), 0.5);
  CHECK_THROWS_AS(predict_cnn_only(q, phone), InputError);
  CHECK_THROWS_AS(extract_features(q, phone), InputError);
  CHECK_THROWS_AS(prepare_test_image(q, phone), InputError);
  csi::CsiDatabase other = db;
  other.profile = csi::DeviceProfile::phone();
  CHECK_THROWS_AS(train_cnn(other, db, c, unit_context(db), kBounds, 1), InputError);
  CHECK_THROWS_AS(train_cnn(db, db, c, unit_context(db), Box{}, 1), ConfigError);
}
