#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "csiloc/csi/database.hpp"
#include "csiloc/csi/preprocess.hpp"
#include "csiloc/error.hpp"

using namespace csiloc;
using namespace csiloc::csi;

namespace {

CsiImage column_image(const std::vector<double>& column) {
  CsiImage img(DeviceProfile{static_cast<std::uint16_t>(column.size()), 1, 1});
  img.amplitudes = column;
  return img;
}

CsiImage row_image(const std::vector<double>& row) {
  CsiImage img(DeviceProfile{1, static_cast<std::uint16_t>(row.size()), 1});
  img.amplitudes = row;
  return img;
}

CsiImage random_image(DeviceProfile p, std::mt19937_64& rng, double lo = 0.5, double hi = 5.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  CsiImage img(p);
  for (auto& a : img.amplitudes) a = d(rng);
  return img;
}

// Sliding-window median by full sort with edge replication.
std::vector<double> median_oracle(const std::vector<double>& col, std::size_t window) {
  const long n = static_cast<long>(col.size()), half = static_cast<long>(window / 2);
  std::vector<double> out(col.size());
  for (long i = 0; i < n; ++i) {
    std::vector<double> win;
    for (long k = i - half; k <= i + half; ++k) win.push_back(col[static_cast<std::size_t>(std::clamp(k, 0L, n - 1))]);
    std::sort(win.begin(), win.end());
    out[static_cast<std::size_t>(i)] = win[win.size() / 2];
  }
  return out;
}

NormalizationContext context_with(double a_max) {
  NormalizationContext ctx;
  ctx.per_rp_average = {{0, a_max}, {1, a_max / 2}};
  ctx.a_max = a_max;
  return ctx;
}

double column_variance(const CsiImage& img, std::size_t w, std::size_t c) {
  const std::size_t H = img.profile.scans;
  double mean = 0.0, var = 0.0;
  for (std::size_t h = 0; h < H; ++h) mean += img.at(h, w, c);
  mean /= static_cast<double>(H);
  for (std::size_t h = 0; h < H; ++h) var += (img.at(h, w, c) - mean) * (img.at(h, w, c) - mean);
  return var / static_cast<double>(H);
}

}  // namespace

TEST_CASE("median filter") {
  SUBCASE("window 1 is the identity") {
    const auto img = column_image({3, 1, 4, 1, 5});
    CHECK(median_filter_columns(img, 1).amplitudes == img.amplitudes);
  }
  SUBCASE("single impulse is removed") {
    CHECK(median_filter_columns(column_image({5, 100, 5, 5}), 3).amplitudes == std::vector<double>{5, 5, 5, 5});
  }
  SUBCASE("constant column is unchanged") {
    const auto img = column_image(std::vector<double>(7, 2.5));
    CHECK(median_filter_columns(img, 5).amplitudes == img.amplitudes);
  }
  SUBCASE("matches the sort-based oracle on random columns") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t n = 3 + static_cast<std::size_t>(trial % 11);
      const std::size_t window = 1 + 2 * static_cast<std::size_t>(trial % 3);
      if (window > n) continue;
      std::vector<double> col(n);
      std::uniform_real_distribution<double> d(0, 10);
      for (auto& v : col) v = d(rng);
      CHECK(median_filter_columns(column_image(col), window).amplitudes == median_oracle(col, window));
    }
  }
  SUBCASE("columns are filtered independently per antenna") {
    CsiImage img(DeviceProfile{3, 1, 2});
    img.amplitudes = {1, 10, 50, 10, 1, 10};  // antenna 0: 1,50,1 ; antenna 1: 10,10,10
    const auto out = median_filter_columns(img, 3);
    CHECK(out.amplitudes == std::vector<double>{1, 10, 1, 10, 1, 10});
  }
  SUBCASE("idempotent for window 3 on monotone columns") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> col(12);
      std::uniform_real_distribution<double> d(0, 3);
      for (auto& v : col) v = d(rng);
      std::sort(col.begin(), col.end());
      if (trial % 2) std::reverse(col.begin(), col.end());
      const auto once = median_filter_columns(column_image(col), 3);
      CHECK(median_filter_columns(once, 3).amplitudes == once.amplitudes);
    }
  }
  SUBCASE("invalid windows are configuration errors") {
    const auto img = column_image({1, 2, 3});
    CHECK_THROWS_AS(median_filter_columns(img, 2), ConfigError);
    CHECK_THROWS_AS(median_filter_columns(img, 5), ConfigError);
    CHECK_THROWS_AS(median_filter_columns(img, 0), ConfigError);
  }
}

TEST_CASE("average amplitude") {
  CsiImage img(DeviceProfile{2, 2, 1});
  img.amplitudes = {1, 2, 3, 4};
  CHECK(average_amplitude(img) == 2.5);
  CHECK(average_amplitude(CsiImage(DeviceProfile{3, 4, 2})) == 0.0);
  CHECK(average_amplitude(CsiImage(DeviceProfile{3, 4, 2}, 1.75)) == 1.75);
}

TEST_CASE("min-max row normalisation") {
  CHECK(minmax_normalize_rows(row_image({2, 4, 6})).amplitudes == std::vector<double>{0, 0.5, 1});
  CHECK(minmax_normalize_rows(row_image({0, 0.25, 1})).amplitudes == std::vector<double>{0, 0.25, 1});
  CHECK(minmax_normalize_rows(row_image({7, 7, 7})).amplitudes == std::vector<double>{0.5, 0.5, 0.5});

  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 25; ++trial) {
    const auto img = random_image(DeviceProfile{4, 9, 2}, rng);
    const auto norm = minmax_normalize_rows(img);
    for (double v : norm.amplitudes) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    // a*row + b with a > 0 normalises to the same row.
    std::uniform_real_distribution<double> a_dist(0.1, 20.0), b_dist(-5.0, 5.0);
    const double a = a_dist(rng), b = b_dist(rng);
    CsiImage affine = img;
    for (auto& v : affine.amplitudes) v = a * v + b + 10.0;
    const auto norm2 = minmax_normalize_rows(affine);
    for (std::size_t i = 0; i < norm.amplitudes.size(); ++i)
      CHECK(norm2.amplitudes[i] == doctest::Approx(norm.amplitudes[i]).epsilon(1e-9));
  }
}

TEST_CASE("power rescale") {
  const auto ctx = context_with(4.0);
  const auto row = row_image({0, 0.5, 1});
  CHECK(power_rescale(row, 4.0, ctx).amplitudes == row.amplitudes);
  CHECK(power_rescale(row, 2.0, ctx).amplitudes == std::vector<double>{0, 0.25, 0.5});
  CHECK(power_rescale(row_image({0, 0, 0}), 3.0, ctx).amplitudes == std::vector<double>{0, 0, 0});
  // Brighter-than-max test images are capped at the identity.
  CHECK(power_rescale(row, 8.0, ctx).amplitudes == row.amplitudes);

  NormalizationContext bad;
  CHECK_THROWS_AS(power_rescale(row, 1.0, bad), DataError);

  std::mt19937_64 rng(24);
  const auto img = random_image(DeviceProfile{1, 6, 1}, rng, 0.5, 1.0);
  const auto scaled = power_rescale(img, 1.3, ctx);
  for (std::size_t i = 1; i < 6; ++i)
    CHECK(scaled.amplitudes[i] / scaled.amplitudes[0] == doctest::Approx(img.amplitudes[i] / img.amplitudes[0]));
}

TEST_CASE("composite preprocessing") {
  const DeviceProfile p{6, 5, 2};
  NormalizationContext ctx;
  ctx.per_rp_average = {{0, 3.0}};
  ctx.a_max = 3.0;

  SUBCASE("constant image at the strongest RP becomes constant 0.5 and is a fixed point") {
    const CsiImage img(p, 3.0);
    const auto once = preprocess(img, ctx, 3, 0);
    for (double v : once.amplitudes) CHECK(v == 0.5);
    const auto twice = preprocess(once, ctx, 3, 0);
    CHECK(twice.amplitudes == once.amplitudes);
  }
  SUBCASE("outputs stay in [0,1] and the median filter smooths columns") {
    std::mt19937_64 rng(25);
    std::normal_distribution<double> noise(0.0, 0.3);
    const DeviceProfile nic = DeviceProfile::nic();
    NormalizationContext c2;
    c2.per_rp_average = {{0, 1.0}};
    c2.a_max = 1.0;
    for (int trial = 0; trial < 5; ++trial) {
      CsiImage img(nic);
      for (std::size_t h = 0; h < nic.scans; ++h)
        for (std::size_t w = 0; w < nic.subcarriers; ++w)
          for (std::size_t c = 0; c < nic.antennae; ++c)
            img.at(h, w, c) = std::max(0.0, 0.5 + 0.4 * std::sin(0.3 * static_cast<double>(w + c)) + noise(rng));
      const auto out = preprocess(img, c2, 3);
      double in_var = 0.0, out_var = 0.0;
      for (std::size_t w = 0; w < nic.subcarriers; ++w)
        for (std::size_t c = 0; c < nic.antennae; ++c) {
          in_var += column_variance(img, w, c);
          out_var += column_variance(out, w, c);
        }
      CHECK(out_var < in_var);
      for (double v : out.amplitudes) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
}

TEST_CASE("normalization context build and text round trip") {
  CsiDatabase db;
  db.profile = DeviceProfile{3, 4, 1};
  for (int rp = 0; rp < 3; ++rp)
    for (int k = 0; k < 2; ++k) {
      FingerprintRecord r;
      r.image = CsiImage(db.profile, 1.0 + rp + 0.5 * k);
      r.rp_index = rp;
      r.snapshot_time = k;
      db.records.push_back(r);
    }
  const auto ctx = build_normalization_context(db, 3, "unit");
  CHECK(ctx.per_rp_average.at(0) == 1.25);
  CHECK(ctx.per_rp_average.at(2) == 3.25);
  CHECK(ctx.a_max == 3.25);

  const auto path = std::filesystem::temp_directory_path() / "csiloc_ctx_test.txt";
  write_context(path, ctx);
  const auto back = read_context(path);
  CHECK(back.per_rp_average == ctx.per_rp_average);
  CHECK(back.a_max == ctx.a_max);
  CHECK(back.source == "unit");

  std::ofstream(path) << "format=csiloc-normalization-context\nversion=1\na_max=2\nrp_count=1\nrp.0=1.5\n";
  CHECK_THROWS_AS(read_context(path), DataError);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(build_normalization_context(CsiDatabase{db.profile, {}}, 3, "empty"), InputError);
}

TEST_CASE("CSID database") {
  std::mt19937_64 rng(26);
  CsiDatabase db;
  db.profile = DeviceProfile::phone();
  for (int i = 0; i < 5; ++i) {
    FingerprintRecord r;
    r.image = random_image(db.profile, rng);
    for (auto& a : r.image.amplitudes) a = static_cast<float>(a);
    r.location = {0.5 * i, 1.25};
    r.snapshot_time = 100.0 - i;
    r.rp_index = i < 4 ? i % 2 : -1;
    db.records.push_back(r);
  }
  std::ostringstream out;
  write_database(out, db);
  const std::string bytes = out.str();
  CHECK(bytes.substr(0, 4) == "CSID");

  std::istringstream in(bytes);
  const auto back = read_database(in, "memory");
  CHECK(back.profile == db.profile);
  REQUIRE(back.records.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(back.records[i].image.amplitudes == db.records[i].image.amplitudes);
    CHECK(back.records[i].location == db.records[i].location);
    CHECK(back.records[i].rp_index == db.records[i].rp_index);
  }
  // Later records of an RP have earlier times here, so snapshot ranks invert.
  CHECK(back.records[2].snapshot_index == 0);
  CHECK(back.records[0].snapshot_index == 1);
  CHECK(back.rp_count() == 2);

  std::ostringstream again;
  write_database(again, back);
  CHECK(again.str() == bytes);

  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_database(truncated, "t"), DataError);
  std::string bad = bytes;
  bad[1] = 'X';
  std::istringstream bad_in(bad);
  CHECK_THROWS_AS(read_database(bad_in, "b"), DataError);
}
