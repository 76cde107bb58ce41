#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "csiloc/csi/database.hpp"
#include "csiloc/error.hpp"
#include "csiloc/sim/channel.hpp"
#include "csiloc/sim/sampling.hpp"

using namespace csiloc;
using namespace csiloc::sim;

namespace {

// No walls, scatterers, clutter or receiver shaping: only the line-of-sight path.
SiteModel bare_site() {
  SiteModel site;
  site.envelope_rolloff = 0.0;
  site.envelope_tilt = 0.0;
  site.antenna_gain = {1.0};
  return site;
}

std::string database_bytes(const csi::CsiDatabase& db) {
  std::ostringstream out;
  csi::write_database(out, db);
  return out.str();
}

SamplingPlan small_plan() {
  SamplingPlan plan;
  plan.grid_spacing = 2.0;
  plan.snapshots_per_day = 3;
  plan.train_per_day = 1;
  plan.val_per_day = 1;
  plan.test_point_count = 20;
  return plan;
}

}  // namespace

TEST_CASE("line of sight alone gives a flat amplitude response") {
  const SiteModel site = bare_site();
  const auto amp = channel_response(site, {10.0, 4.0}, 30, 3);
  REQUIRE(amp.size() == 90);
  for (double a : amp) CHECK(a == doctest::Approx(amp[0]).epsilon(1e-12));
  const double d = distance(site.ap, {10.0, 4.0});
  CHECK(amp[0] == doctest::Approx(site.tx_gain / std::hypot(d, 1.5)).epsilon(1e-12));
}

TEST_CASE("two equal paths interfere with nulls every 1/tau") {
  SiteModel site = bare_site();
  site.coherence_hz = 0.25e6;  // subcarrier w sits at 0.5 MHz * (w - 19) with 40 subcarriers
  const double c = 299792458.0;
  const double tau = 0.5e-6;
  const double theta = M_PI / 2;  // broadside, so every antenna sees the same phase
  const std::vector<Path> paths{{1.0, 30.0, theta}, {1.0, 30.0 + c * tau, theta}};
  const auto h = complex_response(site, paths, 40, 1);
  const auto offsets = site.subcarrier_offsets(40);
  std::vector<std::size_t> nulls;
  for (std::size_t w = 0; w < 40; ++w) {
    const double f = site.coherence_hz + offsets[w];
    CHECK(std::abs(h[w]) == doctest::Approx(2.0 * std::abs(std::cos(M_PI * f * tau))).epsilon(1e-9));
    if (std::abs(h[w]) < 1e-9) nulls.push_back(w);
  }
  REQUIRE(nulls.size() >= 2);
  for (std::size_t i = 1; i < nulls.size(); ++i) {
    const double spacing = offsets[nulls[i]] - offsets[nulls[i - 1]];
    CHECK(spacing == doctest::Approx(1.0 / tau).epsilon(1e-9));
  }
}

TEST_CASE("channel response is deterministic and rejects outside locations") {
  const SiteModel site = make_site(SiteConfig{}, 5);
  CHECK(channel_response(site, {4.0, 3.0}, 30, 3) == channel_response(site, {4.0, 3.0}, 30, 3));
  CHECK(channel_response(make_site(SiteConfig{}, 5), {4.0, 3.0}, 30, 3) == channel_response(site, {4.0, 3.0}, 30, 3));
  CHECK_THROWS_AS(channel_response(site, {-0.1, 3.0}, 30, 3), InputError);
  CHECK_THROWS_AS(channel_response(site, {4.0, 16.5}, 30, 3), InputError);
  for (double a : channel_response(site, {20.5, 15.5}, 30, 3)) CHECK(std::isfinite(a));
}

TEST_CASE("subcarriers are evenly spaced across the bandwidth") {
  const SiteModel site;
  const auto off = site.subcarrier_offsets(30);
  for (std::size_t w = 1; w < off.size(); ++w) CHECK(off[w] - off[w - 1] == doctest::Approx(20e6 / 30));
  CHECK(std::abs(off.front() + off.back()) < 1e-6);
}

TEST_CASE("site validation") {
  SiteConfig cfg;
  cfg.ap = {30.0, 2.0};
  CHECK_THROWS_AS(make_site(cfg, 1), ConfigError);
  cfg.ap = {10.0, 7.0};  // inside the core
  CHECK_THROWS_AS(make_site(cfg, 1), ConfigError);
  const auto site = make_site(SiteConfig{}, 3);
  CHECK(site.scatterers.size() == SiteConfig{}.scatterer_count);
  for (const auto& s : site.scatterers) CHECK(site.covered(s.position));
}

TEST_CASE("noiseless snapshots repeat one row") {
  const SiteModel site = make_site(SiteConfig{}, 2);
  Rng rng(9);
  const auto profile = csi::DeviceProfile::nic();
  const auto img = emit_snapshot(site, {5.0, 5.0}, FluctuationMode::noiseless(), profile, 0.0, rng);
  const std::size_t row = std::size_t{profile.subcarriers} * profile.antennae;
  for (std::size_t s = 1; s < profile.scans; ++s)
    for (std::size_t i = 0; i < row; ++i) CHECK(img.amplitudes[s * row + i] == img.amplitudes[i]);
  const auto clean = channel_response(site, {5.0, 5.0}, profile.subcarriers, profile.antennae);
  for (std::size_t i = 0; i < row; ++i)
    CHECK(img.amplitudes[i] == doctest::Approx(clean[i]).epsilon(1e-6));  // f32 storage
}

TEST_CASE("snapshots vary with the seed and stay valid") {
  const SiteModel site = make_site(SiteConfig{}, 2);
  const auto mode = FluctuationMode::preset(Mode::busy);
  Rng a(1), b(1), c(2);
  const auto ia = emit_snapshot(site, {5.0, 5.0}, mode, csi::DeviceProfile::phone(), 10.0, a);
  const auto ib = emit_snapshot(site, {5.0, 5.0}, mode, csi::DeviceProfile::phone(), 10.0, b);
  const auto ic = emit_snapshot(site, {5.0, 5.0}, mode, csi::DeviceProfile::phone(), 10.0, c);
  CHECK(ia.amplitudes == ib.amplitudes);
  CHECK(ia.amplitudes != ic.amplitudes);
  CHECK_NOTHROW(ia.validate());
}

TEST_CASE("reference point grid density") {
  const SiteModel site = make_site(SiteConfig{}, 1);
  const auto fine = rp_grid(site, 0.5);
  CHECK(std::abs(static_cast<double>(fine.size()) - 1185.0) <= 118.5);
  const auto coarse = rp_grid(site, 1.0);
  CHECK(coarse.size() == 296);
  for (const auto& p : coarse) CHECK(site.covered(p));
  CHECK_THROWS_AS(rp_grid(site, 40.0), ConfigError);
  CHECK_THROWS_AS(rp_grid(site, 0.0), ConfigError);
}

TEST_CASE("test routes are off grid, covered and speed bounded") {
  const SiteModel site = make_site(SiteConfig{}, 4);
  SamplingPlan plan;
  plan.grid_spacing = 0.5;
  const auto rps = rp_grid(site, plan.grid_spacing);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    const auto route = test_route(site, plan, rps, rng);
    REQUIRE(route.size() == 195);
    for (std::size_t i = 0; i < route.size(); ++i) {
      CHECK(site.covered(route[i], plan.route_margin));
      double nearest = 1e9;
      for (const auto& r : rps) nearest = std::min(nearest, distance(route[i], r));
      CHECK(nearest > 0.0);
      if (i > 0) {
        const double step = distance(route[i], route[i - 1]);
        CHECK(step <= plan.speed_max * plan.update_interval + 1e-12);
        CHECK(step >= plan.speed_min * plan.update_interval - 1e-12);
      }
    }
  }
}

TEST_CASE("campaign is a pure function of the seed") {
  const SiteModel site = make_site(SiteConfig{}, 6);
  const SamplingPlan plan = small_plan();
  const auto profile = csi::DeviceProfile::phone();

  setenv("CSILOC_THREADS", "1", 1);
  const auto a = build_database(site, plan, profile, 77);
  setenv("CSILOC_THREADS", "3", 1);
  const auto b = build_database(site, plan, profile, 77);
  unsetenv("CSILOC_THREADS");
  const auto c = build_database(site, plan, profile, 78);

  CHECK(database_bytes(a.train) == database_bytes(b.train));
  CHECK(database_bytes(a.validation) == database_bytes(b.validation));
  CHECK(database_bytes(a.holdout) == database_bytes(b.holdout));
  REQUIRE(a.tests.size() == 3);
  for (std::size_t d = 0; d < 3; ++d) CHECK(database_bytes(a.tests[d].database) == database_bytes(b.tests[d].database));
  CHECK(database_bytes(a.train) != database_bytes(c.train));

  const std::size_t rps = a.rps.size();
  CHECK(a.train.records.size() == rps * 3);
  CHECK(a.validation.records.size() == rps * 3);
  CHECK(a.holdout.records.size() == rps * 3);
  CHECK(a.train.rp_count() == rps);
  CHECK(a.tests[0].label == "day1-quiet");
  CHECK(a.tests[2].label == "day3-busy");

  // Training snapshots precede validation snapshots of the same RP and day.
  for (const auto& v : a.validation.records)
    for (const auto& t : a.train.records)
      if (t.rp_index == v.rp_index && std::floor(t.snapshot_time / 86400) == std::floor(v.snapshot_time / 86400))
        CHECK(t.snapshot_time < v.snapshot_time);
  for (const auto& r : a.tests[1].database.records) CHECK(r.rp_index == -1);
}

TEST_CASE("synthesis config parsing") {
  const auto cfg = SynthConfig::from_config(KeyValueConfig::parse(
      "area_w=12\narea_h=9\nap_x=2\nap_y=2\nprofile=phone\ngrid=1.0\nw1=12\nw2=2\nmode=quiet,busy\nseed=5\n"
      "core=false\nbusy.noise_sigma=0.2\n"));
  CHECK(cfg.site.width == 12.0);
  CHECK(cfg.profile == csi::DeviceProfile::phone());
  CHECK(cfg.plan.schedule.size() == 2);
  CHECK(cfg.plan.snapshots_per_day == 6);
  CHECK(cfg.plan.test_images_per_point == 2);
  CHECK(cfg.plan.fluctuation_for(Mode::busy).noise_sigma == 0.2);
  CHECK(cfg.seed == 5);
  CHECK_THROWS_AS(SynthConfig::from_config(KeyValueConfig::parse("w1=10\n")), ConfigError);  // 3 days
  CHECK_THROWS_AS(SynthConfig::from_config(KeyValueConfig::parse("colour=blue\n")), ConfigError);
  CHECK_THROWS_AS(SynthConfig::from_config(KeyValueConfig::parse("mode=rainy\n")), ConfigError);
  CHECK_THROWS_AS(SynthConfig::from_config(KeyValueConfig::parse("grid=abc\n")), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse("just words\n"), ConfigError);
}

TEST_CASE("receiver ripple is a fixed, seeded, location independent gain") {
  SiteConfig cfg;
  cfg.ripple_depth = 0.5;
  const auto a = make_site(cfg, 21), b = make_site(cfg, 21), c = make_site(cfg, 22);
  const auto ga = a.receiver_gain(30, 3), gb = b.receiver_gain(30, 3), gc = c.receiver_gain(30, 3);
  CHECK(ga == gb);
  CHECK(ga != gc);
  for (double g : ga) CHECK(g > 0.0);

  // The ripple multiplies every path equally, so the ratio of two locations'
  // noiseless responses does not depend on it.
  SiteConfig flat = cfg;
  flat.ripple_depth = 0.0;
  const auto plain = make_site(flat, 21);
  CHECK(plain.ripple.frequency.empty());
  const Point2 p{4.0, 3.0};
  const auto with = channel_response(a, p, 30, 3), without = channel_response(plain, p, 30, 3);
  const auto g_with = a.receiver_gain(30, 3), g_without = plain.receiver_gain(30, 3);
  for (std::size_t i = 0; i < with.size(); ++i)
    CHECK(with[i] / g_with[i] == doctest::Approx(without[i] / g_without[i]).epsilon(1e-9));

  // Averaged over many seeds the log-gain has the configured spread.
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto site = make_site(cfg, seed);
    for (double u : {-0.8, -0.3, 0.2, 0.7}) {
      const double v = site.ripple.log_gain(u, seed % 3);
      sum += v;
      sq += v * v;
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  CHECK(std::abs(mean) < 0.06);
  CHECK(std::sqrt(sq / static_cast<double>(n) - mean * mean) == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("antenna gains are configurable and scale whole antenna rows") {
  const auto cfg = SynthConfig::from_config(KeyValueConfig::parse("antenna_gains=1,0.5,0.25\n"));
  REQUIRE(cfg.site.antenna_gain.size() == 3);
  CHECK(cfg.site.antenna_gain[2] == 0.25);
  CHECK_THROWS_AS(SynthConfig::from_config(KeyValueConfig::parse("antenna_gains=1,x\n")), ConfigError);
  CHECK_THROWS_AS(SynthConfig::from_config(KeyValueConfig::parse("antenna_gains=1,-2\n")), ConfigError);

  SiteConfig even = cfg.site;
  even.antenna_gain = {1.0, 1.0, 1.0};
  const auto skewed = make_site(cfg.site, 3), level = make_site(even, 3);
  const auto hs = channel_response(skewed, {5.0, 4.0}, 30, 3);
  const auto hl = channel_response(level, {5.0, 4.0}, 30, 3);
  for (std::size_t w = 0; w < 30; ++w)
    for (std::size_t c = 0; c < 3; ++c)
      CHECK(hs[w * 3 + c] == doctest::Approx(hl[w * 3 + c] * cfg.site.antenna_gain[c]).epsilon(1e-9));
}
