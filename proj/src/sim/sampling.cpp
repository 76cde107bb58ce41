#include "csiloc/sim/sampling.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "csiloc/error.hpp"
#include "csiloc/parallel.hpp"

namespace csiloc::sim {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kOffGridClearance = 1e-3;
constexpr double kSurveyHours = 8.0;

// Stream tags keep RP snapshots, the route and test images statistically independent.
constexpr std::uint64_t kTagSurvey = 0x5e7;
constexpr std::uint64_t kTagRoute = 0x7a7;
constexpr std::uint64_t kTagTest = 0x7e57;

double nearest_rp_distance(Point2 p, const std::vector<Point2>& rps) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : rps) best = std::min(best, distance(p, r));
  return best;
}

}  // namespace

void SamplingPlan::validate() const {
  if (!(grid_spacing > 0.0)) throw ConfigError("grid spacing must be positive");
  if (test_point_count == 0) throw ConfigError("test route needs at least one point");
  if (!(speed_min > 0.0) || speed_max < speed_min) throw ConfigError("speed range must satisfy 0 < min <= max");
  if (!(update_interval > 0.0)) throw ConfigError("update interval must be positive");
  if (schedule.empty()) throw ConfigError("mode schedule is empty");
  if (snapshots_per_day == 0) throw ConfigError("need at least one snapshot per RP per day");
  if (train_per_day == 0) throw ConfigError("need at least one training snapshot per RP per day");
  if (train_per_day + val_per_day > snapshots_per_day)
    throw ConfigError("train_per_day + val_per_day exceeds the snapshots taken per day");
  if (test_images_per_point == 0) throw ConfigError("w2 must be at least 1");
}

std::vector<Point2> rp_grid(const SiteModel& site, double spacing) {
  if (!(spacing > 0.0)) throw ConfigError("grid spacing must be positive");
  std::vector<Point2> out;
  const auto nx = static_cast<std::size_t>(std::floor(site.width / spacing + 1e-9));
  const auto ny = static_cast<std::size_t>(std::floor(site.depth / spacing + 1e-9));
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const Point2 p{spacing * (static_cast<double>(i) + 0.5), spacing * (static_cast<double>(j) + 0.5)};
      if (site.covered(p)) out.push_back(p);
    }
  if (out.empty()) throw ConfigError("sampling plan yields zero reference points");
  return out;
}

std::vector<Point2> test_route(const SiteModel& site, const SamplingPlan& plan, const std::vector<Point2>& rps,
                               Rng& rng) {
  plan.validate();
  std::uniform_real_distribution<double> ux(0.0, site.width), uy(0.0, site.depth), uangle(-kPi, kPi),
      uspeed(plan.speed_min, plan.speed_max);
  std::normal_distribution<double> turn(0.0, 0.5);
  auto acceptable = [&](Point2 p) {
    return site.covered(p, plan.route_margin) && nearest_rp_distance(p, rps) > kOffGridClearance;
  };

  std::vector<Point2> route;
  Point2 p;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 100000) throw ConfigError("no admissible start point for the test route");
    p = {ux(rng), uy(rng)};
    if (acceptable(p)) break;
  }
  route.push_back(p);
  double heading = uangle(rng);
  while (route.size() < plan.test_point_count) {
    bool placed = false;
    for (int attempt = 0; attempt < 400 && !placed; ++attempt) {
      // Smooth turns first; after repeated rejections (a wall ahead) pick any direction.
      const double h = attempt < 20 ? heading + turn(rng) : uangle(rng);
      const double step = uspeed(rng) * plan.update_interval;
      const Point2 q{p.x + step * std::cos(h), p.y + step * std::sin(h)};
      if (!acceptable(q)) continue;
      heading = h;
      p = q;
      placed = true;
    }
    if (!placed) throw ConfigError("test route got stuck; the covered region is too small for the speed range");
    route.push_back(p);
  }
  return route;
}

double day_start(std::size_t day) { return static_cast<double>(day) * 86400.0 + 8.0 * 3600.0; }

SynthOutput build_database(const SiteModel& site, const SamplingPlan& plan, const csi::DeviceProfile& profile,
                           std::uint64_t seed) {
  site.validate();
  plan.validate();
  if (profile.element_count() == 0) throw ConfigError("device profile has no elements");

  SynthOutput out;
  out.rps = rp_grid(site, plan.grid_spacing);
  const std::size_t days = plan.schedule.size(), per_day = plan.snapshots_per_day;
  const double gap = kSurveyHours * 3600.0 / static_cast<double>(per_day);

  // One slot per (RP, day, snapshot) so parallel generation stays order independent.
  std::vector<csi::FingerprintRecord> survey(out.rps.size() * days * per_day);
  parallel_for(out.rps.size(), [&](std::size_t r) {
    for (std::size_t d = 0; d < days; ++d) {
      const FluctuationMode& mode = plan.fluctuation_for(plan.schedule[d]);
      for (std::size_t k = 0; k < per_day; ++k) {
        Rng rng = make_rng(seed, {kTagSurvey, r, d, k});
        auto& rec = survey[(r * days + d) * per_day + k];
        rec.snapshot_time = day_start(d) + gap * static_cast<double>(k);
        rec.image = emit_snapshot(site, out.rps[r], mode, profile, rec.snapshot_time, rng);
        rec.location = out.rps[r];
        rec.rp_index = static_cast<std::int32_t>(r);
      }
    }
  });

  out.train.profile = out.validation.profile = out.holdout.profile = profile;
  for (std::size_t i = 0; i < survey.size(); ++i) {
    const std::size_t k = i % per_day;
    if (k < plan.train_per_day) out.train.records.push_back(std::move(survey[i]));
    else if (k >= per_day - plan.val_per_day) out.validation.records.push_back(std::move(survey[i]));
    else out.holdout.records.push_back(std::move(survey[i]));
  }
  out.train.assign_snapshot_indices();
  out.validation.assign_snapshot_indices();
  out.holdout.assign_snapshot_indices();

  Rng route_rng = make_rng(seed, {kTagRoute});
  out.route = test_route(site, plan, out.rps, route_rng);

  const std::size_t w2 = plan.test_images_per_point;
  for (std::size_t d = 0; d < days; ++d) {
    DayTestSet set;
    set.mode = plan.schedule[d];
    set.label = "day" + std::to_string(d + 1) + "-" + mode_name(set.mode);
    set.database.profile = profile;
    set.database.records.resize(out.route.size() * w2);
    const FluctuationMode& mode = plan.fluctuation_for(set.mode);
    parallel_for(out.route.size(), [&](std::size_t i) {
      for (std::size_t j = 0; j < w2; ++j) {
        Rng rng = make_rng(seed, {kTagTest, d, i, j});
        auto& rec = set.database.records[i * w2 + j];
        // The walk happens after the survey hours of the same day.
        rec.snapshot_time = day_start(d) + (kSurveyHours + 1.0) * 3600.0 +
                            plan.update_interval * static_cast<double>(i) + 0.1 * static_cast<double>(j);
        rec.image = emit_snapshot(site, out.route[i], mode, profile, rec.snapshot_time, rng);
        rec.location = out.route[i];
        rec.rp_index = -1;
        rec.snapshot_index = static_cast<std::uint32_t>(i);
      }
    });
    out.tests.push_back(std::move(set));
  }
  return out;
}

const std::set<std::string>& SynthConfig::known_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k{"area_w", "area_h", "ap_x", "ap_y", "profile", "grid", "w1", "w2", "mode", "seed",
                            "train_per_day", "val_per_day", "test_points", "speed_min", "speed_max", "dt",
                            "route_margin", "coherence_hz", "scatterers", "core", "core_x0", "core_y0",
                            "core_x1", "core_y1", "wall_reflection", "clutter_features", "clutter_length",
                            "clutter_frequency_length", "clutter_depth", "ripple_terms", "ripple_depth", "antenna_gains"};
    for (const char* m : {"quiet", "steady", "busy"})
      for (const char* f : {"outlier_row_probability", "fade_block_probability", "people_rate", "person_strength",
                            "noise_sigma", "row_jitter_sigma"})
        k.insert(std::string(m) + "." + f);
    return k;
  }();
  return keys;
}

SynthConfig SynthConfig::from_config(const KeyValueConfig& cfg) {
  cfg.require_known(known_keys());
  SynthConfig out;
  auto& s = out.site;
  s.width = cfg.get_double("area_w", s.width);
  s.depth = cfg.get_double("area_h", s.depth);
  s.ap = {cfg.get_double("ap_x", s.ap.x), cfg.get_double("ap_y", s.ap.y)};
  s.coherence_hz = cfg.get_double("coherence_hz", s.coherence_hz);
  s.scatterer_count = cfg.get_uint("scatterers", s.scatterer_count);
  s.core_obstacle = cfg.get_bool("core", s.core_obstacle);
  s.core = {cfg.get_double("core_x0", s.core.x0), cfg.get_double("core_y0", s.core.y0),
            cfg.get_double("core_x1", s.core.x1), cfg.get_double("core_y1", s.core.y1)};
  s.wall_reflection = cfg.get_double("wall_reflection", s.wall_reflection);
  s.clutter_features = cfg.get_uint("clutter_features", s.clutter_features);
  s.clutter_length = cfg.get_double("clutter_length", s.clutter_length);
  s.clutter_frequency_length = cfg.get_double("clutter_frequency_length", s.clutter_frequency_length);
  s.clutter_depth = cfg.get_double("clutter_depth", s.clutter_depth);
  s.ripple_terms = cfg.get_uint("ripple_terms", s.ripple_terms);
  s.ripple_depth = cfg.get_double("ripple_depth", s.ripple_depth);
  if (s.ripple_depth < 0.0) throw ConfigError("ripple_depth must be non-negative");
  if (cfg.has("antenna_gains")) {
    s.antenna_gain.clear();
    std::istringstream list(cfg.get_string("antenna_gains", ""));
    std::string item;
    while (std::getline(list, item, ',')) {
      try {
        std::size_t used = 0;
        s.antenna_gain.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ConfigError("antenna_gains must be a comma-separated list of numbers, got '" + item + "'");
      }
    }
    if (s.antenna_gain.empty()) throw ConfigError("antenna_gains must not be empty");
    for (double g : s.antenna_gain)
      if (!(g > 0.0)) throw ConfigError("antenna_gains must be positive");
  }

  out.profile = csi::DeviceProfile::from_name(cfg.get_string("profile", "nic"));
  out.seed = cfg.get_uint("seed", out.seed);

  auto& p = out.plan;
  p.grid_spacing = cfg.get_double("grid", p.grid_spacing);
  if (cfg.has("mode")) {
    p.schedule.clear();
    std::istringstream list(cfg.get_string("mode", ""));
    std::string item;
    while (std::getline(list, item, ',')) p.schedule.push_back(mode_from_name(item));
  }
  const std::size_t w1 = cfg.get_uint("w1", p.w1());
  if (p.schedule.empty() || w1 % p.schedule.size() != 0)
    throw ConfigError("w1 (" + std::to_string(w1) + ") must be a multiple of the number of scheduled days");
  p.snapshots_per_day = w1 / p.schedule.size();
  p.train_per_day = cfg.get_uint("train_per_day", p.train_per_day);
  p.val_per_day = cfg.get_uint("val_per_day", p.val_per_day);
  p.test_images_per_point = cfg.get_uint("w2", p.test_images_per_point);
  p.test_point_count = cfg.get_uint("test_points", p.test_point_count);
  p.speed_min = cfg.get_double("speed_min", p.speed_min);
  p.speed_max = cfg.get_double("speed_max", p.speed_max);
  p.update_interval = cfg.get_double("dt", p.update_interval);
  p.route_margin = cfg.get_double("route_margin", p.route_margin);
  for (Mode m : {Mode::quiet, Mode::steady, Mode::busy}) {
    auto& f = p.fluctuation[static_cast<std::size_t>(m)];
    const std::string pre = mode_name(m) + ".";
    f.outlier_row_probability = cfg.get_double(pre + "outlier_row_probability", f.outlier_row_probability);
    f.fade_block_probability = cfg.get_double(pre + "fade_block_probability", f.fade_block_probability);
    f.people_rate = cfg.get_double(pre + "people_rate", f.people_rate);
    f.person_strength = cfg.get_double(pre + "person_strength", f.person_strength);
    f.noise_sigma = cfg.get_double(pre + "noise_sigma", f.noise_sigma);
    f.row_jitter_sigma = cfg.get_double(pre + "row_jitter_sigma", f.row_jitter_sigma);
  }
  p.validate();
  return out;
}

}  // namespace csiloc::sim
