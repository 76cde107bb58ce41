#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "csiloc/config.hpp"
#include "csiloc/csi/database.hpp"
#include "csiloc/sim/channel.hpp"
#include "csiloc/sim/site.hpp"

namespace csiloc::sim {

struct SamplingPlan {
  double grid_spacing = 0.5;
  std::size_t test_point_count = 195;
  double speed_min = 0.6;
  double speed_max = 4.0;
  double update_interval = 1.0;
  // Snapshots per RP per simulated day. The earliest `train_per_day` go to training,
  // the latest `val_per_day` to validation, and the rest are held out for analysis.
  std::size_t snapshots_per_day = 10;
  std::size_t train_per_day = 4;
  std::size_t val_per_day = 2;
  std::size_t test_images_per_point = 1;
  std::vector<Mode> schedule{Mode::quiet, Mode::steady, Mode::busy};
  // Test routes keep this clearance from walls and obstacles.
  double route_margin = 0.3;
  std::array<FluctuationMode, 3> fluctuation{FluctuationMode::preset(Mode::quiet),
                                             FluctuationMode::preset(Mode::steady),
                                             FluctuationMode::preset(Mode::busy)};

  const FluctuationMode& fluctuation_for(Mode m) const { return fluctuation[static_cast<std::size_t>(m)]; }

  void validate() const;
  std::size_t w1() const { return snapshots_per_day * schedule.size(); }
};

/// Grid points offset by half a spacing from the walls, skipping obstacles.
/// Throws ConfigError when the grid would be empty.
std::vector<Point2> rp_grid(const SiteModel& site, double spacing);

/// Random-speed walk of plan.test_point_count points. Every point lies in the covered
/// region and more than 1e-3 m away from every RP; steps are at most speed_max * interval.
std::vector<Point2> test_route(const SiteModel& site, const SamplingPlan& plan, const std::vector<Point2>& rps,
                               Rng& rng);

struct DayTestSet {
  std::string label;  // "day1-quiet"
  Mode mode = Mode::quiet;
  csi::CsiDatabase database;
};

struct SynthOutput {
  std::vector<Point2> rps;
  std::vector<Point2> route;
  csi::CsiDatabase train;
  csi::CsiDatabase validation;
  csi::CsiDatabase holdout;
  std::vector<DayTestSet> tests;
};

/// Start time (seconds) of the survey for day d; snapshots spread over eight hours.
double day_start(std::size_t day);

/// Full synthetic campaign. A pure function of its arguments: each RP and test point
/// draws from its own seeded stream, so the thread count does not matter.
SynthOutput build_database(const SiteModel& site, const SamplingPlan& plan, const csi::DeviceProfile& profile,
                           std::uint64_t seed);

/// Everything needed to rebuild a campaign from a key=value file.
struct SynthConfig {
  SiteConfig site;
  SamplingPlan plan;
  csi::DeviceProfile profile = csi::DeviceProfile::nic();
  std::uint64_t seed = 1;

  static SynthConfig from_config(const KeyValueConfig& cfg);
  static const std::set<std::string>& known_keys();
};

}  // namespace csiloc::sim
