#pragma once

#include <cstdint>
#include <vector>

#include "csiloc/csi/image.hpp"
#include "csiloc/sim/channel.hpp"
#include "csiloc/sim/site.hpp"

namespace csiloc::sim {

/// Mean Pearson correlation between distinct snapshots taken at the same location,
/// averaged over `locations`. Snapshots are spread over `span_seconds`.
double same_location_correlation(const SiteModel& site, const FluctuationMode& mode,
                                 const csi::DeviceProfile& profile, const std::vector<Point2>& locations,
                                 std::size_t snapshots, double span_seconds, std::uint64_t seed);

struct DistanceBin {
  double lo = 0.0;
  double hi = 0.0;
  double mean_correlation = 0.0;
  std::size_t pairs = 0;
};

/// Correlation of single snapshots at two random covered locations, binned by their
/// separation. Each bin draws `pairs_per_bin` pairs with a separation inside the bin.
std::vector<DistanceBin> spatial_correlation_profile(const SiteModel& site, const FluctuationMode& mode,
                                                     const csi::DeviceProfile& profile, double bin_width,
                                                     double max_distance, std::size_t pairs_per_bin,
                                                     std::uint64_t seed);

}  // namespace csiloc::sim
