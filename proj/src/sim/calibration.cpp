#include "csiloc/sim/calibration.hpp"

#include <cmath>

#include "csiloc/error.hpp"
#include "csiloc/eval/metrics.hpp"
#include "csiloc/parallel.hpp"

namespace csiloc::sim {

double same_location_correlation(const SiteModel& site, const FluctuationMode& mode,
                                 const csi::DeviceProfile& profile, const std::vector<Point2>& locations,
                                 std::size_t snapshots, double span_seconds, std::uint64_t seed) {
  if (snapshots < 2) throw ConfigError("need at least two snapshots per location");
  if (locations.empty()) throw InputError("no locations to calibrate on");
  std::vector<double> per_location(locations.size());
  parallel_for(locations.size(), [&](std::size_t i) {
    std::vector<std::vector<double>> images;
    for (std::size_t k = 0; k < snapshots; ++k) {
      Rng rng = make_rng(seed, {0xca1, i, k});
      const double t = span_seconds * static_cast<double>(k) / static_cast<double>(snapshots - 1);
      images.push_back(emit_snapshot(site, locations[i], mode, profile, t, rng).amplitudes);
    }
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t j = 0; j < snapshots; ++j)
      for (std::size_t k = j + 1; k < snapshots; ++k, ++pairs) sum += eval::pearson(images[j], images[k]);
    per_location[i] = sum / static_cast<double>(pairs);
  });
  double total = 0.0;
  for (double v : per_location) total += v;
  return total / static_cast<double>(locations.size());
}

std::vector<DistanceBin> spatial_correlation_profile(const SiteModel& site, const FluctuationMode& mode,
                                                     const csi::DeviceProfile& profile, double bin_width,
                                                     double max_distance, std::size_t pairs_per_bin,
                                                     std::uint64_t seed) {
  if (!(bin_width > 0.0) || max_distance < bin_width) throw ConfigError("invalid distance binning");
  const auto bins = static_cast<std::size_t>(std::round(max_distance / bin_width));
  std::vector<DistanceBin> out(bins);
  parallel_for(bins, [&](std::size_t b) {
    DistanceBin& bin = out[b];
    bin.lo = bin_width * static_cast<double>(b);
    bin.hi = bin.lo + bin_width;
    Rng rng = make_rng(seed, {0xb1, b});
    std::uniform_real_distribution<double> ux(0.0, site.width), uy(0.0, site.depth), ur(bin.lo, bin.hi),
        ua(-M_PI, M_PI);
    double sum = 0.0;
    while (bin.pairs < pairs_per_bin) {
      const Point2 a{ux(rng), uy(rng)};
      const double r = std::max(ur(rng), 1e-3), ang = ua(rng);
      const Point2 c{a.x + r * std::cos(ang), a.y + r * std::sin(ang)};
      if (!site.covered(a) || !site.covered(c)) continue;
      const double t = std::uniform_real_distribution<double>(0.0, 86400.0)(rng);
      const auto ia = emit_snapshot(site, a, mode, profile, t, rng);
      const auto ic = emit_snapshot(site, c, mode, profile, t, rng);
      sum += eval::pearson(ia.amplitudes, ic.amplitudes);
      ++bin.pairs;
    }
    bin.mean_correlation = sum / static_cast<double>(bin.pairs);
  });
  return out;
}

}  // namespace csiloc::sim
