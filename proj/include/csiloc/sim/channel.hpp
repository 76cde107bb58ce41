#pragma once

#include <complex>
#include <string>
#include <vector>

#include "csiloc/csi/image.hpp"
#include "csiloc/rng.hpp"
#include "csiloc/sim/site.hpp"

namespace csiloc::sim {

/// One propagation path from the access point to the receiver.
struct Path {
  double gain = 0.0;
  double length = 0.0;
  double arrival_angle = 0.0;  // direction the wave arrives from, radians from the +x axis
};

/// Line-of-sight path, first-order wall reflections, and one bounce off every static
/// and extra scatterer. Paths crossing an obstacle are attenuated, and `blockers`
/// (people) shadow any leg that passes close to them.
std::vector<Path> propagation_paths(const SiteModel& site, Point2 location, double time = 0.0,
                                    const std::vector<Scatterer>& extra = {},
                                    const std::vector<Point2>& blockers = {});

/// Complex response per (subcarrier, antenna), index w * antennae + c, including the
/// fixed receiver chain gains.
std::vector<std::complex<double>> complex_response(const SiteModel& site, const std::vector<Path>& paths,
                                                   std::size_t subcarriers, std::size_t antennae);

/// Noise-free amplitude response |H| per (subcarrier, antenna) at a location.
/// Throws InputError when the location lies outside the area.
std::vector<double> channel_response(const SiteModel& site, Point2 location, std::size_t subcarriers,
                                     std::size_t antennae);

enum class Mode { quiet, steady, busy };

std::string mode_name(Mode m);
/// Parses "quiet", "steady" or "busy"; throws ConfigError otherwise.
Mode mode_from_name(const std::string& name);

/// Temporal fluctuation knobs for one occupancy regime.
struct FluctuationMode {
  Mode mode = Mode::quiet;
  double target_self_correlation = 0.8;
  double outlier_row_probability = 0.0;
  double fade_block_probability = 0.0;
  double people_rate = 0.0;       // mean number of people present (Poisson)
  double person_strength = 0.0;   // scatterer strength of one person
  double noise_sigma = 0.0;       // per-element log-normal sigma
  double row_jitter_sigma = 0.0;  // per-scan gain log-normal sigma

  static FluctuationMode preset(Mode m);
  static FluctuationMode noiseless();
};

/// One CSI image at `location`: H scans of the channel with the fluctuations of `mode`.
/// People are placed at random (they move between snapshots but stay put within one).
csi::CsiImage emit_snapshot(const SiteModel& site, Point2 location, const FluctuationMode& mode,
                            const csi::DeviceProfile& profile, double time, Rng& rng);

}  // namespace csiloc::sim
