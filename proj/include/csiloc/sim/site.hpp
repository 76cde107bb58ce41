#pragma once

#include <cstdint>
#include <vector>

#include "csiloc/geometry.hpp"

namespace csiloc::sim {

/// Reflecting wall piece. `reflection` is the amplitude reflection coefficient.
struct Segment {
  Point2 a;
  Point2 b;
  double reflection = 0.5;
};

/// Axis-aligned rectangle, used for obstacles such as a building core.
struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  bool contains(Point2 p, double margin = 0.0) const {
    return p.x >= x0 - margin && p.x <= x1 + margin && p.y >= y0 - margin && p.y <= y1 + margin;
  }
};

/// Point scatterer (furniture, a person). Path gain scales as strength / (d_in * d_out).
struct Scatterer {
  Point2 position;
  double strength = 1.0;
  double drift_phase = 0.0;
};

/// Diffuse scattering from clutter too small to model as discrete paths: a smooth
/// log-normal gain over (position, subcarrier) built from random Fourier features,
/// so its spatial correlation follows exp(-d^2 / 2L^2) and never oscillates.
struct ClutterField {
  std::vector<double> kx, ky, kf, phase;
  double depth = 0.0;  // standard deviation of the log-amplitude

  /// Field value for a location and a normalised subcarrier offset in (-1, 1); unit variance.
  double value(Point2 p, double u) const;
};

/// Fixed log-gain ripple of the receiver chain across the band, one pattern per
/// antenna. Real NICs show several dB of such structure at every location, which is
/// why raw CSI images from different places still look alike.
struct ReceiverRipple {
  std::vector<double> frequency;  // radians per unit of normalised subcarrier offset
  std::vector<double> phase;      // frequency.size() entries per antenna, antenna-major
  std::size_t antennae = 0;
  double depth = 0.0;  // standard deviation of the log-gain

  double log_gain(double u, std::size_t antenna) const;
};

struct SiteModel {
  double width = 21.0;
  double depth = 16.0;
  Point2 ap{3.0, 12.5};
  std::vector<Segment> walls;
  std::vector<Rect> obstacles;
  std::vector<Scatterer> scatterers;
  ClutterField clutter;

  double carrier_hz = 5.18e9;
  double bandwidth_hz = 20e6;
  // Phase reference frequency for path delays. The true carrier would decorrelate
  // the amplitude pattern within centimetres; a lower effective frequency keeps the
  // fingerprint field coherent over metres, so correlation falls off smoothly with
  // distance instead of looking like independent draws beyond a few centimetres.
  double coherence_hz = 40e6;
  double tx_gain = 150.0;
  double obstacle_transmission = 0.35;
  // Relative amplitude change of static scatterers over a day (doors, chairs).
  double daily_drift = 0.15;
  // Receiver chain: band-edge roll-off, a slight tilt, and unequal antenna gains.
  // The imbalance is common to every location, so it raises raw image
  // correlation while per-antenna row normalisation removes it entirely.
  double envelope_rolloff = 0.35;
  double envelope_tilt = 0.05;
  std::vector<double> antenna_gain{1.0, 0.4, 0.65};
  ReceiverRipple ripple;

  /// Throws ConfigError if the geometry is unusable.
  void validate() const;
  bool inside(Point2 p) const { return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= depth; }
  /// Inside the area, at least `margin` from the outer walls and outside every obstacle grown by `margin`.
  bool covered(Point2 p, double margin = 0.0) const;
  /// Baseband offsets of W subcarriers evenly spread across the bandwidth.
  std::vector<double> subcarrier_offsets(std::size_t count) const;
  /// Fixed receiver chain gain per subcarrier (band-edge roll-off), identical at every location.
  std::vector<double> subcarrier_envelope(std::size_t count) const;
  /// Envelope, antenna gain and ripple combined, indexed [w * antennae + c].
  std::vector<double> receiver_gain(std::size_t subcarriers, std::size_t antennae) const;
  double antenna_gain_for(std::size_t antenna) const {
    return antenna_gain.empty() ? 1.0 : antenna_gain[antenna % antenna_gain.size()];
  }
};

struct SiteConfig {
  double width = 21.0;
  double depth = 16.0;
  Point2 ap{3.0, 12.5};
  bool core_obstacle = true;
  Rect core{9.0, 5.0, 17.0, 10.0};
  std::size_t scatterer_count = 14;
  double coherence_hz = 40e6;
  double wall_reflection = 0.55;
  double core_reflection = 0.45;
  std::size_t clutter_features = 96;
  double clutter_length = 3.0;           // spatial correlation length, meters
  double clutter_frequency_length = 0.5; // in units of the half bandwidth
  double clutter_depth = 0.25;
  std::size_t ripple_terms = 3;
  double ripple_depth = 0.0;  // off by default: it survives normalisation and costs accuracy
  std::vector<double> antenna_gain{1.0, 0.4, 0.65};
};

/// Outer walls plus the optional core; static scatterers are drawn from `seed`.
SiteModel make_site(const SiteConfig& config, std::uint64_t seed);

}  // namespace csiloc::sim
