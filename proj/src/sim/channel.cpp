#include "csiloc/sim/channel.hpp"

#include <algorithm>
#include <cmath>

#include "csiloc/error.hpp"

namespace csiloc::sim {

namespace {

constexpr double kSpeedOfLight = 299792458.0;
constexpr double kPi = 3.14159265358979323846;
constexpr double kNearField = 1.5;  // softening radius of every path length, meters
constexpr double kBodyRadius = 0.35;     // a person shadows legs passing this close
constexpr double kBodyShadowing = 0.5;

double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }

double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  double t = len2 > 0.0 ? ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + t * ab);
}

// Liang-Barsky clip against the open interior of the rectangle. Legs that only touch
// the boundary (a reflection off the obstacle face itself) do not count as crossing.
bool crosses_interior(Point2 a, Point2 b, const Rect& r) {
  constexpr double eps = 1e-9;
  const double x0 = r.x0 + eps, x1 = r.x1 - eps, y0 = r.y0 + eps, y1 = r.y1 - eps;
  const double dx = b.x - a.x, dy = b.y - a.y;
  double t0 = 0.0, t1 = 1.0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - x0, x1 - a.x, a.y - y0, y1 - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) t0 = std::max(t0, t);
    else t1 = std::min(t1, t);
    if (t0 > t1) return false;
  }
  return t1 - t0 > eps;
}

double leg_factor(const SiteModel& site, Point2 a, Point2 b, const std::vector<Point2>& blockers) {
  double f = 1.0;
  for (const auto& o : site.obstacles)
    if (crosses_interior(a, b, o)) f *= site.obstacle_transmission;
  for (const auto& person : blockers)
    if (point_segment_distance(person, a, b) < kBodyRadius && distance(person, b) > 1e-9 && distance(person, a) > 1e-9)
      f *= kBodyShadowing;
  return f;
}

double arrival_angle(Point2 from, Point2 at) { return std::atan2(from.y - at.y, from.x - at.x); }

void apply_clutter(const SiteModel& site, Point2 location, std::size_t subcarriers, std::size_t antennae,
                   std::vector<double>& amplitudes) {
  if (site.clutter.depth <= 0.0) return;
  const auto offsets = site.subcarrier_offsets(subcarriers);
  for (std::size_t w = 0; w < subcarriers; ++w) {
    const double gain = std::exp(site.clutter.depth * site.clutter.value(location, 2.0 * offsets[w] / site.bandwidth_hz));
    for (std::size_t c = 0; c < antennae; ++c) amplitudes[w * antennae + c] *= gain;
  }
}

}  // namespace

std::vector<Path> propagation_paths(const SiteModel& site, Point2 location, double time,
                                    const std::vector<Scatterer>& extra, const std::vector<Point2>& blockers) {
  if (!site.inside(location)) throw InputError("location outside the site area");
  std::vector<Path> paths;
  const Point2 ap = site.ap;

  const double los = distance(ap, location);
  paths.push_back({site.tx_gain * leg_factor(site, ap, location, blockers) / std::hypot(los, kNearField), los,
                   arrival_angle(ap, location)});

  for (const auto& wall : site.walls) {
    const Point2 d = wall.b - wall.a;
    const double len2 = d.x * d.x + d.y * d.y;
    if (len2 == 0.0) continue;
    const double side_ap = cross(d, ap - wall.a);
    const double side_rx = cross(d, location - wall.a);
    if (side_ap * side_rx <= 0.0) continue;  // reflection needs both ends on the same side
    const double t_ap = ((ap.x - wall.a.x) * d.x + (ap.y - wall.a.y) * d.y) / len2;
    const Point2 foot = wall.a + t_ap * d;
    const Point2 image = 2.0 * foot - ap;
    // Intersection of image->location with the wall line.
    const Point2 r = location - image;
    const double denom = cross(r, d);
    if (denom == 0.0) continue;
    const double s = cross(wall.a - image, d) / denom;
    const double u = cross(wall.a - image, r) / denom;
    if (s <= 0.0 || s >= 1.0 || u <= 0.0 || u >= 1.0) continue;
    const Point2 bounce = image + s * r;
    const double length = distance(image, location);
    const double factor = leg_factor(site, ap, bounce, blockers) * leg_factor(site, bounce, location, blockers);
    paths.push_back({site.tx_gain * wall.reflection * factor / std::hypot(length, kNearField), length,
                     arrival_angle(bounce, location)});
  }

  auto add_scatterer = [&](const Scatterer& sc, double strength) {
    const double d1 = distance(ap, sc.position), d2 = distance(sc.position, location);
    const double factor = leg_factor(site, ap, sc.position, blockers) * leg_factor(site, sc.position, location, blockers);
    paths.push_back({site.tx_gain * strength * factor / (std::hypot(d1, kNearField) * std::hypot(d2, kNearField)),
                     d1 + d2, arrival_angle(sc.position, location)});
  };
  for (const auto& sc : site.scatterers)
    add_scatterer(sc, sc.strength * (1.0 + site.daily_drift * std::sin(2.0 * kPi * time / 86400.0 + sc.drift_phase)));
  for (const auto& sc : extra) add_scatterer(sc, sc.strength);
  return paths;
}

std::vector<std::complex<double>> complex_response(const SiteModel& site, const std::vector<Path>& paths,
                                                   std::size_t subcarriers, std::size_t antennae) {
  const auto offsets = site.subcarrier_offsets(subcarriers);
  const auto receiver = site.receiver_gain(subcarriers, antennae);
  std::vector<std::complex<double>> h(subcarriers * antennae);
  for (const auto& p : paths) {
    const double tau = p.length / kSpeedOfLight;
    const double steer = kPi * std::cos(p.arrival_angle);  // half-wavelength spacing
    for (std::size_t w = 0; w < subcarriers; ++w) {
      const double phase = -2.0 * kPi * (site.coherence_hz + offsets[w]) * tau;
      for (std::size_t c = 0; c < antennae; ++c)
        h[w * antennae + c] += std::polar(p.gain, phase + steer * static_cast<double>(c));
    }
  }
  for (std::size_t i = 0; i < h.size(); ++i) h[i] *= receiver[i];
  return h;
}

std::vector<double> channel_response(const SiteModel& site, Point2 location, std::size_t subcarriers,
                                     std::size_t antennae) {
  const auto h = complex_response(site, propagation_paths(site, location), subcarriers, antennae);
  std::vector<double> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = std::abs(h[i]);
  apply_clutter(site, location, subcarriers, antennae, out);
  return out;
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::quiet: return "quiet";
    case Mode::steady: return "steady";
    case Mode::busy: return "busy";
  }
  return "unknown";
}

Mode mode_from_name(const std::string& name) {
  if (name == "quiet") return Mode::quiet;
  if (name == "steady") return Mode::steady;
  if (name == "busy") return Mode::busy;
  throw ConfigError("unknown fluctuation mode '" + name + "' (expected quiet, steady or busy)");
}

FluctuationMode FluctuationMode::preset(Mode m) {
  FluctuationMode f;
  f.mode = m;
  switch (m) {
    case Mode::quiet:
      f.target_self_correlation = 0.8;
      f.outlier_row_probability = 0.008;
      f.fade_block_probability = 0.05;
      f.people_rate = 0.3;
      f.person_strength = 2.5;
      f.noise_sigma = 0.065;
      f.row_jitter_sigma = 0.035;
      break;
    case Mode::steady:
      f.target_self_correlation = 0.6;
      f.outlier_row_probability = 0.015;
      f.fade_block_probability = 0.25;
      f.people_rate = 2.0;
      f.person_strength = 2.5;
      f.noise_sigma = 0.09;
      f.row_jitter_sigma = 0.1;
      break;
    case Mode::busy:
      f.target_self_correlation = 0.4;
      f.outlier_row_probability = 0.035;
      f.fade_block_probability = 0.45;
      f.people_rate = 4.0;
      f.person_strength = 2.5;
      f.noise_sigma = 0.12;
      f.row_jitter_sigma = 0.25;
      break;
  }
  return f;
}

FluctuationMode FluctuationMode::noiseless() {
  FluctuationMode f;
  f.target_self_correlation = 1.0;
  return f;
}

csi::CsiImage emit_snapshot(const SiteModel& site, Point2 location, const FluctuationMode& mode,
                            const csi::DeviceProfile& profile, double time, Rng& rng) {
  const std::size_t H = profile.scans, W = profile.subcarriers, C = profile.antennae;

  std::vector<Scatterer> people;
  std::vector<Point2> bodies;
  if (mode.people_rate > 0.0) {
    const int count = std::poisson_distribution<int>(mode.people_rate)(rng);
    std::uniform_real_distribution<double> ux(0.0, site.width), uy(0.0, site.depth), us(0.7, 1.3);
    while (static_cast<int>(people.size()) < count) {
      const Point2 p{ux(rng), uy(rng)};
      if (!site.covered(p, 0.2)) continue;
      people.push_back({p, mode.person_strength * us(rng), 0.0});
      bodies.push_back(p);
    }
  }

  const auto h = complex_response(site, propagation_paths(site, location, time, people, bodies), W, C);
  std::vector<double> base(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) base[i] = std::abs(h[i]);
  apply_clutter(site, location, W, C, base);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (mode.fade_block_probability > 0.0 && unit(rng) < mode.fade_block_probability && W >= 3) {
    const std::size_t min_len = std::max<std::size_t>(1, W / 6), max_len = std::max(min_len, W / 3);
    const std::size_t len = std::uniform_int_distribution<std::size_t>(min_len, max_len)(rng);
    const std::size_t start = std::uniform_int_distribution<std::size_t>(0, W - len)(rng);
    const double depth = std::uniform_real_distribution<double>(0.3, 0.7)(rng);
    for (std::size_t w = start; w < start + len; ++w)
      for (std::size_t c = 0; c < C; ++c) base[w * C + c] *= depth;
  }

  csi::CsiImage img(profile);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t s = 0; s < H; ++s) {
    double row_gain = std::exp(mode.row_jitter_sigma * gauss(rng));
    if (mode.outlier_row_probability > 0.0 && unit(rng) < mode.outlier_row_probability)
      row_gain *= std::uniform_real_distribution<double>(2.0, 3.0)(rng);
    for (std::size_t i = 0; i < W * C; ++i) {
      const double noise = mode.noise_sigma > 0.0 ? std::exp(mode.noise_sigma * gauss(rng)) : 1.0;
      // Stored as f32 so a database file round trip is lossless.
      img.amplitudes[s * W * C + i] = static_cast<float>(base[i] * row_gain * noise);
    }
  }
  return img;
}

}  // namespace csiloc::sim
