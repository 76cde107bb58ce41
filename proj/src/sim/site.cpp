#include "csiloc/sim/site.hpp"

#include <algorithm>
#include <cmath>

#include "csiloc/error.hpp"
#include "csiloc/rng.hpp"

namespace csiloc::sim {

void SiteModel::validate() const {
  if (!(width > 0.0) || !(depth > 0.0)) throw ConfigError("site area must have positive width and depth");
  if (!inside(ap)) throw ConfigError("access point must lie inside the site area");
  for (const auto& o : obstacles)
    if (o.contains(ap)) throw ConfigError("access point lies inside an obstacle");
  if (!(bandwidth_hz > 0.0) || !(coherence_hz > 0.0)) throw ConfigError("frequencies must be positive");
  if (!(tx_gain > 0.0)) throw ConfigError("transmit gain must be positive");
  for (double g : antenna_gain)
    if (!(g > 0.0)) throw ConfigError("antenna gains must be positive");
}

bool SiteModel::covered(Point2 p, double margin) const {
  if (p.x < margin || p.y < margin || p.x > width - margin || p.y > depth - margin) return false;
  for (const auto& o : obstacles)
    if (o.contains(p, margin)) return false;
  return true;
}

std::vector<double> SiteModel::subcarrier_offsets(std::size_t count) const {
  std::vector<double> out(count);
  for (std::size_t w = 0; w < count; ++w)
    out[w] = -bandwidth_hz / 2.0 + bandwidth_hz * (static_cast<double>(w) + 0.5) / static_cast<double>(count);
  return out;
}

std::vector<double> SiteModel::subcarrier_envelope(std::size_t count) const {
  std::vector<double> out(count);
  const auto offsets = subcarrier_offsets(count);
  for (std::size_t w = 0; w < count; ++w) {
    const double u = 2.0 * offsets[w] / bandwidth_hz;  // in (-1, 1)
    out[w] = 1.0 - envelope_rolloff * std::pow(u, 4) + envelope_tilt * u;
  }
  return out;
}

std::vector<double> SiteModel::receiver_gain(std::size_t subcarriers, std::size_t antennae) const {
  const auto envelope = subcarrier_envelope(subcarriers);
  const auto offsets = subcarrier_offsets(subcarriers);
  std::vector<double> out(subcarriers * antennae);
  for (std::size_t w = 0; w < subcarriers; ++w) {
    const double u = 2.0 * offsets[w] / bandwidth_hz;
    for (std::size_t c = 0; c < antennae; ++c)
      out[w * antennae + c] = envelope[w] * antenna_gain_for(c) * std::exp(ripple.log_gain(u, c));
  }
  return out;
}

double ReceiverRipple::log_gain(double u, std::size_t antenna) const {
  if (frequency.empty() || antennae == 0 || depth == 0.0) return 0.0;
  const std::size_t base = (antenna % antennae) * frequency.size();
  double sum = 0.0;
  for (std::size_t k = 0; k < frequency.size(); ++k) sum += std::cos(frequency[k] * u + phase[base + k]);
  return depth * std::sqrt(2.0 / static_cast<double>(frequency.size())) * sum;
}

double ClutterField::value(Point2 p, double u) const {
  if (kx.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < kx.size(); ++k) sum += std::cos(kx[k] * p.x + ky[k] * p.y + kf[k] * u + phase[k]);
  return std::sqrt(2.0 / static_cast<double>(kx.size())) * sum;
}

SiteModel make_site(const SiteConfig& config, std::uint64_t seed) {
  SiteModel site;
  site.width = config.width;
  site.depth = config.depth;
  site.ap = config.ap;
  site.coherence_hz = config.coherence_hz;
  site.antenna_gain = config.antenna_gain;

  const double w = config.width, d = config.depth, r = config.wall_reflection;
  site.walls = {{{0, 0}, {w, 0}, r}, {{w, 0}, {w, d}, r}, {{w, d}, {0, d}, r}, {{0, d}, {0, 0}, r}};
  if (config.core_obstacle) {
    const Rect c = config.core;
    if (!(c.x1 > c.x0) || !(c.y1 > c.y0)) throw ConfigError("core obstacle must have positive extent");
    site.obstacles.push_back(c);
    const double cr = config.core_reflection;
    site.walls.push_back({{c.x0, c.y0}, {c.x1, c.y0}, cr});
    site.walls.push_back({{c.x1, c.y0}, {c.x1, c.y1}, cr});
    site.walls.push_back({{c.x1, c.y1}, {c.x0, c.y1}, cr});
    site.walls.push_back({{c.x0, c.y1}, {c.x0, c.y0}, cr});
  }
  site.validate();

  // Jittered-grid placement: every layout spreads furniture over the whole floor, so
  // the channel statistics vary less from one seed to the next than with uniform draws.
  Rng rng = make_rng(seed, {0x51de});
  std::uniform_real_distribution<double> unit(0.0, 1.0), us(2.0, 3.5), uphase(0.0, 2.0 * M_PI);
  const std::size_t want = config.scatterer_count;
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(want) * w / d)));
  const std::size_t rows = cols == 0 ? 0 : (want + cols - 1) / cols;
  std::size_t attempts = 0;
  for (std::size_t cell = 0; site.scatterers.size() < want; cell = (cell + 1) % std::max<std::size_t>(1, rows * cols)) {
    if (++attempts > 100000) throw ConfigError("cannot place static scatterers in the covered area");
    const double cx = static_cast<double>(cell % cols), cy = static_cast<double>(cell / cols);
    const Point2 p{w * (cx + unit(rng)) / static_cast<double>(cols), d * (cy + unit(rng)) / static_cast<double>(rows)};
    if (!site.covered(p, 0.2) || distance(p, site.ap) < 1.0) continue;
    site.scatterers.push_back({p, us(rng), uphase(rng)});
  }

  if (config.clutter_features > 0 && config.clutter_depth > 0.0) {
    if (!(config.clutter_length > 0.0) || !(config.clutter_frequency_length > 0.0))
      throw ConfigError("clutter correlation lengths must be positive");
    Rng crng = make_rng(seed, {0xc1077e5});
    std::normal_distribution<double> gs(0.0, 1.0 / config.clutter_length), gf(0.0, 1.0 / config.clutter_frequency_length);
    auto& c = site.clutter;
    c.depth = config.clutter_depth;
    for (std::size_t k = 0; k < config.clutter_features; ++k) {
      c.kx.push_back(gs(crng));
      c.ky.push_back(gs(crng));
      c.kf.push_back(gf(crng));
      c.phase.push_back(uphase(crng));
    }
  }

  if (config.ripple_terms > 0 && config.ripple_depth > 0.0) {
    // One to two cycles across the band: smooth like a real RF front end, not noise-like.
    Rng rrng = make_rng(seed, {0x41bb1e});
    std::uniform_real_distribution<double> uf(M_PI, 2.0 * M_PI);
    auto& rp = site.ripple;
    rp.depth = config.ripple_depth;
    rp.antennae = std::max<std::size_t>(1, site.antenna_gain.size());
    for (std::size_t k = 0; k < config.ripple_terms; ++k) rp.frequency.push_back(uf(rrng));
    for (std::size_t i = 0; i < rp.antennae * config.ripple_terms; ++i) rp.phase.push_back(uphase(rrng));
  }
  return site;
}

}  // namespace csiloc::sim
