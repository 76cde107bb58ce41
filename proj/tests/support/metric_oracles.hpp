#pragma once

// Brute-force reference implementations of the evaluation metrics. They follow the
// textbook definitions literally (long double sums, explicit pair loops, linear scans)
// and share no code with the library versions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "csiloc/eval/metrics.hpp"

namespace oracle {

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<long double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const long double mx = sx / n, my = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

inline double average_self_correlation(const std::vector<std::vector<double>>& s) {
  long double total = 0;
  for (const auto& a : s)
    for (const auto& b : s) total += pearson(a, b);
  return static_cast<double>(total / static_cast<long double>(s.size() * s.size()));
}

inline std::vector<std::size_t> count_ambiguous(const std::vector<std::vector<std::vector<double>>>& fp,
                                                const std::vector<csiloc::Point2>& loc, double grid, double threshold) {
  std::vector<std::size_t> counts(fp.size(), 0);
  for (std::size_t i = 0; i < fp.size(); ++i)
    for (std::size_t j = 0; j < fp.size(); ++j) {
      if (i == j) continue;
      const double dist = std::sqrt((loc[i].x - loc[j].x) * (loc[i].x - loc[j].x) + (loc[i].y - loc[j].y) * (loc[i].y - loc[j].y));
      if (dist <= grid) continue;
      long double sum = 0;
      for (const auto& a : fp[i])
        for (const auto& b : fp[j]) sum += pearson(a, b);
      if (sum / static_cast<long double>(fp[i].size() * fp[j].size()) > threshold) ++counts[i];
    }
  return counts;
}

/// Fraction of errors <= x, by counting.
inline double cdf_at(const std::vector<double>& errors, double x) {
  std::size_t k = 0;
  for (double e : errors) k += e <= x ? 1 : 0;
  return static_cast<double>(k) / static_cast<double>(errors.size());
}

/// Smallest observed error whose CDF value reaches p, by scanning every candidate.
inline double percentile(const std::vector<double>& errors, double p) {
  double best = INFINITY;
  for (double e : errors)
    if (cdf_at(errors, e) >= p - 1e-12 && e < best) best = e;
  return best;
}

struct Deviations {
  double pearson = 0.0;
  double self_correlation = 0.0;
  double cdf = 0.0;
  double percentile = 0.0;
  std::size_t ambiguity_mismatches = 0;
  std::size_t instances = 0;

  double max_numeric() const { return std::max({pearson, self_correlation, cdf, percentile}); }
};

/// Compares the library metrics with the brute-force versions on random instances of
/// at most 10 RPs. Fingerprint sets are built from shared components so correlations
/// straddle the threshold instead of all sitting near zero.
inline Deviations run_metric_oracle_suite(std::uint64_t seed, std::size_t instances) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Deviations dev;
  for (std::size_t inst = 0; inst < instances; ++inst, ++dev.instances) {
    const std::size_t rps = 2 + inst % 9;  // 2..10
    const std::size_t dim = 2 + (inst * 7) % 40;
    const std::size_t per_rp = 1 + inst % 4;
    std::vector<double> base(dim);
    for (auto& v : base) v = gauss(rng);
    std::vector<std::vector<std::vector<double>>> fp(rps);
    std::vector<csiloc::Point2> loc(rps);
    for (std::size_t r = 0; r < rps; ++r) {
      loc[r] = {std::floor(unit(rng) * 6.0) * 0.5, std::floor(unit(rng) * 6.0) * 0.5};
      const double mix = unit(rng);
      for (std::size_t k = 0; k < per_rp; ++k) {
        std::vector<double> f(dim);
        for (std::size_t i = 0; i < dim; ++i) f[i] = mix * base[i] + (1.0 - mix) * gauss(rng);
        if (inst % 11 == 5 && k == 0) std::fill(f.begin(), f.end(), 3.0);  // constant vector case
        fp[r].push_back(f);
      }
    }
    for (std::size_t r = 0; r < rps; ++r)
      for (std::size_t q = 0; q < rps; ++q)
        dev.pearson = std::max(dev.pearson, std::abs(csiloc::eval::pearson(fp[r][0], fp[q][0]) - pearson(fp[r][0], fp[q][0])));
    std::vector<std::vector<double>> set = fp[0];
    set.push_back(fp[rps - 1][0]);
    dev.self_correlation = std::max(dev.self_correlation, std::abs(csiloc::eval::average_self_correlation(set) -
                                                                   average_self_correlation(set)));

    const double threshold = 0.05 + 0.9 * unit(rng);
    const double grid = 0.5 * (1 + inst % 3);
    const auto lib = csiloc::eval::count_ambiguous(fp, loc, {grid, threshold});
    const auto ref = count_ambiguous(fp, loc, grid, threshold);
    for (std::size_t r = 0; r < rps; ++r) dev.ambiguity_mismatches += lib.counts[r] != ref[r] ? 1 : 0;

    std::vector<double> errors(3 + inst % 20);
    for (auto& e : errors) e = inst % 4 == 0 ? std::floor(unit(rng) * 5.0) : 4.0 * unit(rng);  // ties sometimes
    const auto report = csiloc::eval::report_from_errors(errors);
    for (double p : {0.0, 0.1, 0.25, 0.5, 0.8, 0.9, 1.0})
      dev.percentile = std::max(dev.percentile, std::abs(report.percentile(p) - percentile(errors, std::max(p, 1e-12))));
    for (const auto& [x, f] : report.cdf()) dev.cdf = std::max(dev.cdf, std::abs(f - cdf_at(errors, x)));
    for (const auto& [x, f] : report.cdf_samples(0.05)) dev.cdf = std::max(dev.cdf, std::abs(f - cdf_at(errors, x)));
  }
  return dev;
}

}  // namespace oracle
