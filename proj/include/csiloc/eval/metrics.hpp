#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "csiloc/geometry.hpp"

namespace csiloc::eval {

/// Sample Pearson correlation. A constant vector has no linear relationship with
/// anything, so the result is 0 in that case. Throws InputError on length mismatch
/// or fewer than two elements.
double pearson(std::span<const double> u, std::span<const double> v);

/// Mean of pearson(x_j, x_k) over all N*N ordered pairs, the diagonal included.
/// Throws InputError for fewer than two vectors.
double average_self_correlation(const std::vector<std::vector<double>>& samples);

/// Mean pearson over all pairs (a in A, b in B).
double mean_cross_correlation(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b);

struct AmbiguityConfig {
  double grid_size = 0.5;
  double correlation_threshold = 0.8;

  void validate() const;
};

struct AmbiguityResult {
  std::vector<std::size_t> counts;  // per RP

  double fraction_zero() const;
  std::size_t max_count() const;
  /// ambiguous-point count -> number of RPs with that count
  std::map<std::size_t, std::size_t> histogram() const;
};

/// For each RP i, counts RPs j farther than grid_size whose fingerprint sets have
/// mean cross-correlation above the threshold. `fingerprints[i]` holds RP i's set.
AmbiguityResult count_ambiguous(const std::vector<std::vector<std::vector<double>>>& fingerprints,
                                const std::vector<Point2>& locations, const AmbiguityConfig& config);

struct ErrorReport {
  std::string label;
  std::vector<double> errors;  // in input order
  std::vector<double> sorted;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation

  /// Smallest error e with at least a fraction p of errors <= e; p in [0, 1].
  double percentile(double p) const;
  /// Empirical CDF as (error, fraction <= error) at each sorted sample.
  std::vector<std::pair<double, double>> cdf() const;
  /// CDF evaluated on a regular grid from 0 up to the largest error.
  std::vector<std::pair<double, double>> cdf_samples(double resolution = 0.05) const;
};

ErrorReport error_report(const std::vector<Point2>& predictions, const std::vector<Point2>& truth,
                         std::string label = {});
/// Report over a plain error list (used when pooling runs).
ErrorReport report_from_errors(std::vector<double> errors, std::string label = {});

/// label,count,mean_m,std_m,p80_m,p80_over_mean rows plus a pooled "Average" row.
std::string compare_reports(const std::vector<ErrorReport>& reports);

void write_errors_csv(const std::filesystem::path& path, const ErrorReport& report,
                      const std::vector<Point2>& predictions, const std::vector<Point2>& truth);
void write_cdf_csv(const std::filesystem::path& path, const std::vector<ErrorReport>& reports,
                   double resolution = 0.05);
void write_ambiguity_csv(const std::filesystem::path& path, const std::vector<std::string>& labels,
                         const std::vector<AmbiguityResult>& results);

}  // namespace csiloc::eval
