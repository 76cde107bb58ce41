#include "csiloc/eval/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "csiloc/error.hpp"

namespace csiloc::eval {

double pearson(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw InputError("pearson: length mismatch (" + std::to_string(u.size()) + " vs " + std::to_string(v.size()) + ")");
  if (u.size() < 2) throw InputError("pearson: need at least two elements");
  const double n = static_cast<double>(u.size());
  const double mu = std::accumulate(u.begin(), u.end(), 0.0) / n;
  const double mv = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double suv = 0.0, suu = 0.0, svv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = u[i] - mu, b = v[i] - mv;
    suv += a * b;
    suu += a * a;
    svv += b * b;
  }
  if (suu == 0.0 || svv == 0.0) return 0.0;
  return std::clamp(suv / std::sqrt(suu * svv), -1.0, 1.0);
}

double average_self_correlation(const std::vector<std::vector<double>>& samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw InputError("average self-correlation needs at least two images");
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    total += pearson(samples[j], samples[j]);
    for (std::size_t k = j + 1; k < n; ++k) total += 2.0 * pearson(samples[j], samples[k]);
  }
  return total / static_cast<double>(n * n);
}

double mean_cross_correlation(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  if (a.empty() || b.empty()) throw InputError("mean cross-correlation of an empty set");
  double total = 0.0;
  for (const auto& x : a)
    for (const auto& y : b) total += pearson(x, y);
  return total / static_cast<double>(a.size() * b.size());
}

void AmbiguityConfig::validate() const {
  if (!(grid_size > 0.0)) throw ConfigError("ambiguity grid size must be positive");
  if (!(correlation_threshold > 0.0 && correlation_threshold < 1.0))
    throw ConfigError("correlation threshold must lie in (0, 1)");
}

double AmbiguityResult::fraction_zero() const {
  if (counts.empty()) return 0.0;
  const auto zeros = std::count(counts.begin(), counts.end(), std::size_t{0});
  return static_cast<double>(zeros) / static_cast<double>(counts.size());
}

std::size_t AmbiguityResult::max_count() const {
  return counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
}

std::map<std::size_t, std::size_t> AmbiguityResult::histogram() const {
  std::map<std::size_t, std::size_t> h;
  for (auto c : counts) ++h[c];
  return h;
}

AmbiguityResult count_ambiguous(const std::vector<std::vector<std::vector<double>>>& fingerprints,
                                const std::vector<Point2>& locations, const AmbiguityConfig& config) {
  config.validate();
  const std::size_t m = fingerprints.size();
  if (locations.size() != m) throw InputError("count_ambiguous: one location per RP required");
  AmbiguityResult result;
  result.counts.assign(m, 0);
  if (m == 0) return result;

  std::size_t dim = 0;
  for (const auto& set : fingerprints) {
    if (set.empty()) throw InputError("count_ambiguous: RP without fingerprints");
    for (const auto& f : set) {
      if (dim == 0) dim = f.size();
      if (f.size() != dim || dim < 2) throw InputError("count_ambiguous: fingerprint length mismatch");
    }
  }

  // Pearson is the dot product of centred unit vectors, and the mean over all pairs of
  // two sets factorises into the dot product of the per-set mean unit vectors.
  Eigen::MatrixXd z(m, dim);
  for (std::size_t i = 0; i < m; ++i) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    for (const auto& f : fingerprints[i]) {
      // Copy into aligned storage so the reductions round the same way every run.
      Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(dim));
      c.array() -= c.mean();
      const double norm = c.norm();
      if (norm > 0.0) acc += c / norm;
    }
    z.row(static_cast<Eigen::Index>(i)) = acc / static_cast<double>(fingerprints[i].size());
  }
  const Eigen::MatrixXd corr = z * z.transpose();

  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j || distance(locations[i], locations[j]) <= config.grid_size) continue;
      if (corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > config.correlation_threshold)
        ++result.counts[i];
    }
  return result;
}

double ErrorReport::percentile(double p) const {
  if (sorted.empty()) throw InputError("percentile of an empty report");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("percentile must lie in [0, 1]");
  const double n = static_cast<double>(sorted.size());
  // The tolerance keeps p*n that should be an integer (0.8 * 5) from rounding up.
  auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::vector<std::pair<double, double>> ErrorReport::cdf() const {
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;  // keep the last of ties
    out.emplace_back(sorted[i], static_cast<double>(i + 1) / n);
  }
  return out;
}

std::vector<std::pair<double, double>> ErrorReport::cdf_samples(double resolution) const {
  if (!(resolution > 0.0)) throw InputError("CDF resolution must be positive");
  std::vector<std::pair<double, double>> out;
  if (sorted.empty()) return out;
  const auto steps = static_cast<std::size_t>(std::ceil(sorted.back() / resolution - 1e-9));
  const double n = static_cast<double>(sorted.size());
  for (std::size_t k = 0; k <= steps; ++k) {
    const double x = resolution * static_cast<double>(k);
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
    out.emplace_back(x, static_cast<double>(below) / n);
  }
  return out;
}

ErrorReport report_from_errors(std::vector<double> errors, std::string label) {
  if (errors.empty()) throw InputError("error report needs at least one point");
  ErrorReport r;
  r.label = std::move(label);
  r.errors = std::move(errors);
  r.sorted = r.errors;
  std::sort(r.sorted.begin(), r.sorted.end());
  const double n = static_cast<double>(r.errors.size());
  r.mean = std::accumulate(r.errors.begin(), r.errors.end(), 0.0) / n;
  double ss = 0.0;
  for (double e : r.errors) ss += (e - r.mean) * (e - r.mean);
  r.std = std::sqrt(ss / n);
  return r;
}

ErrorReport error_report(const std::vector<Point2>& predictions, const std::vector<Point2>& truth, std::string label) {
  if (predictions.size() != truth.size())
    throw InputError("error report: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(truth.size()) + " ground-truth points");
  std::vector<double> errors(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) errors[i] = distance(predictions[i], truth[i]);
  return report_from_errors(std::move(errors), std::move(label));
}

namespace {

void report_row(std::ostream& out, const ErrorReport& r) {
  out << r.label << ',' << r.errors.size() << ',' << r.mean << ',' << r.std << ',' << r.percentile(0.8) << ','
      << (r.mean > 0.0 ? r.percentile(0.8) / r.mean : 0.0) << '\n';
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << std::setprecision(10);
  return out;
}

}  // namespace

std::string compare_reports(const std::vector<ErrorReport>& reports) {
  if (reports.empty()) throw InputError("compare_reports needs at least one report");
  std::ostringstream out;
  out << std::setprecision(10);
  out << "label,count,mean_m,std_m,p80_m,p80_over_mean\n";
  std::vector<double> pooled;
  for (const auto& r : reports) {
    report_row(out, r);
    pooled.insert(pooled.end(), r.errors.begin(), r.errors.end());
  }
  report_row(out, report_from_errors(std::move(pooled), "Average"));
  return out.str();
}

void write_errors_csv(const std::filesystem::path& path, const ErrorReport& report,
                      const std::vector<Point2>& predictions, const std::vector<Point2>& truth) {
  if (predictions.size() != report.errors.size() || truth.size() != report.errors.size())
    throw InputError("write_errors_csv: inconsistent lengths");
  auto out = open_csv(path);
  out << "index,true_x,true_y,pred_x,pred_y,error_m\n";
  for (std::size_t i = 0; i < truth.size(); ++i)
    out << i << ',' << truth[i].x << ',' << truth[i].y << ',' << predictions[i].x << ',' << predictions[i].y << ','
        << report.errors[i] << '\n';
}

void write_cdf_csv(const std::filesystem::path& path, const std::vector<ErrorReport>& reports, double resolution) {
  auto out = open_csv(path);
  out << "label,error_m,fraction\n";
  for (const auto& r : reports)
    for (const auto& [x, f] : r.cdf_samples(resolution)) out << r.label << ',' << x << ',' << f << '\n';
}

void write_ambiguity_csv(const std::filesystem::path& path, const std::vector<std::string>& labels,
                         const std::vector<AmbiguityResult>& results) {
  if (labels.size() != results.size()) throw InputError("write_ambiguity_csv: one label per result");
  auto out = open_csv(path);
  out << "label,ambiguous_points,rp_count\n";
  for (std::size_t i = 0; i < results.size(); ++i)
    for (const auto& [count, rps] : results[i].histogram()) out << labels[i] << ',' << count << ',' << rps << '\n';
}

}  // namespace csiloc::eval
