#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "csiloc/error.hpp"
#include "csiloc/eval/metrics.hpp"
#include "support/metric_oracles.hpp"

using namespace csiloc;
using namespace csiloc::eval;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST_CASE("pearson examples") {
  const std::vector<double> u{1, 2, 3};
  CHECK(pearson(u, u) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson(u, std::vector<double>{-1, -2, -3}) == doctest::Approx(-1.0).epsilon(1e-15));
  // By hand: sum(dx*dy) = 3, sum(dx^2) = 2, sum(dy^2) = 14/3, so r = 3 / sqrt(28/3).
  CHECK(pearson(u, std::vector<double>{1, 2, 4}) == doctest::Approx(0.9819805060619657).epsilon(1e-14));
  CHECK(pearson(u, std::vector<double>{5, 5, 5}) == 0.0);
  CHECK_THROWS_AS(pearson(u, std::vector<double>{1, 2}), InputError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), InputError);
}

TEST_CASE("pearson properties") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> a(0.01, 50.0), b(-10.0, 10.0);
  for (int t = 0; t < 50; ++t) {
    const auto u = random_vector(rng, 2 + t), v = random_vector(rng, 2 + t);
    const double r = pearson(u, v);
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
    CHECK(pearson(v, u) == doctest::Approx(r).epsilon(1e-12));
    std::vector<double> w = u;
    const double scale = a(rng), shift = b(rng);
    for (auto& x : w) x = scale * x + shift;
    CHECK(pearson(w, v) == doctest::Approx(r).epsilon(1e-9));
  }
}

TEST_CASE("average self correlation") {
  const std::vector<double> x{1, 4, 2, 8};
  CHECK(average_self_correlation({x, x, x, x}) == doctest::Approx(1.0).epsilon(1e-15));
  // Orthogonal centred vectors: the off-diagonal terms vanish, leaving (1 + 0 + 0 + 1) / 4.
  CHECK(average_self_correlation({{1, -1, 1, -1}, {1, 1, -1, -1}}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(average_self_correlation({x}), InputError);

  std::mt19937_64 rng(32);
  std::vector<std::vector<double>> many;
  for (int i = 0; i < 120; ++i) many.push_back(random_vector(rng, 30));
  const double rho = average_self_correlation(many);
  CHECK(std::isfinite(rho));
  CHECK(rho <= 1.0);
  CHECK(rho == doctest::Approx(oracle::average_self_correlation(many)).epsilon(1e-12));
}

TEST_CASE("ambiguity counting") {
  const std::vector<Point2> loc{{0, 0}, {0.5, 0}, {3, 0}, {6, 0}, {6, 0.5}};
  std::vector<std::vector<std::vector<double>>> same(loc.size(), {{1, 3, 2, 5, 4}});
  const auto all = count_ambiguous(same, loc, {0.5, 0.8});
  // Each RP is ambiguous with every RP outside its 0.5 m neighbourhood.
  CHECK(all.counts == std::vector<std::size_t>{3, 3, 4, 3, 3});
  CHECK(all.fraction_zero() == 0.0);
  CHECK(all.max_count() == 4);

  std::mt19937_64 rng(33);
  std::vector<std::vector<std::vector<double>>> random(loc.size());
  for (auto& set : random) set = {random_vector(rng, 4000)};
  const auto none = count_ambiguous(random, loc, {0.5, 0.8});
  CHECK(none.max_count() == 0);
  CHECK(none.fraction_zero() == 1.0);
  CHECK(none.histogram() == std::map<std::size_t, std::size_t>{{0, 5}});

  CHECK_THROWS_AS(count_ambiguous(same, loc, {0.0, 0.8}), ConfigError);
  CHECK_THROWS_AS(count_ambiguous(same, loc, {0.5, 1.0}), ConfigError);
  CHECK_THROWS_AS(count_ambiguous(same, {{0, 0}}, {0.5, 0.8}), InputError);
}

TEST_CASE("ambiguity counts never grow with the threshold") {
  std::mt19937_64 rng(34);
  std::vector<std::vector<std::vector<double>>> fp;
  std::vector<Point2> loc;
  const auto base = random_vector(rng, 50);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int r = 0; r < 30; ++r) {
    auto v = random_vector(rng, 50);
    const double mix = u(rng);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = mix * base[i] + (1 - mix) * v[i];
    fp.push_back({v});
    loc.push_back({u(rng) * 10, u(rng) * 10});
  }
  std::vector<std::size_t> previous(fp.size(), SIZE_MAX);
  for (double t = 0.05; t < 1.0; t += 0.05) {
    const auto res = count_ambiguous(fp, loc, {0.5, t});
    for (std::size_t i = 0; i < fp.size(); ++i) CHECK(res.counts[i] <= previous[i]);
    previous = res.counts;
  }
}

TEST_CASE("error reports") {
  const std::vector<Point2> truth{{0, 0}, {1, 1}, {2, 2}};
  const auto perfect = error_report(truth, truth, "perfect");
  CHECK(perfect.mean == 0.0);
  CHECK(perfect.std == 0.0);
  CHECK(perfect.cdf() == std::vector<std::pair<double, double>>{{0.0, 1.0}});
  CHECK(perfect.cdf_samples().front() == std::pair<double, double>{0.0, 1.0});

  const auto r = report_from_errors({1, 2, 3, 4, 5});
  CHECK(r.mean == 3.0);
  CHECK(r.std == doctest::Approx(std::sqrt(2.0)));
  CHECK(r.percentile(0.8) == 4.0);
  CHECK(r.percentile(0.81) == 5.0);
  CHECK(r.percentile(0.0) == 1.0);
  CHECK(r.percentile(1.0) == 5.0);
  const auto cdf = r.cdf();
  for (std::size_t i = 1; i < cdf.size(); ++i) CHECK(cdf[i].second >= cdf[i - 1].second);
  CHECK(cdf.back().second == 1.0);
  CHECK_THROWS_AS(error_report(truth, {{0, 0}}), InputError);
  CHECK_THROWS_AS(report_from_errors({}), InputError);
  CHECK_THROWS_AS(r.percentile(1.5), InputError);

  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> u(0.0, 7.0);
  std::vector<double> errs(97);
  for (auto& e : errs) e = u(rng);
  const auto big = report_from_errors(errs);
  for (double p = 0.0; p <= 1.0; p += 0.01) CHECK(oracle::cdf_at(errs, big.percentile(p)) >= p - 1e-12);
  const auto samples = big.cdf_samples(0.05);
  CHECK(samples.back().second == 1.0);
  CHECK(samples[1].first == doctest::Approx(0.05));
}

TEST_CASE("report table has one row per run plus the pooled average") {
  const auto csv = compare_reports({report_from_errors({1, 2}, "Day 1 - Quiet"), report_from_errors({3}, "Day 2 - Steady"),
                                    report_from_errors({4, 4}, "Day 3 - Busy")});
  std::istringstream in(csv);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == "label,count,mean_m,std_m,p80_m,p80_over_mean");
  CHECK(lines[1].rfind("Day 1 - Quiet,2,1.5,", 0) == 0);
  CHECK(lines[4].rfind("Average,5,2.8,", 0) == 0);
}

TEST_CASE("CSV writers") {
  const auto dir = std::filesystem::temp_directory_path() / "csiloc_metrics_test";
  std::filesystem::create_directories(dir);
  const std::vector<Point2> truth{{0, 0}, {1, 0}}, pred{{0, 1}, {1, 0}};
  const auto rep = error_report(pred, truth, "run");
  write_errors_csv(dir / "errors.csv", rep, pred, truth);
  write_cdf_csv(dir / "cdf.csv", {rep});
  write_ambiguity_csv(dir / "amb.csv", {"raw"}, {AmbiguityResult{{0, 2, 2}}});
  std::ifstream amb(dir / "amb.csv");
  std::stringstream ss;
  ss << amb.rdbuf();
  CHECK(ss.str() == "label,ambiguous_points,rp_count\nraw,0,1\nraw,2,2\n");
  std::ifstream errors(dir / "errors.csv");
  std::string header, first;
  std::getline(errors, header);
  std::getline(errors, first);
  CHECK(first == "0,0,0,0,1,1");
  std::filesystem::remove_all(dir);
}

TEST_CASE("library metrics agree with brute force") {
  const auto dev = oracle::run_metric_oracle_suite(36, 60);
  CHECK(dev.max_numeric() <= 1e-12);
  CHECK(dev.ambiguity_mismatches == 0);
}
