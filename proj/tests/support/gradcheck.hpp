#pragma once

// Central finite-difference oracle. Independent of the layers' backward code: it only
// ever evaluates objectives through forward passes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>

namespace csiloc::testing {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdRelTol = 1e-4;
inline constexpr double kFdAbsFloor = 1e-7;

inline bool grad_close(double analytic, double numeric) {
  const double err = std::abs(analytic - numeric);
  return err <= kFdAbsFloor || err <= kFdRelTol * std::max(std::abs(analytic), std::abs(numeric));
}

struct GradCheck {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst_rel = 0.0;
  std::string first_failure;

  bool ok() const { return failures == 0 && checked > 0; }
  void merge(const GradCheck& o) {
    checked += o.checked;
    failures += o.failures;
    worst_rel = std::max(worst_rel, o.worst_rel);
    if (first_failure.empty()) first_failure = o.first_failure;
  }
};

/// Perturbs each entry of `values` in place by +-h and compares the central
/// difference of `objective` with `analytic`.
inline GradCheck check_gradient(std::span<double> values, std::span<const double> analytic,
                                const std::function<double()>& objective, const std::string& label) {
  GradCheck r;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + kFdStep;
    const double up = objective();
    values[i] = saved - kFdStep;
    const double down = objective();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * kFdStep);
    const double a = analytic[i];
    ++r.checked;
    const double scale = std::max({std::abs(a), std::abs(numeric), 1e-300});
    const double abs_err = std::abs(a - numeric);
    if (abs_err > kFdAbsFloor) r.worst_rel = std::max(r.worst_rel, abs_err / scale);
    if (!grad_close(a, numeric)) {
      ++r.failures;
      if (r.first_failure.empty())
        r.first_failure = label + "[" + std::to_string(i) + "]: analytic " + std::to_string(a) + " numeric " +
                          std::to_string(numeric);
    }
  }
  return r;
}

}  // namespace csiloc::testing
