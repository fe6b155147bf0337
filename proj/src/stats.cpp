#include "semleak/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "semleak/errors.hpp"

namespace semleak {

double student_t_upper_tail(double t, double df) {
  if (!(df > 0.0)) throw Error("degrees of freedom must be positive");
  if (std::isnan(t)) throw Error("t statistic is NaN");
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  const boost::math::students_t dist(df);
  return boost::math::cdf(boost::math::complement(dist, t));
}

TTestResult t_test_one_sample_greater(std::span<const double> values, double mu0) {
  const std::size_t n = values.size();
  if (n < 2) throw Error("t-test needs at least two values");
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double variance = ss / static_cast<double>(n - 1);
  if (!(variance > 0.0)) throw DegenerateError("t-test on zero-variance sample");
  TTestResult r;
  r.degrees_of_freedom = static_cast<int>(n - 1);
  r.t_statistic = (mean - mu0) / std::sqrt(variance / static_cast<double>(n));
  r.p_value = student_t_upper_tail(r.t_statistic, r.degrees_of_freedom);
  return r;
}

TTestResult t_test_paired_greater(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("paired t-test needs equal-length samples");
  std::vector<double> diffs(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diffs[i] = a[i] - b[i];
  return t_test_one_sample_greater(diffs, 0.0);
}

namespace {

std::int64_t tied_pairs(const std::vector<double>& sorted_values) {
  std::int64_t ties = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= sorted_values.size(); ++i) {
    if (i < sorted_values.size() && sorted_values[i] == sorted_values[i - 1]) {
      ++run;
    } else {
      ties += static_cast<std::int64_t>(run * (run - 1) / 2);
      run = 1;
    }
  }
  return ties;
}

// Sorts `v` and returns the number of strict inversions (i < j, v[i] > v[j]).
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& scratch, std::size_t lo,
                         std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(v, scratch, lo, mid) + merge_count(v, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + lo, scratch.begin() + hi, v.begin() + lo);
  return swaps;
}

}  // namespace

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size()) throw Error("kendall tau needs equal-length inputs");
  if (n < 2) throw Error("kendall tau needs at least two observations");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) throw Error("kendall tau input contains NaN");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[order[i]];
    ys[i] = y[order[i]];
  }

  const std::int64_t total = static_cast<std::int64_t>(n * (n - 1) / 2);
  const std::int64_t x_ties = tied_pairs(xs);
  std::int64_t joint_ties = 0;
  {
    std::size_t run = 1;
    for (std::size_t i = 1; i <= n; ++i) {
      if (i < n && xs[i] == xs[i - 1] && ys[i] == ys[i - 1]) {
        ++run;
      } else {
        joint_ties += static_cast<std::int64_t>(run * (run - 1) / 2);
        run = 1;
      }
    }
  }
  std::vector<double> scratch(n);
  const std::int64_t swaps = merge_count(ys, scratch, 0, n);
  const std::int64_t y_ties = tied_pairs(ys);

  const std::int64_t not_tied_x = total - x_ties;
  const std::int64_t not_tied_y = total - y_ties;
  if (not_tied_x == 0 || not_tied_y == 0) {
    throw DegenerateError("kendall tau undefined when one side is all ties");
  }
  const std::int64_t s = total - x_ties - y_ties + joint_ties - 2 * swaps;
  return static_cast<double>(s) /
         std::sqrt(static_cast<double>(not_tied_x) * static_cast<double>(not_tied_y));
}

std::string_view to_string(ComparisonLabel label) {
  switch (label) {
    case ComparisonLabel::kTest:
      return "test";
    case ComparisonLabel::kControl:
      return "control";
    case ComparisonLabel::kNeither:
      return "neither";
  }
  return "neither";
}

ComparisonLabel parse_comparison_label(std::string_view name) {
  if (name == "test") return ComparisonLabel::kTest;
  if (name == "control") return ComparisonLabel::kControl;
  if (name == "neither") return ComparisonLabel::kNeither;
  throw Error("unknown comparison label '" + std::string(name) + "'");
}

ComparisonLabel diff_to_label(double diff, double epsilon) {
  if (diff > epsilon) return ComparisonLabel::kTest;
  if (diff < -epsilon) return ComparisonLabel::kControl;
  return ComparisonLabel::kNeither;
}

double label_score(ComparisonLabel label) {
  switch (label) {
    case ComparisonLabel::kTest:
      return 1.0;
    case ComparisonLabel::kControl:
      return -1.0;
    case ComparisonLabel::kNeither:
      return 0.0;
  }
  return 0.0;
}

double label_outcome(ComparisonLabel label) {
  switch (label) {
    case ComparisonLabel::kTest:
      return 1.0;
    case ComparisonLabel::kControl:
      return 0.0;
    case ComparisonLabel::kNeither:
      return 0.5;
  }
  return 0.5;
}

}  // namespace semleak
