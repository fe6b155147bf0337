#pragma once

#include <span>
#include <string_view>

namespace semleak {

struct TTestResult {
  double t_statistic = 0.0;
  int degrees_of_freedom = 0;
  // Upper-tail probability (alternative: mean greater).
  double p_value = 1.0;
};

// P(T > t) for Student's t with `df` degrees of freedom.
double student_t_upper_tail(double t, double df);

// Throws Error for n < 2 and DegenerateError for zero variance.
TTestResult t_test_one_sample_greater(std::span<const double> values, double mu0);

// One-sample test on a_i - b_i against 0.
TTestResult t_test_paired_greater(std::span<const double> a, std::span<const double> b);

// Tau-b in O(n log n). Throws DegenerateError when either side is all ties.
double kendall_tau(std::span<const double> x, std::span<const double> y);

enum class ComparisonLabel { kTest, kControl, kNeither };

std::string_view to_string(ComparisonLabel label);
ComparisonLabel parse_comparison_label(std::string_view name);

// test above +epsilon, control below -epsilon, neither in between.
ComparisonLabel diff_to_label(double diff, double epsilon);

// Ordinal encoding used for tau: control = -1, neither = 0, test = +1.
double label_score(ComparisonLabel label);

// Outcome value used by the leak metric: test = 1, control = 0, neither = 0.5.
double label_outcome(ComparisonLabel label);

inline constexpr double kDefaultEpsilonSlack = 0.03;

}  // namespace semleak
