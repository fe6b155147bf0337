#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "semleak/errors.hpp"
#include "semleak/stats.hpp"

using namespace semleak;

namespace {

double brute_tau(const std::vector<double>& x, const std::vector<double>& y) {
  long long conc = 0, disc = 0, tx = 0, ty = 0;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        ++tx;
      } else if (dy == 0) {
        ++ty;
      } else if ((dx > 0) == (dy > 0)) {
        ++conc;
      } else {
        ++disc;
      }
    }
  }
  return (conc - disc) / std::sqrt(double(conc + disc + tx) * double(conc + disc + ty));
}

}  // namespace

TEST(TDistribution, ClosedForms) {
  for (double t : {-3.0, -0.5, 0.0, 0.7, 2.0, 10.0}) {
    EXPECT_NEAR(student_t_upper_tail(t, 1), 0.5 - std::atan(t) / M_PI, 1e-12);
    EXPECT_NEAR(student_t_upper_tail(t, 2), 0.5 - t / (2 * std::sqrt(t * t + 2)), 1e-12);
    EXPECT_NEAR(student_t_upper_tail(t, 1e4), 0.5 * std::erfc(t / std::sqrt(2.0)), 1e-3);
  }
}

TEST(OneSample, Fixture) {
  const std::vector<double> v{60, 70, 80};
  const auto r = t_test_one_sample_greater(v, 50);
  EXPECT_NEAR(r.t_statistic, 3.4641, 1e-3);
  EXPECT_EQ(r.degrees_of_freedom, 2);
  const double t = r.t_statistic;
  EXPECT_NEAR(r.p_value, 0.5 - t / (2 * std::sqrt(t * t + 2)), 1e-12);
  EXPECT_NEAR(r.p_value, 0.0371, 1e-3);
}

TEST(OneSample, EdgeCases) {
  const std::vector<double> flat{50, 50, 50};
  EXPECT_THROW(t_test_one_sample_greater(flat, 50), DegenerateError);
  const std::vector<double> low{40, 45, 42};
  const auto r = t_test_one_sample_greater(low, 50);
  EXPECT_LT(r.t_statistic, 0);
  EXPECT_GT(r.p_value, 0.5);
  const std::vector<double> one{1};
  EXPECT_THROW(t_test_one_sample_greater(one, 0), Error);
}

TEST(Paired, ReducesToOneSample) {
  const std::vector<double> a{60, 70, 80}, b{50, 60, 70};
  EXPECT_THROW(t_test_paired_greater(a, b), DegenerateError);
  EXPECT_THROW(t_test_paired_greater(a, a), DegenerateError);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> jitter(0, 0.5);
  std::vector<double> x(8), y(8), d(8);
  for (int i = 0; i < 8; ++i) {
    y[i] = 50 + 5 * i;
    x[i] = y[i] + 10 + jitter(rng);
    d[i] = x[i] - y[i];
  }
  const auto paired = t_test_paired_greater(x, y);
  const auto direct = t_test_one_sample_greater(d, 0);
  EXPECT_DOUBLE_EQ(paired.t_statistic, direct.t_statistic);
  EXPECT_LT(paired.p_value, 0.05);
  const std::vector<double> short_b{1, 2};
  EXPECT_THROW(t_test_paired_greater(x, short_b), Error);
}

TEST(Kendall, Extremes) {
  const std::vector<double> x{3, 1, 4, 1.5, 9, 2.6};
  std::vector<double> rev(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) rev[i] = -x[i];
  EXPECT_EQ(kendall_tau(x, x), 1.0);
  EXPECT_EQ(kendall_tau(x, rev), -1.0);
  const std::vector<double> flat{1, 1, 1, 1, 1, 1};
  EXPECT_THROW(kendall_tau(x, flat), DegenerateError);
}

TEST(Kendall, MatchesBruteForceWithTies) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng() % 5);
      y[i] = static_cast<double>(rng() % 4) - 1;
    }
    double expected;
    try {
      expected = brute_tau(x, y);
    } catch (...) {
      continue;
    }
    if (!std::isfinite(expected)) {
      EXPECT_THROW(kendall_tau(x, y), DegenerateError);
      continue;
    }
    EXPECT_NEAR(kendall_tau(x, y), expected, 1e-12);
    EXPECT_NEAR(kendall_tau(x, y), kendall_tau(y, x), 1e-12);
  }
}

TEST(Labels, SlackAndEncodings) {
  EXPECT_EQ(diff_to_label(0.05, 0.03), ComparisonLabel::kTest);
  EXPECT_EQ(diff_to_label(-0.05, 0.03), ComparisonLabel::kControl);
  EXPECT_EQ(diff_to_label(0.01, 0.03), ComparisonLabel::kNeither);
  EXPECT_EQ(label_score(ComparisonLabel::kControl), -1.0);
  EXPECT_EQ(label_score(ComparisonLabel::kNeither), 0.0);
  EXPECT_EQ(label_score(ComparisonLabel::kTest), 1.0);
  EXPECT_EQ(label_outcome(ComparisonLabel::kNeither), 0.5);
  EXPECT_EQ(parse_comparison_label("control"), ComparisonLabel::kControl);
}
