#include "caponef/tls_features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "support/feature_oracle.hpp"
#include "support/random_sequences.hpp"

namespace caponef {
namespace {

using ::caponef::testing::circular_distance;

constexpr double kPi = std::numbers::pi;

TrendlessSequence seq(std::vector<double> v) { return TrendlessSequence(std::move(v)); }

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected caponef::Error";
  return ErrorKind::kIoError;
}

std::vector<double> sinusoid(double omega, double delta, std::size_t n) {
  std::vector<double> y(n);
  for (std::size_t j = 0; j < n; ++j) {
    y[j] = std::sin(omega * (static_cast<double>(j) + delta));
  }
  return y;
}

TEST(TrendlessSequence, RejectsNonFiniteAndEmpty) {
  EXPECT_EQ(kind_of([] { seq({1.0, std::nan("")}); }), ErrorKind::kNonFiniteInput);
  EXPECT_EQ(kind_of([] { seq({std::numeric_limits<double>::infinity()}); }),
            ErrorKind::kNonFiniteInput);
  EXPECT_EQ(kind_of([] { seq({}); }), ErrorKind::kEmptyInput);
}

TEST(Center, Examples) {
  EXPECT_EQ(center(seq({1, 3, 2, 0})), seq({-0.5, 1.5, 0.5, -1.5}));
  EXPECT_EQ(center(seq({5, 5, 5, 5})), seq({0, 0, 0, 0}));
  EXPECT_EQ(center(seq({0, 0, 0, 1})), seq({-0.25, -0.25, -0.25, 0.75}));
  // Constant sequences that do not sum exactly still centre to zeros.
  EXPECT_EQ(center(seq({0.1, 0.1, 0.1})), seq({0, 0, 0}));
}

TEST(Center, MeanIsZero) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    const auto y = testing::random_sequence(rng);
    const auto dy = center(seq(y));
    double sum = 0.0;
    double max_abs = 0.0;
    for (double v : dy.samples()) sum += v;
    for (double v : y) max_abs = std::max(max_abs, std::abs(v));
    EXPECT_LE(std::abs(sum / static_cast<double>(y.size())), 1e-12 * max_abs);
  }
}

TEST(Parameters, P1Examples) {
  EXPECT_DOUBLE_EQ(p1_mean(seq({1, 3, 2, 0})), 1.5);
  EXPECT_EQ(p1_mean(seq({0, 0, 0})), 0.0);
  EXPECT_EQ(p1_mean(seq({-2, 2})), 0.0);
}

TEST(Parameters, P2Examples) {
  EXPECT_DOUBLE_EQ(p2_range(seq({1, 3, 2, 0})), 3.0);
  EXPECT_EQ(p2_range(seq({0.7, 0.7, 0.7})), 0.0);
  EXPECT_DOUBLE_EQ(p2_range(seq({-1, 1, -1, 1})), 2.0);
  EXPECT_EQ(kind_of([] { p2_range(seq({1.0})); }), ErrorKind::kInsufficientSamples);
}

TEST(Parameters, P3Examples) {
  EXPECT_DOUBLE_EQ(p3_relative_intensity(seq({1, 3, 2, 0})), 0.0);
  EXPECT_DOUBLE_EQ(p3_relative_intensity(seq({0, 4, 1, 1})), 1.0);
  const std::vector<double> y = {0.3, -1.2, 2.5, 0.1, -0.4};
  std::vector<double> neg(y.size());
  std::transform(y.begin(), y.end(), neg.begin(), [](double v) { return -v; });
  EXPECT_DOUBLE_EQ(p3_relative_intensity(seq(neg)), -p3_relative_intensity(seq(y)));
  EXPECT_EQ(kind_of([] { p3_relative_intensity(seq({2, 2, 2})); }),
            ErrorKind::kOneSidedSequence);
}

TEST(Parameters, P4Examples) {
  EXPECT_DOUBLE_EQ(p4_cumulative_range(seq({1, 3, 2, 0})), 2.0);
  EXPECT_EQ(p4_cumulative_range(seq({4, 4, 4, 4})), 0.0);
  const std::vector<double> y = {0.3, -1.2, 2.5, 0.1, -0.4, 0.9};
  std::vector<double> scaled(y.size());
  std::transform(y.begin(), y.end(), scaled.begin(), [](double v) { return 3.5 * v; });
  EXPECT_NEAR(p4_cumulative_range(seq(scaled)), 3.5 * p4_cumulative_range(seq(y)), 1e-12);
}

TEST(Parameters, P5Examples) {
  EXPECT_DOUBLE_EQ(p5_asymmetry(seq({1, 3, 2, 0})), 1.0);
  EXPECT_DOUBLE_EQ(p5_asymmetry(seq({0, 0, 0, 4})), 3.0);
  const std::vector<double> y = {0.3, -1.2, 2.5, 0.1, -0.4, 0.9};
  std::vector<double> affine(y.size());
  std::transform(y.begin(), y.end(), affine.begin(), [](double v) { return 2.0 * v - 7.0; });
  EXPECT_NEAR(p5_asymmetry(seq(affine)), p5_asymmetry(seq(y)), 1e-12);
  EXPECT_EQ(kind_of([] { p5_asymmetry(seq({1, 1, 1})); }), ErrorKind::kDegenerateAsymmetry);
}

TEST(Parameters, P6Examples) {
  EXPECT_EQ(p6_horizontal_asymmetry(seq({1, 3, 2, 0})), -1.0);
  EXPECT_EQ(p6_horizontal_asymmetry(seq({0, 3, 1, 1})), -2.0);
  // Mirror: index i -> N + 1 - i with an index-symmetric sign pattern.
  const std::vector<double> y = {-1, 2, -3, 3, -2, 1};
  std::vector<double> rev(y.rbegin(), y.rend());
  EXPECT_EQ(p6_horizontal_asymmetry(seq(rev)), -p6_horizontal_asymmetry(seq(y)));
  EXPECT_EQ(kind_of([] { p6_horizontal_asymmetry(seq({3, 3})); }),
            ErrorKind::kOneSidedSequence);
}

TEST(Parameters, P7Examples) {
  EXPECT_DOUBLE_EQ(p7_bell_max(seq({1, 3, 2, 0})), 2.0);
  EXPECT_EQ(p7_bell_max(seq({-1, -1, -1})), 0.0);
  std::vector<double> y = {0.3, -1.2, 2.5, 0.1, -0.4, 0.9, 1.7};
  const double before = p7_bell_max(seq(y));
  std::mt19937_64 rng(3);
  std::shuffle(y.begin(), y.end(), rng);
  EXPECT_NEAR(p7_bell_max(seq(y)), before, 1e-12);
}

TEST(Parameters, P8Examples) {
  EXPECT_NEAR(p8_normalized_integral_range(seq({1, 3, 2, 0})), 2.0 / 3.0, 1e-15);
  const std::vector<double> y = {0.3, -1.2, 2.5, 0.1, -0.4, 0.9};
  std::vector<double> affine(y.size());
  std::transform(y.begin(), y.end(), affine.begin(), [](double v) { return 0.01 * v + 40.0; });
  EXPECT_NEAR(p8_normalized_integral_range(seq(affine)),
              p8_normalized_integral_range(seq(y)), 1e-10);
  EXPECT_EQ(kind_of([] { p8_normalized_integral_range(seq({2, 2, 2, 2})); }),
            ErrorKind::kDegenerateSequence);
}

TEST(Roots, Examples) {
  using V = std::vector<double>;
  EXPECT_EQ(find_roots_in_deviations(V{-1, 1}).roots, V({0.5}));
  EXPECT_EQ(find_roots_in_deviations(V{1, -1, 1}).roots, V({0.5, 1.5}));
  EXPECT_EQ(find_roots_in_deviations(V{2, 0, -2}).roots, V({1.0}));
  EXPECT_EQ(find_roots_in_deviations(V{2, 0, 0, 0, -2}).roots, V({1.0}));
  EXPECT_TRUE(find_roots_in_deviations(V{1, 2, 3}).roots.empty());
  // find_roots centres first: [1, -1, 1] has mean 1/3.
  const auto centred = find_roots(seq({1, -1, 1})).roots;
  ASSERT_EQ(centred.size(), 2u);
  EXPECT_NEAR(centred[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(centred[1], 5.0 / 3.0, 1e-15);
  // A constant sequence centres to one run of exact zeros.
  EXPECT_EQ(find_roots(seq({1, 1, 1})).roots, V({0.0}));
}

TEST(Roots, StrictlyIncreasingWithinBounds) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 30; ++t) {
    const auto y = testing::random_sequence(rng);
    const auto r = find_roots(seq(y)).roots;
    for (std::size_t i = 0; i < r.size(); ++i) {
      EXPECT_GE(r[i], 0.0);
      EXPECT_LE(r[i], static_cast<double>(y.size() - 1));
      if (i > 0) {
        EXPECT_LT(r[i - 1], r[i]);
      }
    }
  }
}

TEST(RootLine, Examples) {
  const auto exact = fit_root_line({{8, 16, 24}});
  EXPECT_NEAR(exact.slope, 8.0, 1e-12);
  EXPECT_NEAR(exact.intercept, 0.0, 1e-12);
  EXPECT_NEAR(exact.residual_rms, 0.0, 1e-12);
  const auto two = fit_root_line({{3, 5}});
  EXPECT_NEAR(two.slope, 2.0, 1e-12);
  EXPECT_NEAR(two.intercept, 1.0, 1e-12);
  // Sxy = 4.9, Sxx = 5 by hand.
  const auto noisy = fit_root_line({{1, 2.1, 2.9, 4.0}});
  EXPECT_NEAR(noisy.slope, 0.98, 1e-10);
  EXPECT_NEAR(noisy.intercept, 0.05, 1e-10);
  EXPECT_EQ(kind_of([] { fit_root_line({{1.0}}); }), ErrorKind::kInsufficientRoots);
}

TEST(FrequencyPhase, Examples) {
  const auto a = p9_p10_from_fit({8.0, 0.0, 0.0});
  EXPECT_NEAR(a.mean_frequency, kPi / 8.0, 1e-15);
  EXPECT_NEAR(a.phase, kPi / 2.0, 1e-15);
  const auto b = p9_p10_from_fit({kPi, kPi / 2.0, 0.0});
  EXPECT_NEAR(b.mean_frequency, 1.0, 1e-15);
  EXPECT_LT(circular_distance(b.phase, 0.0, kPi), 1e-15);
  EXPECT_EQ(kind_of([] { p9_p10_from_fit({0.0, 1.0, 0.0}); }), ErrorKind::kDegenerateFit);
  EXPECT_EQ(kind_of([] { p9_p10_from_fit({-2.0, 1.0, 0.0}); }), ErrorKind::kDegenerateFit);
}

TEST(ExtractFeatures, SinusoidExample) {
  std::vector<double> y(256);
  for (std::size_t j = 0; j < y.size(); ++j) {
    y[j] = std::sin(kPi * (static_cast<double>(j) + 0.5) / 8.0);
  }
  const auto f = extract_features(seq(y));
  double max_abs = 0.0;
  for (double v : y) max_abs = std::max(max_abs, std::abs(v));
  EXPECT_LT(std::abs(f[0]), 1e-12);
  EXPECT_NEAR(f[1], 2.0 * max_abs, 1e-12);
  EXPECT_NEAR(f[4], 1.0, 1e-9);
  EXPECT_NEAR(f[8], kPi / 8.0, 1e-6 * kPi / 8.0);
}

TEST(ExtractFeatures, Errors) {
  EXPECT_EQ(kind_of([] { extract_features(seq(std::vector<double>(16, 0.25))); }),
            ErrorKind::kDegenerateSequence);
  EXPECT_EQ(kind_of([] { extract_features(seq({1, -1, 1})); }),
            ErrorKind::kInsufficientSamples);
  // Single step: two-sided but only one crossing.
  EXPECT_EQ(kind_of([] { extract_features(seq({0, 0, 0, 0, 1, 1, 1, 1})); }),
            ErrorKind::kInsufficientRoots);
  try {
    extract_features(seq({0, 0, 0, 0, 1, 1, 1, 1}));
  } catch (const Error& e) {
    EXPECT_EQ(e.context(), "P9");
  }
}

TEST(ExtractFeatures, BitwiseDeterministic) {
  std::mt19937_64 rng(9);
  const auto y = testing::random_sequence(rng);
  const auto a = extract_features(seq(y));
  const auto b = extract_features(seq(y));
  EXPECT_EQ(std::memcmp(a.values.data(), b.values.data(), sizeof(double) * kFeatureCount), 0);
}

TEST(ExtractFeatures, InvariantsHoldOnRandomInput) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 100; ++t) {
    const auto y = testing::random_sequence(rng);
    const auto f = extract_features(seq(y));
    const double n = static_cast<double>(y.size());
    for (double v : f.values) EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(f[1], 0.0);
    EXPECT_GE(f[1], std::abs(f[2]));
    EXPECT_GT(f[4], 0.0);
    EXPECT_GE(f[7], 0.0);
    EXPECT_LE(f[7], n);
    EXPECT_GT(f[8], 0.0);
    EXPECT_GE(f[9], 0.0);
    EXPECT_LT(f[9], kPi);
  }
}

TEST(ExtractFeatures, MatchesBruteForceOracle) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 200; ++t) {
    const auto y = testing::random_sequence(rng);
    std::string worst;
    const double v = testing::oracle_violation(y, extract_features(seq(y)), 1e-9, &worst);
    EXPECT_LE(v, 1.0) << "case " << t << " worst " << worst;
  }
}

TEST(ExtractFeatures, P7IsSumOfPositiveDeviations) {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 50; ++t) {
    const auto y = testing::random_sequence(rng);
    const auto dy = center(seq(y));
    double positive = 0.0;
    for (double v : dy.samples()) positive += std::max(v, 0.0);
    EXPECT_NEAR(p7_bell_max(seq(y)), positive, 1e-10 * std::max(1.0, positive));
  }
}

TEST(ExtractFeatures, P8IsP4OverP2) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 50; ++t) {
    const auto f = extract_features(seq(testing::random_sequence(rng)));
    EXPECT_NEAR(f[7], f[3] / f[1], 1e-12 * f[7]);
  }
}

TEST(ExtractFeatures, AffineInvariance) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> c_dist(0.01, 100.0);
  std::uniform_real_distribution<double> d_dist(-50.0, 50.0);
  for (int t = 0; t < 50; ++t) {
    const auto y = testing::random_sequence(rng);
    const double c = c_dist(rng);
    const double d = d_dist(rng);
    std::vector<double> z(y.size());
    std::transform(y.begin(), y.end(), z.begin(), [&](double v) { return c * v + d; });
    const auto fy = extract_features(seq(y));
    const auto fz = extract_features(seq(z));
    EXPECT_NEAR(fz[4], fy[4], 1e-8 * fy[4]);
    EXPECT_NEAR(fz[7], fy[7], 1e-8 * fy[7]);
    EXPECT_NEAR(fz[8], fy[8], 1e-8 * fy[8]);
    EXPECT_LT(circular_distance(fz[9], fy[9], kPi), 1e-8);
    EXPECT_NEAR(fz[1], c * fy[1], 1e-9 * c * fy[1]);
  }
}

TEST(ExtractFeatures, PermutationSensitivity) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> noise;
  std::vector<double> y(512);
  for (double& v : y) v = noise(rng);
  std::vector<double> shuffled = y;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto a = extract_features(seq(y));
  const auto b = extract_features(seq(shuffled));
  for (std::size_t i : {0u, 1u, 2u, 4u, 6u}) EXPECT_NEAR(a[i], b[i], 1e-12 * std::max(1.0, std::abs(a[i])));
  // Order-dependent parameters move for this fixed pair.
  for (std::size_t i : {3u, 5u, 7u, 8u, 9u}) EXPECT_NE(a[i], b[i]) << kFeatureNames[i];
}

TEST(ExtractFeatures, MirrorAntisymmetryOfP3) {
  std::mt19937_64 rng(37);
  for (int t = 0; t < 50; ++t) {
    const auto y = testing::random_sequence(rng);
    const double mean = p1_mean(seq(y));
    std::vector<double> mirror(y.size());
    std::transform(y.begin(), y.end(), mirror.begin(), [&](double v) { return 2.0 * mean - v; });
    EXPECT_NEAR(p3_relative_intensity(seq(mirror)), -p3_relative_intensity(seq(y)),
                1e-9 * p2_range(seq(y)));
  }
}

TEST(ExtractFeatures, SinusoidFrequencyAndPhaseShift) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> omega_dist(0.01, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> shift_dist(1, 9);
  // The shift relation is exact only up to end effects that decay like 1/N.
  constexpr std::size_t kN = 1u << 20;
  for (int t = 0; t < 10; ++t) {
    const double omega = omega_dist(rng);
    const double delta = unit(rng) * 2.0 * kPi / omega;
    const auto y = sinusoid(omega, delta, kN);
    const auto fit = fit_root_line(find_roots(seq(y)));
    const auto base = p9_p10_from_fit(fit);
    EXPECT_LT(std::abs(base.mean_frequency - omega) / omega, 1e-3);
    const int s = shift_dist(rng);
    const auto shifted = p9_p10_from_fit(fit_root_line(
        find_roots(seq(std::vector<double>(y.begin() + s, y.end())))));
    const double expected = base.phase - omega * s;
    EXPECT_LT(circular_distance(shifted.phase, expected, kPi), 1e-6)
        << "omega " << omega << " s " << s;
  }
}

}  // namespace
}  // namespace caponef
