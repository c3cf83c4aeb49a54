#include "caponef/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "gtest/gtest.h"

namespace caponef::explain {
namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected caponef::Error";
  return ErrorKind::kIoError;
}

TrainingStats unit_stats(std::size_t f = 10) {
  return {std::vector<double>(f, 0.0), std::vector<double>(f, 1.0)};
}

// Synthetic models over standardized inputs.
struct ConstantModel {
  std::vector<int> labels{0, 1};
  const std::vector<int>& classes() const { return labels; }
  std::vector<double> predict_proba(std::span<const double>) const { return {0.3, 0.7}; }
};

struct LinearModel {
  const TrainingStats* stats;
  std::size_t feature;
  std::vector<int> labels{4};
  const std::vector<int>& classes() const { return labels; }
  std::vector<double> predict_proba(std::span<const double> x) const {
    return {(x[feature] - stats->mean[feature]) / stats->std[feature]};
  }
};

// Probability of class 1 depends on features 0 and 1 only.
struct TwoFeatureModel {
  std::vector<int> labels{0, 1};
  const std::vector<int>& classes() const { return labels; }
  std::vector<double> predict_proba(std::span<const double> x) const {
    const double p = 1.0 / (1.0 + std::exp(-(1.5 * x[0] - 2.0 * x[1] + 0.3 * x[0] * x[0])));
    return {1.0 - p, p};
  }
};

// Ridge oracle: normal equations with an explicit intercept column that is
// not penalized, solved by Gaussian elimination in long double.
std::vector<long double> oracle_ridge(const std::vector<std::vector<double>>& z, const std::vector<double>& y,
                                      const std::vector<double>& w, double lambda) {
  const std::size_t f = z[0].size() + 1;
  std::vector<std::vector<long double>> a(f, std::vector<long double>(f + 1, 0.0L));
  for (std::size_t i = 0; i < z.size(); ++i) {
    std::vector<long double> row(z[i].begin(), z[i].end());
    row.push_back(1.0L);
    for (std::size_t r = 0; r < f; ++r) {
      for (std::size_t c = 0; c < f; ++c) a[r][c] += w[i] * row[r] * row[c];
      a[r][f] += w[i] * row[r] * y[i];
    }
  }
  for (std::size_t r = 0; r + 1 < f; ++r) a[r][r] += lambda;
  for (std::size_t c = 0; c < f; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < f; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < f; ++r) {
      if (r == c) continue;
      const long double m = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= f; ++k) a[r][k] -= m * a[c][k];
    }
  }
  std::vector<long double> beta(f);
  for (std::size_t r = 0; r < f; ++r) beta[r] = a[r][f] / a[r][r];
  return beta;  // slopes..., intercept
}

TEST(Perturb, FirstSampleIsTheInstance) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto one = perturb(x, unit_stats(), 1, 3);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], x);
  EXPECT_EQ(perturb(x, unit_stats(), 50, 3)[0], x);
}

TEST(Perturb, SpreadMatchesTrainingStd) {
  TrainingStats stats = unit_stats();
  for (std::size_t f = 0; f < 10; ++f) stats.std[f] = std::pow(10.0, static_cast<double>(f) - 5.0);
  const std::vector<double> x(10, 2.0);
  const auto s = perturb(x, stats, 5000, 9);
  for (std::size_t f = 0; f < 10; ++f) {
    double mean = 0.0;
    for (const auto& v : s) mean += v[f] / s.size();
    double ss = 0.0;
    for (const auto& v : s) ss += (v[f] - mean) * (v[f] - mean);
    const double sd = std::sqrt(ss / (s.size() - 1));
    EXPECT_NEAR(sd / stats.std[f], 1.0, 0.05) << "feature " << f;
    EXPECT_NEAR(mean, 2.0, 4 * stats.std[f] / std::sqrt(5000.0));
  }
}

TEST(Perturb, DeterministicAndFixedForZeroStd) {
  TrainingStats stats = unit_stats();
  stats.std[4] = 0.0;
  const std::vector<double> x(10, 1.0);
  const auto a = perturb(x, stats, 200, 42);
  EXPECT_EQ(a, perturb(x, stats, 200, 42));
  EXPECT_NE(a, perturb(x, stats, 200, 43));
  for (const auto& v : a) EXPECT_EQ(v[4], 1.0);
}

TEST(Explain, ConstantModelHasZeroWeights) {
  const auto stats = unit_stats();
  const auto e = explain_instance(ConstantModel{}, std::vector<double>(10, 0.5), {}, stats);
  EXPECT_EQ(e.predicted_class, 1);
  for (double w : e.weights) EXPECT_NEAR(w, 0.0, 1e-9);
  EXPECT_EQ(e.local_fidelity, 0.0);
  EXPECT_NEAR(e.intercept, 0.7, 1e-12);
}

TEST(Explain, LinearModelIsRecovered) {
  TrainingStats stats = unit_stats();
  for (std::size_t f = 0; f < 10; ++f) {
    stats.mean[f] = static_cast<double>(f);
    stats.std[f] = 0.5 + static_cast<double>(f);
  }
  const LinearModel model{&stats, 2};
  std::vector<double> x(10);
  for (std::size_t f = 0; f < 10; ++f) x[f] = stats.mean[f] + 0.3 * stats.std[f];
  const auto e = explain_instance(model, x, {}, stats);
  EXPECT_EQ(e.predicted_class, 4);
  EXPECT_NEAR(e.weights[2], 1.0, 1e-3);
  for (std::size_t f = 0; f < 10; ++f) {
    if (f != 2) {
      EXPECT_LT(std::abs(e.weights[f]), 0.05 * std::abs(e.weights[2]));
    }
  }
  EXPECT_GE(e.local_fidelity, 0.99);
}

TEST(Explain, IgnoredFeatureGetsNegligibleWeight) {
  const auto stats = unit_stats();
  double ratio = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ExplainConfig cfg;
    cfg.seed = seed;
    const auto e = explain_instance(TwoFeatureModel{}, std::vector<double>{0.2, -0.1, 0, 0, 0, 0.5, 0, 0, 0, 0},
                                    cfg, stats);
    double max_w = 0.0;
    for (double w : e.weights) max_w = std::max(max_w, std::abs(w));
    ratio += std::abs(e.weights[5]) / max_w / 10.0;
  }
  EXPECT_LT(ratio, 0.02);
}

TEST(Explain, SignsPointTowardPredictedClass) {
  const auto stats = unit_stats();
  // Class 1 predicted: raising x0 raises its probability, raising x1 lowers it.
  const auto e = explain_instance(TwoFeatureModel{}, std::vector<double>{1, -1, 0, 0, 0, 0, 0, 0, 0, 0}, {}, stats);
  EXPECT_EQ(e.predicted_class, 1);
  EXPECT_GT(e.weights[0], 0.0);
  EXPECT_LT(e.weights[1], 0.0);
  // Class 0 predicted: signs flip.
  const auto f = explain_instance(TwoFeatureModel{}, std::vector<double>{-1, 1, 0, 0, 0, 0, 0, 0, 0, 0}, {}, stats);
  EXPECT_EQ(f.predicted_class, 0);
  EXPECT_LT(f.weights[0], 0.0);
  EXPECT_GT(f.weights[1], 0.0);
}

TEST(Explain, DeterministicPerSeed) {
  const auto stats = unit_stats();
  const std::vector<double> x{0.2, -0.1, 0, 0, 0, 0.5, 0, 0, 0, 0};
  ExplainConfig cfg;
  cfg.seed = 5;
  const auto a = explain_instance(TwoFeatureModel{}, x, cfg, stats);
  const auto b = explain_instance(TwoFeatureModel{}, x, cfg, stats);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(format_explanation_csv(a), format_explanation_csv(b));
  EXPECT_EQ(a.seed, 5u);
}

TEST(Surrogate, MatchesNormalEquationOracle) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const std::size_t f = 1 + rng() % 6;
    const std::size_t n = f + 5 + rng() % 60;
    std::vector<std::vector<double>> z(n, std::vector<double>(f));
    std::vector<double> y(n);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : z[i]) v = g(rng);
      y[i] = g(rng);
      w[i] = u(rng);
    }
    const double lambda = std::pow(10.0, -3.0 + 4.0 * u(rng));
    const auto fit = fit_local_surrogate(z, y, w, lambda);
    const auto oracle = oracle_ridge(z, y, w, lambda);
    for (std::size_t j = 0; j < f; ++j) EXPECT_NEAR(fit.weights[j], static_cast<double>(oracle[j]), 1e-9);
    EXPECT_NEAR(fit.intercept, static_cast<double>(oracle[f]), 1e-9);
    EXPECT_LE(fit.fidelity, 1.0);
  }
}

TEST(Surrogate, InvariantToSampleOrder) {
  std::mt19937_64 rng(32);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 100 + rng() % 200;
    std::vector<std::vector<double>> z(n, std::vector<double>(10));
    std::vector<double> y(n);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : z[i]) v = g(rng);
      y[i] = z[i][3] - 0.5 * z[i][7] + 0.1 * g(rng);
      w[i] = std::exp(-g(rng) * g(rng));
    }
    const auto base = fit_local_surrogate(z, y, w, 1e-3);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<double>> zp;
    std::vector<double> yp;
    std::vector<double> wp;
    for (auto i : perm) {
      zp.push_back(z[i]);
      yp.push_back(y[i]);
      wp.push_back(w[i]);
    }
    const auto shuffled = fit_local_surrogate(zp, yp, wp, 1e-3);
    for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(shuffled.weights[j], base.weights[j], 1e-9);
  }
}

TEST(Surrogate, RidgeShrinksMonotonically) {
  const auto stats = unit_stats();
  const std::vector<double> x{0.2, -0.1, 0, 0, 0, 0.5, 0, 0, 0, 0};
  double previous = INFINITY;
  double first = 0.0;
  for (int k = 0; k <= 6; ++k) {
    ExplainConfig cfg;
    cfg.ridge_lambda = 1e-3 * std::pow(10.0, k);
    const auto e = explain_instance(TwoFeatureModel{}, x, cfg, stats);
    double norm = 0.0;
    for (double w : e.weights) norm += w * w;
    EXPECT_LE(std::sqrt(norm), previous * (1 + 1e-12));
    previous = std::sqrt(norm);
    if (k == 0) first = previous;
  }
  EXPECT_LT(previous, 0.5 * first);
}

TEST(Explain, ConfigAndInputErrors) {
  const auto stats = unit_stats();
  const std::vector<double> x(10, 0.0);
  EXPECT_EQ(kind_of([&] { explain_instance(ConstantModel{}, x, {.n_perturbations = 99}, stats); }),
            ErrorKind::kInvalidArgument);
  EXPECT_EQ(kind_of([&] { explain_instance(ConstantModel{}, x, {.kernel_width = 0.0}, stats); }),
            ErrorKind::kInvalidArgument);
  std::vector<std::vector<double>> z{{1.0}, {std::nan("")}};
  EXPECT_EQ(kind_of([&] { fit_local_surrogate(z, std::vector<double>{1, 2}, std::vector<double>{1, 1}, 0.1); }),
            ErrorKind::kSingularFit);
}

TEST(Explain, WorksOnTrainedForestAndFormats) {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> g(0.0, 1.0);
  LabeledFeatureSet set;
  std::vector<double> row(10);
  for (int i = 0; i < 200; ++i) {
    const int label = i % 2;
    for (std::size_t f = 0; f < 10; ++f) row[f] = g(rng) + (f == 1 ? 3.0 * label : 0.0);
    set.add_row(label, row);
  }
  const classify::TrainedModel model = classify::train_forest(set, {.n_trees = 20}, 1);
  const auto stats = TrainingStats::from(set);
  const auto e = explain_instance(TrainedModelRef{model}, set.row(1), {}, stats, set.feature_names());
  EXPECT_EQ(e.predicted_class, 1);
  const auto csv = format_explanation_csv(e);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "feature,weight");
  // The informative feature leads the ranking.
  EXPECT_EQ(csv.substr(csv.find('\n') + 1, 3), "P2,");
  const auto summary = format_explanation_summary(e);
  EXPECT_EQ(summary.substr(0, summary.find('\n')), "predicted_class,local_fidelity,intercept,n_perturbations,seed");
}

}  // namespace
}  // namespace caponef::explain
