#pragma once

/// @file explain.hpp
/// Local surrogate explanations: Gaussian perturbations around an instance,
/// proximity kernel in standardized space and a weighted ridge fit of the
/// model's probability for its predicted class.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "caponef/classify.hpp"
#include "caponef/dataset.hpp"
#include "caponef/error.hpp"
#include "caponef/io.hpp"
#include "caponef/random.hpp"

namespace caponef::explain {

inline constexpr std::size_t kMinPerturbations = 100;

/// Per-feature mean and population standard deviation of the training data.
struct TrainingStats {
  std::vector<double> mean;
  std::vector<double> std;

  static TrainingStats from(const LabeledFeatureSet& set) {
    if (set.empty()) fail(ErrorKind::kEmptyDataset, "training statistics");
    TrainingStats s{std::vector<double>(set.features()), std::vector<double>(set.features())};
    const double n = static_cast<double>(set.rows());
    for (std::size_t f = 0; f < set.features(); ++f) {
      double sum = 0.0;
      for (std::size_t i = 0; i < set.rows(); ++i) sum += set.at(i, f);
      s.mean[f] = sum / n;
      double ss = 0.0;
      for (std::size_t i = 0; i < set.rows(); ++i) ss += (set.at(i, f) - s.mean[f]) * (set.at(i, f) - s.mean[f]);
      s.std[f] = std::sqrt(ss / n);
    }
    return s;
  }

  std::size_t features() const noexcept { return mean.size(); }

  /// z-scores; a zero-std feature is only centred.
  std::vector<double> standardize(std::span<const double> x) const {
    std::vector<double> z(x.size());
    for (std::size_t f = 0; f < x.size(); ++f) z[f] = (x[f] - mean[f]) / (std[f] > 0.0 ? std[f] : 1.0);
    return z;
  }
};

struct ExplainConfig {
  std::size_t n_perturbations = 5000;
  std::optional<double> kernel_width;  // empty: 0.75 * sqrt(F)
  double ridge_lambda = 1e-3;
  std::uint64_t seed = 0;

  double width_for(std::size_t features) const {
    return kernel_width.value_or(0.75 * std::sqrt(static_cast<double>(features)));
  }

  void validate() const {
    if (n_perturbations < kMinPerturbations) {
      fail(ErrorKind::kInvalidArgument, "n_perturbations must be >= " + std::to_string(kMinPerturbations));
    }
    if (kernel_width && !(*kernel_width > 0.0)) fail(ErrorKind::kInvalidArgument, "kernel_width must be > 0");
    if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) {
      fail(ErrorKind::kInvalidArgument, "ridge_lambda must be finite and >= 0");
    }
  }
};

struct Explanation {
  std::vector<std::string> feature_names;
  std::vector<double> weights;
  double intercept = 0.0;
  double local_fidelity = 0.0;  // weighted R^2; 0 when the target does not vary
  int predicted_class = 0;
  std::size_t n_perturbations = 0;
  std::uint64_t seed = 0;
};

/// Sample 0 is the instance; the others add N(0, std_f^2) to each feature.
/// Features with zero training std are held fixed.
inline std::vector<std::vector<double>> perturb(std::span<const double> instance, const TrainingStats& stats,
                                                std::size_t n, std::uint64_t seed) {
  if (instance.size() != stats.features()) fail(ErrorKind::kInvalidArgument, "instance width");
  for (double v : instance) {
    if (!std::isfinite(v)) fail(ErrorKind::kNonFiniteInput, "instance");
  }
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  out.reserve(n);
  if (n > 0) out.emplace_back(instance.begin(), instance.end());
  for (std::size_t i = 1; i < n; ++i) {
    std::vector<double> x(instance.begin(), instance.end());
    for (std::size_t f = 0; f < x.size(); ++f) {
      const double g = standard_normal(rng);
      if (stats.std[f] > 0.0) x[f] += stats.std[f] * g;
    }
    out.push_back(std::move(x));
  }
  return out;
}

struct SurrogateFit {
  std::vector<double> weights;
  double intercept = 0.0;
  double fidelity = 0.0;
};

/// Weighted ridge regression of y on the rows of z; the intercept is not
/// penalized (the fit is done on weighted-mean-centred data).
inline SurrogateFit fit_local_surrogate(const std::vector<std::vector<double>>& z, std::span<const double> y,
                                        std::span<const double> w, double lambda) {
  const std::size_t n = z.size();
  if (n == 0 || y.size() != n || w.size() != n) fail(ErrorKind::kInvalidArgument, "surrogate inputs");
  const std::size_t f = z[0].size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
  Eigen::VectorXd yv(static_cast<Eigen::Index>(n));
  Eigen::VectorXd wv(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < f; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = z[i][j];
    yv(static_cast<Eigen::Index>(i)) = y[i];
    wv(static_cast<Eigen::Index>(i)) = w[i];
  }
  if (!x.allFinite() || !yv.allFinite() || !wv.allFinite() || (wv.array() < 0.0).any()) {
    fail(ErrorKind::kSingularFit, "non-finite surrogate inputs");
  }
  const double wsum = wv.sum();
  if (!(wsum > 0.0)) fail(ErrorKind::kSingularFit, "all kernel weights are zero");
  const Eigen::RowVectorXd x_mean = (wv.transpose() * x) / wsum;
  const double y_mean = wv.dot(yv) / wsum;
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = yv.array() - y_mean;
  Eigen::MatrixXd gram = xc.transpose() * wv.asDiagonal() * xc;
  gram.diagonal().array() += lambda;
  const Eigen::VectorXd rhs = xc.transpose() * (wv.asDiagonal() * yc);
  // Zero-variance columns make gram singular when lambda = 0; they carry no
  // signal, so a least-norm solve is used.
  const Eigen::VectorXd beta = gram.completeOrthogonalDecomposition().solve(rhs);
  if (!beta.allFinite()) fail(ErrorKind::kSingularFit, "ridge solve");

  SurrogateFit fit;
  fit.weights.assign(beta.data(), beta.data() + beta.size());
  fit.intercept = y_mean - x_mean.dot(beta);
  const Eigen::VectorXd resid = yc - xc * beta;
  const double ss_res = wv.dot(resid.cwiseProduct(resid));
  const double ss_tot = wv.dot(yc.cwiseProduct(yc));
  const bool constant_target = yv.minCoeff() == yv.maxCoeff();
  fit.fidelity = constant_target || !(ss_tot > 0.0) ? 0.0 : 1.0 - ss_res / ss_tot;
  return fit;
}

/// Explains `model`'s prediction at `instance`. Model needs predict_proba
/// (class probabilities in classes() order) and classes().
template <class Model>
Explanation explain_instance(const Model& model, std::span<const double> instance, const ExplainConfig& config,
                             const TrainingStats& stats, std::vector<std::string> feature_names = {}) {
  config.validate();
  if (feature_names.empty()) {
    for (std::size_t f = 0; f < stats.features(); ++f) feature_names.push_back("P" + std::to_string(f + 1));
  }
  if (feature_names.size() != stats.features()) fail(ErrorKind::kInvalidArgument, "feature names");
  const auto& classes = model.classes();
  const auto p0 = model.predict_proba(instance);
  const std::size_t target = classify::argmax(p0);

  const auto samples = perturb(instance, stats, config.n_perturbations, config.seed);
  const auto z0 = stats.standardize(instance);
  const double width = config.width_for(stats.features());
  std::vector<std::vector<double>> z;
  std::vector<double> y;
  std::vector<double> w;
  z.reserve(samples.size());
  for (const auto& s : samples) {
    y.push_back(model.predict_proba(s)[target]);
    auto zi = stats.standardize(s);
    double d2 = 0.0;
    for (std::size_t f = 0; f < zi.size(); ++f) d2 += (zi[f] - z0[f]) * (zi[f] - z0[f]);
    w.push_back(std::exp(-d2 / (width * width)));
    z.push_back(std::move(zi));
  }
  const auto fit = fit_local_surrogate(z, y, w, config.ridge_lambda);
  return {std::move(feature_names), fit.weights, fit.intercept, fit.fidelity, classes[target],
          config.n_perturbations, config.seed};
}

/// Adapter so a classify::TrainedModel can be explained.
struct TrainedModelRef {
  const classify::TrainedModel& model;
  std::vector<double> predict_proba(std::span<const double> x) const { return classify::predict_proba(model, x); }
  const std::vector<int>& classes() const { return classify::model_classes(model); }
};

/// `feature,weight` sorted by |weight| descending.
inline std::string format_explanation_csv(const Explanation& e) {
  std::vector<std::size_t> order(e.weights.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(e.weights[a]) > std::abs(e.weights[b]); });
  std::string out = "feature,weight\n";
  for (auto i : order) out += e.feature_names[i] + "," + io::format_double(e.weights[i]) + "\n";
  return out;
}

inline std::string format_explanation_summary(const Explanation& e) {
  return "predicted_class,local_fidelity,intercept,n_perturbations,seed\n" + std::to_string(e.predicted_class) + "," +
         io::format_double(e.local_fidelity) + "," + io::format_double(e.intercept) + "," +
         std::to_string(e.n_perturbations) + "," + std::to_string(e.seed) + "\n";
}

}  // namespace caponef::explain
