#pragma once

/// @file classify.hpp
/// CART decision tree, bagged random forest with impurity importances, kNN,
/// logistic regression and a majority baseline, plus stratified k-fold
/// evaluation and a random search over forest hyperparameters.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "caponef/dataset.hpp"
#include "caponef/error.hpp"
#include "caponef/random.hpp"
#include "caponef/stats.hpp"

namespace caponef::classify {

/// Index of the largest entry; the first one wins a tie.
inline std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline std::size_t class_position(std::span<const int> classes, int label) {
  const auto it = std::lower_bound(classes.begin(), classes.end(), label);
  if (it == classes.end() || *it != label) {
    fail(ErrorKind::kInvalidArgument, "unknown label " + std::to_string(label));
  }
  return static_cast<std::size_t>(it - classes.begin());
}

inline void require_rows(const LabeledFeatureSet& set) {
  if (set.empty()) fail(ErrorKind::kEmptyDataset, "training set has no rows");
}

inline void require_width(std::span<const double> x, std::size_t features) {
  if (x.size() != features) {
    fail(ErrorKind::kInvalidArgument,
         "query has " + std::to_string(x.size()) + " features, model expects " + std::to_string(features));
  }
}

// ---------------------------------------------------------------------------
// Decision tree

struct TreeParams {
  std::optional<std::size_t> max_depth;           // empty: unlimited, 0: a single leaf
  std::size_t min_samples_split = 2;
  std::optional<std::size_t> features_per_split;  // empty: every feature

  bool operator==(const TreeParams&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::vector<std::uint32_t> counts;  // per class, leaves only
  double sample_fraction = 1.0;
  double impurity_decrease = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(std::vector<int> classes, std::size_t features, std::vector<TreeNode> nodes)
      : classes_(std::move(classes)), features_(features), nodes_(std::move(nodes)) {}

  bool trained() const noexcept { return !nodes_.empty(); }
  const std::vector<int>& classes() const noexcept { return classes_; }
  std::size_t features() const noexcept { return features_; }
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

  const TreeNode& leaf_for(std::span<const double> x) const {
    if (!trained()) fail(ErrorKind::kUntrainedModel, "decision tree");
    require_width(x, features_);
    const TreeNode* node = &nodes_[0];
    while (!node->is_leaf()) {
      node = &nodes_[x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right];
    }
    return *node;
  }

  std::vector<double> predict_proba(std::span<const double> x) const {
    const TreeNode& leaf = leaf_for(x);
    double total = 0.0;
    for (auto c : leaf.counts) total += c;
    std::vector<double> p(classes_.size());
    for (std::size_t c = 0; c < p.size(); ++c) p[c] = leaf.counts[c] / total;
    return p;
  }

  int predict(std::span<const double> x) const { return classes_[argmax(predict_proba(x))]; }

  std::size_t split_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
  }

  bool operator==(const DecisionTree&) const = default;

 private:
  std::vector<int> classes_;
  std::size_t features_ = 0;
  std::vector<TreeNode> nodes_;
};

namespace detail {

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double score = -1.0;  // sum over children of (sum_c n_c^2) / n_child
};

// Exhaustive midpoint scan of one feature over rows[begin, end).
inline void scan_feature(const LabeledFeatureSet& set, std::span<const std::uint32_t> cls, std::size_t n_classes,
                         std::span<const std::uint32_t> rows, int feature,
                         std::vector<std::pair<double, std::uint32_t>>& work, SplitCandidate& best) {
  work.clear();
  for (auto r : rows) work.emplace_back(set.at(r, static_cast<std::size_t>(feature)), cls[r]);
  std::sort(work.begin(), work.end());
  if (work.front().first == work.back().first) return;
  std::vector<double> left(n_classes, 0.0);
  std::vector<double> right(n_classes, 0.0);
  for (const auto& w : work) right[w.second] += 1.0;
  double left_sq = 0.0;
  double right_sq = 0.0;
  for (double c : right) right_sq += c * c;
  const double n = static_cast<double>(work.size());
  for (std::size_t i = 0; i + 1 < work.size(); ++i) {
    const std::uint32_t c = work[i].second;
    left_sq += 2.0 * left[c] + 1.0;
    right_sq -= 2.0 * right[c] - 1.0;
    left[c] += 1.0;
    right[c] -= 1.0;
    const double a = work[i].first;
    const double b = work[i + 1].first;
    if (!(a < b)) continue;
    const double n_left = static_cast<double>(i + 1);
    const double score = left_sq / n_left + right_sq / (n - n_left);
    if (score > best.score) {
      double mid = std::midpoint(a, b);
      if (!(mid < b)) mid = a;
      best = {feature, mid, score};
    }
  }
}

/// Grows a CART tree over `sample` (row indices, repeats allowed). `cls`
/// maps each row of `set` to its class position.
inline std::vector<TreeNode> grow_tree(const LabeledFeatureSet& set, std::span<const std::uint32_t> cls,
                                       std::size_t n_classes, std::vector<std::uint32_t> sample,
                                       const TreeParams& params, Rng& rng) {
  const std::size_t n_features = set.features();
  const std::size_t per_split = std::clamp<std::size_t>(params.features_per_split.value_or(n_features), 1, n_features);
  const double n_root = static_cast<double>(sample.size());

  struct Pending {
    std::size_t begin, end, node, depth;
  };
  std::vector<TreeNode> nodes(1);
  std::vector<Pending> stack{{0, sample.size(), 0, 0}};
  std::vector<std::pair<double, std::uint32_t>> work;
  std::vector<int> order(n_features);

  while (!stack.empty()) {
    const Pending p = stack.back();
    stack.pop_back();
    const std::span<std::uint32_t> rows(sample.data() + p.begin, p.end - p.begin);
    std::vector<std::uint32_t> counts(n_classes, 0);
    for (auto r : rows) ++counts[cls[r]];
    double parent_sq = 0.0;
    std::size_t present = 0;
    for (auto c : counts) {
      parent_sq += static_cast<double>(c) * c;
      present += c > 0 ? 1 : 0;
    }
    const double n = static_cast<double>(rows.size());
    nodes[p.node].sample_fraction = n / n_root;

    SplitCandidate best;
    const bool may_split = present > 1 && rows.size() >= std::max<std::size_t>(params.min_samples_split, 2) &&
                           (!params.max_depth || p.depth < *params.max_depth);
    if (may_split) {
      std::iota(order.begin(), order.end(), 0);
      if (per_split < n_features) shuffle(std::span<int>(order), rng);
      std::vector<int> drawn(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(per_split));
      std::sort(drawn.begin(), drawn.end());
      for (int f : drawn) scan_feature(set, cls, n_classes, rows, f, work, best);
      // All drawn features constant here: keep drawing until one can split.
      for (std::size_t k = per_split; best.feature < 0 && k < n_features; ++k) {
        scan_feature(set, cls, n_classes, rows, order[k], work, best);
      }
    }

    if (best.feature < 0) {
      nodes[p.node].counts = std::move(counts);
      continue;
    }
    const auto f = static_cast<std::size_t>(best.feature);
    const auto mid = std::stable_partition(rows.begin(), rows.end(),
                                           [&](std::uint32_t r) { return set.at(r, f) <= best.threshold; });
    const std::size_t split_at = p.begin + static_cast<std::size_t>(mid - rows.begin());
    const auto left = static_cast<std::uint32_t>(nodes.size());
    nodes.resize(nodes.size() + 2);
    TreeNode& node = nodes[p.node];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = left + 1;
    // Gini(parent) - weighted Gini(children) = score/n - sum c^2/n^2
    node.impurity_decrease = std::max(0.0, best.score / n - parent_sq / (n * n));
    stack.push_back({split_at, p.end, left + 1, p.depth + 1});
    stack.push_back({p.begin, split_at, left, p.depth + 1});
  }
  return nodes;
}

inline std::vector<std::uint32_t> class_positions(const LabeledFeatureSet& set, std::span<const int> classes) {
  std::vector<std::uint32_t> cls(set.rows());
  for (std::size_t i = 0; i < set.rows(); ++i) cls[i] = static_cast<std::uint32_t>(class_position(classes, set.label(i)));
  return cls;
}

inline std::vector<std::uint32_t> all_rows(std::size_t n) {
  std::vector<std::uint32_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0u);
  return rows;
}

}  // namespace detail

inline DecisionTree train_tree(const LabeledFeatureSet& set, const TreeParams& params = {}, std::uint64_t seed = 0) {
  require_rows(set);
  Rng rng(seed);
  auto classes = set.classes();
  const auto cls = detail::class_positions(set, classes);
  auto nodes = detail::grow_tree(set, cls, classes.size(), detail::all_rows(set.rows()), params, rng);
  return DecisionTree(std::move(classes), set.features(), std::move(nodes));
}

// ---------------------------------------------------------------------------
// Random forest

struct ForestParams {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;
  std::size_t min_samples_split = 2;
  std::optional<std::size_t> features_per_split;  // empty: ceil(sqrt(F))
  bool bootstrap = true;

  TreeParams tree_params(std::size_t n_features) const {
    const auto auto_count = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_features))));
    return {max_depth, min_samples_split, features_per_split.value_or(auto_count)};
  }
  bool operator==(const ForestParams&) const = default;
};

class RandomForestModel {
 public:
  RandomForestModel() = default;
  RandomForestModel(ForestParams params, std::uint64_t seed, std::vector<std::string> feature_names,
                    std::vector<int> classes, std::vector<DecisionTree> trees)
      : params_(params), seed_(seed), names_(std::move(feature_names)), classes_(std::move(classes)),
        trees_(std::move(trees)) {
    importances_ = compute_importances();
  }

  bool trained() const noexcept { return !trees_.empty(); }
  const ForestParams& params() const noexcept { return params_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<std::string>& feature_names() const noexcept { return names_; }
  std::size_t features() const noexcept { return names_.size(); }
  const std::vector<int>& classes() const noexcept { return classes_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

  /// Mean of the trees' leaf class frequencies.
  std::vector<double> predict_proba(std::span<const double> x) const {
    if (!trained()) fail(ErrorKind::kUntrainedModel, "random forest");
    std::vector<double> p(classes_.size(), 0.0);
    for (const auto& t : trees_) {
      const auto q = t.predict_proba(x);
      for (std::size_t c = 0; c < p.size(); ++c) p[c] += q[c];
    }
    for (double& v : p) v /= static_cast<double>(trees_.size());
    return p;
  }

  int predict(std::span<const double> x) const { return classes_[argmax(predict_proba(x))]; }

  /// Node-fraction weighted impurity decrease per feature, averaged over the
  /// trees and normalized to sum 1.
  const std::vector<double>& feature_importances() const {
    if (!trained()) fail(ErrorKind::kUntrainedModel, "random forest");
    if (!importances_) fail(ErrorKind::kNoSplits, "no tree in the forest has an informative split");
    return *importances_;
  }

  bool operator==(const RandomForestModel&) const = default;

 private:
  std::optional<std::vector<double>> compute_importances() const {
    if (trees_.empty()) return std::nullopt;
    std::vector<double> imp(names_.size(), 0.0);
    for (const auto& t : trees_) {
      for (const auto& n : t.nodes()) {
        if (!n.is_leaf()) imp[static_cast<std::size_t>(n.feature)] += n.sample_fraction * n.impurity_decrease;
      }
    }
    double total = 0.0;
    for (double& v : imp) {
      v /= static_cast<double>(trees_.size());
      total += v;
    }
    if (!(total > 0.0)) return std::nullopt;
    for (double& v : imp) v /= total;
    return imp;
  }

  ForestParams params_;
  std::uint64_t seed_ = 0;
  std::vector<std::string> names_;
  std::vector<int> classes_;
  std::vector<DecisionTree> trees_;
  std::optional<std::vector<double>> importances_;
};

/// Tree i draws its bootstrap sample and feature subsets from
/// mt19937_64(derive_seed(seed, i)).
inline RandomForestModel train_forest(const LabeledFeatureSet& set, const ForestParams& params = {},
                                      std::uint64_t seed = 0) {
  require_rows(set);
  if (params.n_trees == 0) fail(ErrorKind::kInvalidArgument, "n_trees must be >= 1");
  auto classes = set.classes();
  const auto cls = detail::class_positions(set, classes);
  const TreeParams tree_params = params.tree_params(set.features());
  const std::size_t n = set.rows();
  std::vector<DecisionTree> trees;
  trees.reserve(params.n_trees);
  for (std::size_t i = 0; i < params.n_trees; ++i) {
    Rng rng(derive_seed(seed, i));
    std::vector<std::uint32_t> sample;
    if (params.bootstrap) {
      sample.resize(n);
      for (auto& r : sample) r = static_cast<std::uint32_t>(uniform_index(rng, n));
    } else {
      sample = detail::all_rows(n);
    }
    trees.emplace_back(classes, set.features(),
                       detail::grow_tree(set, cls, classes.size(), std::move(sample), tree_params, rng));
  }
  return RandomForestModel(params, seed, set.feature_names(), std::move(classes), std::move(trees));
}

// ---------------------------------------------------------------------------
// Standardized-feature models

/// Per-feature mean and population standard deviation of a training set.
/// Constant features get scale 1 so they standardize to 0.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const LabeledFeatureSet& set) {
    require_rows(set);
    Standardizer s{std::vector<double>(set.features(), 0.0), std::vector<double>(set.features(), 0.0)};
    const double n = static_cast<double>(set.rows());
    for (std::size_t f = 0; f < set.features(); ++f) {
      double sum = 0.0;
      for (std::size_t i = 0; i < set.rows(); ++i) sum += set.at(i, f);
      const double m = sum / n;
      double ss = 0.0;
      for (std::size_t i = 0; i < set.rows(); ++i) ss += (set.at(i, f) - m) * (set.at(i, f) - m);
      const double sd = std::sqrt(ss / n);
      s.mean[f] = m;
      s.scale[f] = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  std::vector<double> apply(std::span<const double> x) const {
    require_width(x, mean.size());
    std::vector<double> z(x.size());
    for (std::size_t f = 0; f < x.size(); ++f) z[f] = (x[f] - mean[f]) / scale[f];
    return z;
  }

  bool operator==(const Standardizer&) const = default;
};

class KnnModel {
 public:
  KnnModel() = default;

  static KnnModel fit(const LabeledFeatureSet& set, std::size_t k) {
    require_rows(set);
    if (k == 0 || k > set.rows()) {
      fail(ErrorKind::kInvalidArgument, "k = " + std::to_string(k) + " outside [1, " + std::to_string(set.rows()) + "]");
    }
    KnnModel m;
    m.k_ = k;
    m.scaler_ = Standardizer::fit(set);
    m.classes_ = set.classes();
    m.features_ = set.features();
    for (std::size_t i = 0; i < set.rows(); ++i) {
      const auto z = m.scaler_.apply(set.row(i));
      m.points_.insert(m.points_.end(), z.begin(), z.end());
      m.cls_.push_back(class_position(m.classes_, set.label(i)));
    }
    return m;
  }

  const std::vector<int>& classes() const noexcept { return classes_; }

  /// Vote shares of the k nearest training points (Euclidean on z-scores);
  /// equal distances are ordered by training row.
  std::vector<double> predict_proba(std::span<const double> x) const {
    if (k_ == 0) fail(ErrorKind::kUntrainedModel, "knn");
    const auto z = scaler_.apply(x);
    const std::size_t n = cls_.size();
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0.0;
      for (std::size_t f = 0; f < features_; ++f) {
        const double diff = points_[i * features_ + f] - z[f];
        d += diff * diff;
      }
      dist[i] = {d, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
    std::vector<double> p(classes_.size(), 0.0);
    for (std::size_t j = 0; j < k_; ++j) p[cls_[dist[j].second]] += 1.0;
    for (double& v : p) v /= static_cast<double>(k_);
    return p;
  }

  int predict(std::span<const double> x) const { return classes_[argmax(predict_proba(x))]; }

 private:
  std::size_t k_ = 0;
  std::size_t features_ = 0;
  Standardizer scaler_;
  std::vector<int> classes_;
  std::vector<double> points_;
  std::vector<std::size_t> cls_;
};

inline int knn_classify(const LabeledFeatureSet& train, std::span<const double> query, std::size_t k) {
  return KnnModel::fit(train, k).predict(query);
}

struct LogisticParams {
  double l2 = 1e-3;
  std::size_t epochs = 500;
  double learning_rate = 0.5;
};

/// Mean cross-entropy plus (l2/2)|w|^2 over a standardized design matrix.
/// The bias is not penalized.
struct LogisticProblem {
  std::vector<double> x;  // row-major, n x features
  std::vector<double> y;  // 0 or 1
  std::size_t features = 0;
  double l2 = 0.0;

  std::size_t rows() const noexcept { return y.size(); }

  double margin(std::size_t i, std::span<const double> w, double b) const {
    double s = b;
    for (std::size_t f = 0; f < features; ++f) s += w[f] * x[i * features + f];
    return s;
  }

  double loss(std::span<const double> w, double b) const {
    double total = 0.0;
    for (std::size_t i = 0; i < rows(); ++i) {
      const double s = margin(i, w, b);
      // log(1 + e^s) - y s, evaluated without overflow
      const double softplus = s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
      total += softplus - y[i] * s;
    }
    double reg = 0.0;
    for (double v : w) reg += v * v;
    return total / static_cast<double>(rows()) + 0.5 * l2 * reg;
  }

  struct Gradient {
    std::vector<double> w;
    double b = 0.0;
  };

  /// Gradient of the data term only; add l2 * w for the full objective.
  Gradient data_gradient(std::span<const double> w, double b) const {
    Gradient g{std::vector<double>(features, 0.0), 0.0};
    for (std::size_t i = 0; i < rows(); ++i) {
      const double r = 1.0 / (1.0 + std::exp(-margin(i, w, b))) - y[i];
      for (std::size_t f = 0; f < features; ++f) g.w[f] += r * x[i * features + f];
      g.b += r;
    }
    const double n = static_cast<double>(rows());
    for (double& v : g.w) v /= n;
    g.b /= n;
    return g;
  }

  Gradient gradient(std::span<const double> w, double b) const {
    Gradient g = data_gradient(w, b);
    for (std::size_t f = 0; f < features; ++f) g.w[f] += l2 * w[f];
    return g;
  }
};

class LogisticModel {
 public:
  LogisticModel() = default;

  static LogisticProblem problem(const LabeledFeatureSet& set, const Standardizer& scaler, int positive, double l2) {
    LogisticProblem prob;
    prob.features = set.features();
    prob.l2 = l2;
    for (std::size_t i = 0; i < set.rows(); ++i) {
      const auto z = scaler.apply(set.row(i));
      prob.x.insert(prob.x.end(), z.begin(), z.end());
      prob.y.push_back(set.label(i) == positive ? 1.0 : 0.0);
    }
    return prob;
  }

  /// Full-batch proximal gradient descent from zero weights; the L2 term is
  /// applied as w <- (w - lr g) / (1 + lr l2). Deterministic.
  static LogisticModel fit(const LabeledFeatureSet& set, const LogisticParams& params = {}) {
    require_rows(set);
    if (!(params.l2 >= 0.0) || !(params.learning_rate > 0.0)) {
      fail(ErrorKind::kInvalidArgument, "logistic regression needs l2 >= 0 and learning_rate > 0");
    }
    const auto labels = stats::binary_classes(set.labels());
    LogisticModel m;
    m.scaler_ = Standardizer::fit(set);
    m.classes_ = {labels.negative, labels.positive};
    const auto prob = problem(set, m.scaler_, labels.positive, params.l2);
    m.weights_.assign(set.features(), 0.0);
    m.bias_ = 0.0;
    const double shrink = 1.0 / (1.0 + params.learning_rate * params.l2);
    for (std::size_t e = 0; e < params.epochs; ++e) {
      const auto g = prob.data_gradient(m.weights_, m.bias_);
      for (std::size_t f = 0; f < m.weights_.size(); ++f) {
        m.weights_[f] = (m.weights_[f] - params.learning_rate * g.w[f]) * shrink;
      }
      m.bias_ -= params.learning_rate * g.b;
    }
    return m;
  }

  const std::vector<int>& classes() const noexcept { return classes_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double bias() const noexcept { return bias_; }

  std::vector<double> predict_proba(std::span<const double> x) const {
    if (classes_.empty()) fail(ErrorKind::kUntrainedModel, "logistic regression");
    const auto z = scaler_.apply(x);
    double s = bias_;
    for (std::size_t f = 0; f < z.size(); ++f) s += weights_[f] * z[f];
    const double p = 1.0 / (1.0 + std::exp(-s));
    return {1.0 - p, p};
  }

  int predict(std::span<const double> x) const { return classes_[argmax(predict_proba(x))]; }

 private:
  Standardizer scaler_;
  std::vector<int> classes_;
  std::vector<double> weights_;
  double bias_ = 0.0;
};

/// Always predicts the most frequent training label (smallest on a tie).
class MajorityModel {
 public:
  static MajorityModel fit(const LabeledFeatureSet& set) {
    require_rows(set);
    MajorityModel m;
    m.classes_ = set.classes();
    m.prior_.assign(m.classes_.size(), 0.0);
    for (int l : set.labels()) m.prior_[class_position(m.classes_, l)] += 1.0;
    for (double& v : m.prior_) v /= static_cast<double>(set.rows());
    return m;
  }

  const std::vector<int>& classes() const noexcept { return classes_; }
  std::vector<double> predict_proba(std::span<const double>) const {
    if (classes_.empty()) fail(ErrorKind::kUntrainedModel, "majority baseline");
    return prior_;
  }
  int predict(std::span<const double> x) const { return classes_[argmax(predict_proba(x))]; }

 private:
  std::vector<int> classes_;
  std::vector<double> prior_;
};

// ---------------------------------------------------------------------------
// Uniform model handling

enum class ClassifierKind { kRandomForest, kDecisionTree, kKnn, kLogistic, kMajority };

inline constexpr std::string_view classifier_name(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::kRandomForest: return "random_forest";
    case ClassifierKind::kDecisionTree: return "decision_tree";
    case ClassifierKind::kKnn: return "knn";
    case ClassifierKind::kLogistic: return "logistic";
    case ClassifierKind::kMajority: return "majority";
  }
  return "unknown";
}

inline std::optional<ClassifierKind> parse_classifier(std::string_view name) {
  for (auto k : {ClassifierKind::kRandomForest, ClassifierKind::kDecisionTree, ClassifierKind::kKnn,
                 ClassifierKind::kLogistic, ClassifierKind::kMajority}) {
    if (classifier_name(k) == name) return k;
  }
  return std::nullopt;
}

struct ModelSpec {
  ClassifierKind kind = ClassifierKind::kRandomForest;
  ForestParams forest;
  TreeParams tree;  // all features, unlimited depth
  std::size_t knn_k = 5;
  LogisticParams logistic;
};

using TrainedModel = std::variant<RandomForestModel, DecisionTree, KnnModel, LogisticModel, MajorityModel>;

inline TrainedModel train_model(const ModelSpec& spec, const LabeledFeatureSet& set, std::uint64_t seed) {
  switch (spec.kind) {
    case ClassifierKind::kRandomForest: return train_forest(set, spec.forest, seed);
    case ClassifierKind::kDecisionTree: return train_tree(set, spec.tree, seed);
    case ClassifierKind::kKnn: return KnnModel::fit(set, std::min(spec.knn_k, set.rows()));
    case ClassifierKind::kLogistic: return LogisticModel::fit(set, spec.logistic);
    case ClassifierKind::kMajority: return MajorityModel::fit(set);
  }
  fail(ErrorKind::kInvalidArgument, "classifier kind");
}

inline int predict(const TrainedModel& m, std::span<const double> x) {
  return std::visit([&](const auto& model) { return model.predict(x); }, m);
}

inline std::vector<double> predict_proba(const TrainedModel& m, std::span<const double> x) {
  return std::visit([&](const auto& model) { return model.predict_proba(x); }, m);
}

inline const std::vector<int>& model_classes(const TrainedModel& m) {
  return std::visit([](const auto& model) -> const std::vector<int>& { return model.classes(); }, m);
}

// ---------------------------------------------------------------------------
// Evaluation

/// Each class is shuffled on its own, then dealt round-robin into the folds;
/// the dealing position carries over from one class to the next.
inline std::vector<std::vector<std::size_t>> stratified_kfold(const LabeledFeatureSet& set, std::size_t k,
                                                              std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::kInvalidArgument, "k must be >= 2");
  require_rows(set);
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t next = 0;
  for (int c : set.classes()) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < set.rows(); ++i) {
      if (set.label(i) == c) members.push_back(i);
    }
    if (members.size() < k) {
      fail(ErrorKind::kTooFewSamples, "class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                                          " rows, fewer than k = " + std::to_string(k));
    }
    shuffle(std::span<std::size_t>(members), rng);
    for (std::size_t i : members) folds[next++ % k].push_back(i);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

struct CVResult {
  std::vector<int> classes;
  std::vector<double> fold_accuracies;
  std::vector<std::size_t> fold_sizes;
  double mean_accuracy = 0.0;
  std::vector<std::size_t> confusion;  // row = true class, column = predicted

  std::size_t confusion_at(std::size_t truth, std::size_t predicted) const {
    return confusion[truth * classes.size() + predicted];
  }
};

/// k-fold cross-validation; the model for fold i is trained with seed
/// derive_seed(seed, i).
inline CVResult evaluate(const LabeledFeatureSet& set, const ModelSpec& spec, std::size_t k, std::uint64_t seed) {
  const auto folds = stratified_kfold(set, k, seed);
  CVResult res;
  res.classes = set.classes();
  const std::size_t nc = res.classes.size();
  res.confusion.assign(nc * nc, 0);
  std::vector<char> in_test(set.rows());
  for (std::size_t i = 0; i < k; ++i) {
    std::fill(in_test.begin(), in_test.end(), 0);
    for (auto r : folds[i]) in_test[r] = 1;
    std::vector<std::size_t> train_rows;
    for (std::size_t r = 0; r < set.rows(); ++r) {
      if (!in_test[r]) train_rows.push_back(r);
    }
    const auto model = train_model(spec, set.select_rows(train_rows), derive_seed(seed, i));
    std::size_t correct = 0;
    for (auto r : folds[i]) {
      const int predicted = predict(model, set.row(r));
      correct += predicted == set.label(r) ? 1 : 0;
      res.confusion[class_position(res.classes, set.label(r)) * nc + class_position(res.classes, predicted)] += 1;
    }
    res.fold_sizes.push_back(folds[i].size());
    res.fold_accuracies.push_back(static_cast<double>(correct) / static_cast<double>(folds[i].size()));
  }
  res.mean_accuracy = std::accumulate(res.fold_accuracies.begin(), res.fold_accuracies.end(), 0.0) /
                      static_cast<double>(k);
  return res;
}

struct HyperparamGrid {
  std::vector<std::size_t> n_trees{50, 100, 200};
  std::vector<std::optional<std::size_t>> max_depth{4, 8, 16, std::nullopt};
  std::vector<std::size_t> min_samples_split{2, 5, 10};
  std::vector<std::size_t> features_per_split{2, 3, 4};
  std::size_t iterations = 40;

  std::size_t size() const {
    return n_trees.size() * max_depth.size() * min_samples_split.size() * features_per_split.size();
  }

  /// Grid point i in lexicographic order (n_trees slowest).
  ForestParams at(std::size_t i) const {
    ForestParams p;
    p.features_per_split = features_per_split[i % features_per_split.size()];
    i /= features_per_split.size();
    p.min_samples_split = min_samples_split[i % min_samples_split.size()];
    i /= min_samples_split.size();
    p.max_depth = max_depth[i % max_depth.size()];
    i /= max_depth.size();
    p.n_trees = n_trees[i];
    return p;
  }
};

struct SearchResult {
  std::vector<ForestParams> candidates;  // in sampling order
  std::vector<CVResult> results;
  std::size_t best = 0;

  const ForestParams& best_params() const { return candidates[best]; }
  const CVResult& best_result() const { return results[best]; }
};

/// Evaluates min(iterations, grid size) distinct grid points drawn uniformly
/// without replacement. All candidates share the same folds; the first
/// sampled candidate wins a tie.
inline SearchResult random_grid_search(const LabeledFeatureSet& set, const HyperparamGrid& grid, std::size_t k,
                                       std::uint64_t seed) {
  if (grid.size() == 0 || grid.iterations == 0) fail(ErrorKind::kInvalidArgument, "empty hyperparameter grid");
  Rng rng(seed);
  std::vector<std::size_t> points(grid.size());
  std::iota(points.begin(), points.end(), 0);
  const std::size_t draws = std::min(grid.iterations, points.size());
  for (std::size_t i = 0; i < draws; ++i) {
    std::swap(points[i], points[i + uniform_index(rng, points.size() - i)]);
  }
  SearchResult out;
  for (std::size_t i = 0; i < draws; ++i) {
    ModelSpec spec;
    spec.forest = grid.at(points[i]);
    out.candidates.push_back(spec.forest);
    out.results.push_back(evaluate(set, spec, k, seed));
    if (out.results.back().mean_accuracy > out.results[out.best].mean_accuracy) out.best = i;
  }
  return out;
}

}  // namespace caponef::classify
