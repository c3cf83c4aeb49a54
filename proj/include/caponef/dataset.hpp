#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "caponef/error.hpp"
#include "caponef/tls_features.hpp"

namespace caponef {

/// Row-major table of (label, features). Labels are device ids; columns are
/// named so that subsets keep track of which parameters they hold.
class LabeledFeatureSet {
 public:
  LabeledFeatureSet() : LabeledFeatureSet(default_feature_names()) {}

  explicit LabeledFeatureSet(std::vector<std::string> feature_names)
      : names_(std::move(feature_names)) {
    if (names_.empty()) fail(ErrorKind::kInvalidArgument, "no feature columns");
  }

  static std::vector<std::string> default_feature_names() {
    return {kFeatureNames.begin(), kFeatureNames.end()};
  }

  void add_row(int label, std::span<const double> features) {
    if (features.size() != names_.size()) {
      fail(ErrorKind::kInvalidArgument,
           "row has " + std::to_string(features.size()) + " values, expected " +
               std::to_string(names_.size()));
    }
    for (double v : features) {
      if (!std::isfinite(v)) fail(ErrorKind::kNonFiniteInput, "row " + std::to_string(labels_.size()));
    }
    labels_.push_back(label);
    values_.insert(values_.end(), features.begin(), features.end());
  }

  void add_row(int label, const FeatureVector& features) { add_row(label, std::span<const double>(features.values)); }

  std::size_t rows() const noexcept { return labels_.size(); }
  std::size_t features() const noexcept { return names_.size(); }
  bool empty() const noexcept { return labels_.empty(); }

  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values_).subspan(i * names_.size(), names_.size());
  }
  double at(std::size_t i, std::size_t f) const { return values_[i * names_.size() + f]; }
  const std::vector<std::string>& feature_names() const noexcept { return names_; }

  std::vector<double> column(std::size_t f) const {
    std::vector<double> out(rows());
    for (std::size_t i = 0; i < rows(); ++i) out[i] = at(i, f);
    return out;
  }

  /// Sorted distinct labels.
  std::vector<int> classes() const {
    std::vector<int> out = labels_;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  LabeledFeatureSet select_rows(std::span<const std::size_t> idx) const {
    LabeledFeatureSet out(names_);
    out.labels_.reserve(idx.size());
    out.values_.reserve(idx.size() * names_.size());
    for (std::size_t i : idx) {
      if (i >= rows()) fail(ErrorKind::kRowOutOfRange, std::to_string(i));
      out.labels_.push_back(labels_[i]);
      const auto r = row(i);
      out.values_.insert(out.values_.end(), r.begin(), r.end());
    }
    return out;
  }

  LabeledFeatureSet select_features(std::span<const std::size_t> columns) const {
    if (columns.empty()) fail(ErrorKind::kInvalidArgument, "empty feature subset");
    std::vector<std::string> names;
    for (std::size_t c : columns) {
      if (c >= features()) fail(ErrorKind::kInvalidArgument, "feature index " + std::to_string(c));
      names.push_back(names_[c]);
    }
    LabeledFeatureSet out(std::move(names));
    out.labels_ = labels_;
    out.values_.reserve(rows() * columns.size());
    for (std::size_t i = 0; i < rows(); ++i) {
      for (std::size_t c : columns) out.values_.push_back(at(i, c));
    }
    return out;
  }

  /// Column positions of `names` in this set, or InvalidArgument if one is missing.
  std::vector<std::size_t> column_indices(std::span<const std::string> names) const {
    std::vector<std::size_t> out;
    for (const auto& n : names) {
      const auto it = std::find(names_.begin(), names_.end(), n);
      if (it == names_.end()) fail(ErrorKind::kInvalidArgument, "missing feature column " + n);
      out.push_back(static_cast<std::size_t>(it - names_.begin()));
    }
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<int> labels_;
  std::vector<double> values_;
};

}  // namespace caponef
