#pragma once

/// @file model_io.hpp
/// Versioned text format for random forest models. See docs/formats.md.

#include <charconv>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "caponef/classify.hpp"
#include "caponef/error.hpp"
#include "caponef/io.hpp"

namespace caponef::classify {

inline constexpr std::string_view kModelMagic = "caponef-forest";
inline constexpr int kModelFormatVersion = 1;

inline std::string serialize_forest(const RandomForestModel& model) {
  if (!model.trained()) fail(ErrorKind::kUntrainedModel, "random forest");
  const auto& p = model.params();
  std::ostringstream out;
  out << kModelMagic << ' ' << kModelFormatVersion << '\n';
  out << "features " << model.features();
  for (const auto& n : model.feature_names()) out << ' ' << n;
  out << "\nclasses " << model.classes().size();
  for (int c : model.classes()) out << ' ' << c;
  out << "\nn_trees " << p.n_trees << '\n';
  out << "max_depth " << (p.max_depth ? std::to_string(*p.max_depth) : "unlimited") << '\n';
  out << "min_samples_split " << p.min_samples_split << '\n';
  out << "features_per_split " << (p.features_per_split ? std::to_string(*p.features_per_split) : "auto") << '\n';
  out << "bootstrap " << (p.bootstrap ? 1 : 0) << '\n';
  out << "seed " << model.seed() << '\n';
  for (std::size_t t = 0; t < model.trees().size(); ++t) {
    const auto& nodes = model.trees()[t].nodes();
    out << "tree " << t << ' ' << nodes.size() << '\n';
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      out << i;
      if (n.is_leaf()) {
        out << " leaf " << io::format_double(n.sample_fraction);
        for (auto c : n.counts) out << ' ' << c;
      } else {
        out << " split " << n.feature << ' ' << io::format_double(n.threshold) << ' ' << n.left << ' ' << n.right
            << ' ' << io::format_double(n.sample_fraction) << ' ' << io::format_double(n.impurity_decrease);
      }
      out << '\n';
    }
  }
  out << "end\n";
  return out.str();
}

namespace detail {

class TokenReader {
 public:
  explicit TokenReader(std::string_view text) : text_(text) {}

  std::string_view next() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\n' || text_[pos_] == '\r')) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
    if (pos_ >= text_.size()) fail(ErrorKind::kParseError, "model: unexpected end of file");
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != '\n' && text_[pos_] != '\r') ++pos_;
    return text_.substr(start, pos_ - start);
  }

  void expect(std::string_view word) {
    const auto got = next();
    if (got != word) {
      fail(ErrorKind::kParseError, "model line " + std::to_string(line_) + ": expected '" + std::string(word) +
                                       "', found '" + std::string(got) + "'");
    }
  }

  std::size_t count() {
    const long long v = io::parse_integer(next());
    if (v < 0) fail(ErrorKind::kParseError, "model line " + std::to_string(line_) + ": negative count");
    return static_cast<std::size_t>(v);
  }

  std::optional<std::size_t> count_or(std::string_view keyword) {
    const auto tok = next();
    if (tok == keyword) return std::nullopt;
    const long long v = io::parse_integer(tok);
    if (v < 0) fail(ErrorKind::kParseError, "model line " + std::to_string(line_) + ": negative count");
    return static_cast<std::size_t>(v);
  }

  double real() { return io::parse_double(next()); }

  std::uint64_t u64() {
    const auto tok = next();
    std::uint64_t v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      fail(ErrorKind::kParseError, "model line " + std::to_string(line_) + ": bad seed");
    }
    return v;
  }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

}  // namespace detail

inline RandomForestModel parse_forest(std::string_view text) {
  detail::TokenReader in(text);
  in.expect(kModelMagic);
  if (io::parse_integer(in.next()) != kModelFormatVersion) fail(ErrorKind::kParseError, "unsupported model version");
  in.expect("features");
  std::vector<std::string> names(in.count());
  for (auto& n : names) n = std::string(in.next());
  in.expect("classes");
  std::vector<int> classes(in.count());
  for (int& c : classes) c = static_cast<int>(io::parse_integer(in.next()));
  ForestParams p;
  in.expect("n_trees");
  p.n_trees = in.count();
  in.expect("max_depth");
  p.max_depth = in.count_or("unlimited");
  in.expect("min_samples_split");
  p.min_samples_split = in.count();
  in.expect("features_per_split");
  p.features_per_split = in.count_or("auto");
  in.expect("bootstrap");
  p.bootstrap = in.count() != 0;
  in.expect("seed");
  const std::uint64_t seed = in.u64();

  std::vector<DecisionTree> trees;
  for (std::size_t t = 0; t < p.n_trees; ++t) {
    in.expect("tree");
    if (in.count() != t) fail(ErrorKind::kParseError, "model: trees out of order");
    std::vector<TreeNode> nodes(in.count());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (in.count() != i) fail(ErrorKind::kParseError, "model line " + std::to_string(in.line()) + ": node id");
      auto& n = nodes[i];
      const auto kind = in.next();
      if (kind == "leaf") {
        n.sample_fraction = in.real();
        n.counts.resize(classes.size());
        for (auto& c : n.counts) c = static_cast<std::uint32_t>(in.count());
      } else if (kind == "split") {
        n.feature = static_cast<int>(in.count());
        n.threshold = in.real();
        n.left = static_cast<std::uint32_t>(in.count());
        n.right = static_cast<std::uint32_t>(in.count());
        n.sample_fraction = in.real();
        n.impurity_decrease = in.real();
        if (static_cast<std::size_t>(n.feature) >= names.size() || n.left <= i || n.right <= i ||
            n.left >= nodes.size() || n.right >= nodes.size()) {
          fail(ErrorKind::kParseError, "model line " + std::to_string(in.line()) + ": index out of range");
        }
      } else {
        fail(ErrorKind::kParseError, "model line " + std::to_string(in.line()) + ": unknown node kind");
      }
    }
    trees.emplace_back(classes, names.size(), std::move(nodes));
  }
  in.expect("end");
  return RandomForestModel(p, seed, std::move(names), std::move(classes), std::move(trees));
}

}  // namespace caponef::classify
