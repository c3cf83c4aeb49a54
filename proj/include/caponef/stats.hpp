#pragma once

/// @file stats.hpp
/// Feature statistics: Pearson and point-biserial correlation, two-sided
/// Student-t p-values, equal-width histograms and the per-feature
/// significance table.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "caponef/dataset.hpp"
#include "caponef/error.hpp"
#include "caponef/io.hpp"

namespace caponef::stats {

inline constexpr double kSignificanceLevel = 0.05;

namespace detail {

inline double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Continued fraction for the incomplete beta function, modified Lentz.
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
    fail(ErrorKind::kInvalidArgument, "incomplete beta domain");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * detail::beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Sample Pearson correlation coefficient.
inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) fail(ErrorKind::kLengthMismatch, "pearson");
  if (xs.size() < 2) fail(ErrorKind::kInsufficientSamples, "pearson needs n >= 2");
  const double mx = detail::mean(xs);
  const double my = detail::mean(ys);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) fail(ErrorKind::kConstantInput, "pearson");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Binary class split of a label list: the larger label is the positive class.
struct BinaryLabels {
  int negative = 0;
  int positive = 1;
};

inline BinaryLabels binary_classes(std::span<const int> labels) {
  if (labels.empty()) fail(ErrorKind::kEmptyInput, "labels");
  const auto [lo, hi] = std::minmax_element(labels.begin(), labels.end());
  if (*lo == *hi) fail(ErrorKind::kSingleClass, "labels");
  for (int l : labels) {
    if (l != *lo && l != *hi) fail(ErrorKind::kNotBinary, "more than two labels");
  }
  return {*lo, *hi};
}

/// r_pb = (M1 - M0) / s * sqrt(n1 n0 / n^2) with the population standard
/// deviation s, which makes it identical to pearson(xs, labels as 0/1).
inline double point_biserial(std::span<const double> xs, std::span<const int> labels) {
  if (xs.size() != labels.size()) fail(ErrorKind::kLengthMismatch, "point_biserial");
  const BinaryLabels classes = binary_classes(labels);
  const double n = static_cast<double>(xs.size());
  const double mean_all = detail::mean(xs);
  double sum1 = 0.0;
  double sum0 = 0.0;
  double n1 = 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - mean_all;
    ss += d * d;
    if (labels[i] == classes.positive) {
      sum1 += xs[i];
      n1 += 1.0;
    } else {
      sum0 += xs[i];
    }
  }
  if (!(ss > 0.0)) fail(ErrorKind::kConstantInput, "point_biserial");
  const double n0 = n - n1;
  const double s_pop = std::sqrt(ss / n);
  const double r = (sum1 / n1 - sum0 / n0) / s_pop * std::sqrt(n1 * n0 / (n * n));
  return std::clamp(r, -1.0, 1.0);
}

/// Two-sided p-value of a correlation r over n samples: Student's t with
/// n - 2 degrees of freedom, t = r sqrt((n-2)/(1-r^2)). |r| = 1 gives 0.
inline double p_value_two_sided(double r, std::size_t n) {
  if (!(std::abs(r) <= 1.0)) fail(ErrorKind::kInvalidArgument, "|r| > 1");
  if (n < 3) fail(ErrorKind::kInsufficientSamples, "p-value needs n >= 3");
  if (std::abs(r) == 1.0) return 0.0;
  if (r == 0.0) return 1.0;
  const double df = static_cast<double>(n - 2);
  // t^2 / (df + t^2) = r^2, so the beta argument df/(df+t^2) is 1 - r^2.
  const double x = (1.0 - r) * (1.0 + r);
  return std::clamp(regularized_incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

struct Histogram {
  std::vector<double> edges;  // bins + 1, non-decreasing
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [min, max]; the last bin is closed on the right.
/// All-equal input uses unit-width bins starting at the common value.
inline Histogram histogram(std::span<const double> xs, std::size_t bins) {
  if (xs.empty()) fail(ErrorKind::kEmptyInput, "histogram");
  if (bins == 0) fail(ErrorKind::kInvalidArgument, "histogram needs bins >= 1");
  const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
  const double lo = *lo_it;
  const double width = *hi_it > lo ? (*hi_it - lo) / static_cast<double>(bins) : 1.0;
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + width * static_cast<double>(b);
  if (*hi_it > lo) h.edges[bins] = *hi_it;
  h.counts.assign(bins, 0);
  for (double x : xs) {
    auto b = static_cast<std::size_t>(std::floor((x - lo) / width));
    h.counts[std::min(b, bins - 1)] += 1;
  }
  return h;
}

/// Square correlation matrix with an explicit marker (empty optional) for
/// pairs involving a constant column.
struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::optional<double>> values;

  std::size_t size() const noexcept { return names.size(); }
  const std::optional<double>& at(std::size_t i, std::size_t j) const { return values[i * names.size() + j]; }
};

inline CorrelationMatrix pearson_matrix(const LabeledFeatureSet& set) {
  if (set.rows() < 2) fail(ErrorKind::kInsufficientSamples, "pearson_matrix needs n >= 2");
  const std::size_t f = set.features();
  std::vector<std::vector<double>> columns;
  for (std::size_t c = 0; c < f; ++c) columns.push_back(set.column(c));
  CorrelationMatrix m{set.feature_names(), std::vector<std::optional<double>>(f * f)};
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t j = i; j < f; ++j) {
      std::optional<double> v;
      try {
        v = i == j ? (pearson(columns[i], columns[i]), 1.0) : pearson(columns[i], columns[j]);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kConstantInput) throw;
      }
      m.values[i * f + j] = v;
      m.values[j * f + i] = v;
    }
  }
  return m;
}

struct FeatureSignificance {
  std::string feature;
  std::size_t column = 0;
  std::optional<double> pbcc;     // empty for a constant column
  std::optional<double> p_value;
  bool significant = false;       // p_value < 0.05
};

struct SignificanceReport {
  std::vector<FeatureSignificance> entries;  // descending |pbcc|, undefined last
};

inline SignificanceReport significance_report(const LabeledFeatureSet& set) {
  binary_classes(set.labels());
  SignificanceReport report;
  for (std::size_t c = 0; c < set.features(); ++c) {
    FeatureSignificance s;
    s.feature = set.feature_names()[c];
    s.column = c;
    try {
      const double r = point_biserial(set.column(c), set.labels());
      s.pbcc = r;
      s.p_value = p_value_two_sided(r, set.rows());
      s.significant = *s.p_value < kSignificanceLevel;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kConstantInput) throw;
    }
    report.entries.push_back(std::move(s));
  }
  std::stable_sort(report.entries.begin(), report.entries.end(),
                   [](const FeatureSignificance& a, const FeatureSignificance& b) {
                     if (a.pbcc.has_value() != b.pbcc.has_value()) return a.pbcc.has_value();
                     return a.pbcc && std::abs(*a.pbcc) > std::abs(*b.pbcc);
                   });
  return report;
}

inline constexpr const char* kUndefined = "undefined";

inline std::string format_significance_csv(const SignificanceReport& report) {
  std::string out = "feature,pbcc,p_value,significant\n";
  for (const auto& e : report.entries) {
    out += e.feature + ",";
    out += e.pbcc ? io::format_double(*e.pbcc) : kUndefined;
    out += ",";
    out += e.p_value ? io::format_double(*e.p_value) : kUndefined;
    out += e.significant ? ",true\n" : ",false\n";
  }
  return out;
}

inline std::string format_correlation_csv(const CorrelationMatrix& m) {
  std::string out = "feature";
  for (const auto& n : m.names) out += "," + n;
  out += "\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += m.names[i];
    for (std::size_t j = 0; j < m.size(); ++j) {
      out += ",";
      out += m.at(i, j) ? io::format_double(*m.at(i, j)) : kUndefined;
    }
    out += "\n";
  }
  return out;
}

inline std::string format_histogram_csv(const Histogram& h) {
  std::string out = "bin,lower,upper,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    out += std::to_string(b) + "," + io::format_double(h.edges[b]) + "," +
           io::format_double(h.edges[b + 1]) + "," + std::to_string(h.counts[b]) + "\n";
  }
  return out;
}

}  // namespace caponef::stats
