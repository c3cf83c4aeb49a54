#pragma once

/// @file tls_features.hpp
/// The ten CAPoNeF parameters (P1..P10) of a single trendless sequence.
///
/// Every parameter is computed on the deviations Dy_j = y_j - <y>. Cumulative
/// quantities are unit-spaced running sums that start from J_0 = 0. Mean
/// frequency and phase come from a least-squares line through the positions
/// of the zero crossings of Dy.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "caponef/error.hpp"

namespace caponef {

inline constexpr std::size_t kFeatureCount = 10;
inline constexpr std::size_t kMinExtractLength = 8;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "P9", "P10"};

/// Ordered, finite, non-empty real samples (one captured frame).
class TrendlessSequence {
 public:
  explicit TrendlessSequence(std::vector<double> samples)
      : samples_(std::move(samples)) {
    if (samples_.empty()) fail(ErrorKind::kEmptyInput, "trendless sequence");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      if (!std::isfinite(samples_[i])) {
        fail(ErrorKind::kNonFiniteInput, "sample " + std::to_string(i));
      }
    }
  }

  std::span<const double> samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double operator[](std::size_t i) const noexcept { return samples_[i]; }

  bool operator==(const TrendlessSequence&) const = default;

 private:
  std::vector<double> samples_;
};

struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  double& operator[](std::size_t i) noexcept { return values[i]; }
  double operator[](std::size_t i) const noexcept { return values[i]; }

  bool operator==(const FeatureVector&) const = default;
};

/// Fractional (0-based) sample positions of the zero crossings of Dy.
struct RootSequence {
  std::vector<double> roots;

  std::size_t size() const noexcept { return roots.size(); }
};

/// R_k ~ slope * k + intercept for k = 1..K.
struct RootLineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;
};

struct FrequencyPhase {
  double mean_frequency = 0.0;  // P9, radians per sample
  double phase = 0.0;           // P10, radians in [0, pi)
};

namespace detail {

struct Extremes {
  double min;
  double max;
};

inline Extremes extremes(std::span<const double> xs) {
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  return {*lo, *hi};
}

inline double mean_of(std::span<const double> ys) {
  const Extremes e = extremes(ys);
  if (e.min == e.max) return e.min;
  const long double sum = std::accumulate(ys.begin(), ys.end(), 0.0L);
  return static_cast<double>(sum / static_cast<long double>(ys.size()));
}

// Constant input yields exact zeros so that sign tests downstream see no
// rounding residue.
inline std::vector<double> deviations(std::span<const double> ys) {
  std::vector<double> dy(ys.size(), 0.0);
  const Extremes e = extremes(ys);
  if (e.min == e.max) return dy;
  const double mean = mean_of(ys);
  std::transform(ys.begin(), ys.end(), dy.begin(),
                 [mean](double y) { return y - mean; });
  return dy;
}

// Range of the running sum J_0 = 0, J_j = sum_{i<=j} scale * d_i.
inline double walk_range(std::span<const double> d, double scale = 1.0) {
  double walk = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  for (double v : d) {
    walk += scale * v;
    lo = std::min(lo, walk);
    hi = std::max(hi, walk);
  }
  return hi - lo;
}

inline void require_length(const TrendlessSequence& seq, std::size_t n,
                           std::string_view what) {
  if (seq.size() < n) {
    fail(ErrorKind::kInsufficientSamples,
         std::string(what) + " needs N >= " + std::to_string(n));
  }
}

inline void require_two_sided(const Extremes& e, std::string_view what) {
  if (!(e.max > 0.0 && e.min < 0.0)) {
    fail(ErrorKind::kOneSidedSequence, std::string(what));
  }
}

inline double p3_from_deviations(std::span<const double> dy) {
  const Extremes e = extremes(dy);
  require_two_sided(e, "P3");
  return e.max - std::abs(e.min);
}

inline double p5_from_deviations(std::span<const double> dy) {
  const Extremes e = extremes(dy);
  if (!(e.min < 0.0)) fail(ErrorKind::kDegenerateAsymmetry, "P5");
  return e.max / -e.min;
}

inline double p6_from_deviations(std::span<const double> dy) {
  std::size_t last_up = 0;
  std::size_t last_dn = 0;
  for (std::size_t i = 0; i < dy.size(); ++i) {
    if (dy[i] > 0.0) last_up = i + 1;
    if (dy[i] < 0.0) last_dn = i + 1;
  }
  if (last_up == 0 || last_dn == 0) fail(ErrorKind::kOneSidedSequence, "P6");
  return static_cast<double>(last_up) - static_cast<double>(last_dn);
}

inline double p7_from_deviations(std::span<const double> dy) {
  std::vector<double> sra(dy.begin(), dy.end());
  std::sort(sra.begin(), sra.end(), std::greater<>());
  double walk = 0.0;
  double peak = 0.0;
  for (double v : sra) {
    walk += v;
    peak = std::max(peak, walk);
  }
  return peak;
}

inline double p8_from_deviations(std::span<const double> dy) {
  const Extremes e = extremes(dy);
  const double range = e.max - e.min;
  if (!(range > 0.0)) fail(ErrorKind::kDegenerateSequence, "P8");
  return walk_range(dy, 1.0 / range);
}

inline RootSequence roots_from_deviations(std::span<const double> dy) {
  RootSequence out;
  for (std::size_t j = 0; j < dy.size(); ++j) {
    if (dy[j] == 0.0) {
      if (j == 0 || dy[j - 1] != 0.0) out.roots.push_back(static_cast<double>(j));
      continue;
    }
    if (j + 1 < dy.size() && dy[j] * dy[j + 1] < 0.0) {
      out.roots.push_back(static_cast<double>(j) + dy[j] / (dy[j] - dy[j + 1]));
    }
  }
  return out;
}

}  // namespace detail

/// Dy = y - <y>. A constant sequence maps to exact zeros.
inline TrendlessSequence center(const TrendlessSequence& seq) {
  return TrendlessSequence(detail::deviations(seq.samples()));
}

inline double p1_mean(const TrendlessSequence& seq) {
  return detail::mean_of(seq.samples());
}

/// max(Dy) - min(Dy); zero for a constant sequence.
inline double p2_range(const TrendlessSequence& seq) {
  detail::require_length(seq, 2, "P2");
  const auto e = detail::extremes(detail::deviations(seq.samples()));
  return e.max - e.min;
}

/// max(Dy) - |min(Dy)|.
inline double p3_relative_intensity(const TrendlessSequence& seq) {
  return detail::p3_from_deviations(detail::deviations(seq.samples()));
}

/// Range of the running sum of Dy, including J_0 = 0.
inline double p4_cumulative_range(const TrendlessSequence& seq) {
  detail::require_length(seq, 2, "P4");
  return detail::walk_range(detail::deviations(seq.samples()));
}

/// [max(y) - mean(y)] / [mean(y) - min(y)]; 1 for a symmetric sequence.
inline double p5_asymmetry(const TrendlessSequence& seq) {
  return detail::p5_from_deviations(detail::deviations(seq.samples()));
}

/// Last 1-based index with Dy > 0 minus last 1-based index with Dy < 0.
inline double p6_horizontal_asymmetry(const TrendlessSequence& seq) {
  return detail::p6_from_deviations(detail::deviations(seq.samples()));
}

/// Peak of the cumulative sum of the deviations sorted in descending order
/// (the bell-like SRA curve). Equals the sum of the positive deviations.
inline double p7_bell_max(const TrendlessSequence& seq) {
  detail::require_length(seq, 2, "P7");
  return detail::p7_from_deviations(detail::deviations(seq.samples()));
}

/// Range of the running sum of y_n = Dy / Range(y). Equal to P4 / P2.
inline double p8_normalized_integral_range(const TrendlessSequence& seq) {
  return detail::p8_from_deviations(detail::deviations(seq.samples()));
}

/// Zero crossings of already-centred deviations, located by linear
/// interpolation between opposite-sign neighbours. Exact zeros are roots; a
/// run of zeros counts once.
inline RootSequence find_roots_in_deviations(std::span<const double> dy) {
  return detail::roots_from_deviations(dy);
}

/// Zero crossings of Dy = y - <y>.
inline RootSequence find_roots(const TrendlessSequence& seq) {
  return detail::roots_from_deviations(detail::deviations(seq.samples()));
}

/// Ordinary least squares of R_k against k = 1..K.
inline RootLineFit fit_root_line(const RootSequence& roots) {
  const std::size_t count = roots.size();
  if (count < 2) fail(ErrorKind::kInsufficientRoots, "P9");
  const double k_mean = (static_cast<double>(count) + 1.0) / 2.0;
  const double r_mean =
      std::accumulate(roots.roots.begin(), roots.roots.end(), 0.0) /
      static_cast<double>(count);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double dk = static_cast<double>(i + 1) - k_mean;
    sxx += dk * dk;
    sxy += dk * (roots.roots[i] - r_mean);
  }
  RootLineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = r_mean - fit.slope * k_mean;
  if (!(fit.slope > 0.0) || !std::isfinite(fit.slope)) {
    fail(ErrorKind::kDegenerateFit, "P9");
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double r = roots.roots[i] -
                     (fit.slope * static_cast<double>(i + 1) + fit.intercept);
    sse += r * r;
  }
  fit.residual_rms = std::sqrt(sse / static_cast<double>(count));
  return fit;
}

/// Matching omega * (a k + b) - phi = pi/2 + pi k gives omega = pi / a and
/// phi = pi b / a - pi / 2. The phase is only defined modulo pi (it depends
/// on which crossing is numbered k = 1) and is wrapped into [0, pi).
inline FrequencyPhase p9_p10_from_fit(const RootLineFit& fit) {
  constexpr double pi = std::numbers::pi;
  if (!(fit.slope > 0.0) || !std::isfinite(fit.slope) ||
      !std::isfinite(fit.intercept)) {
    fail(ErrorKind::kDegenerateFit, "P10");
  }
  FrequencyPhase out;
  out.mean_frequency = pi / fit.slope;
  double phase = std::fmod(pi * fit.intercept / fit.slope - pi / 2.0, pi);
  if (phase < 0.0) phase += pi;
  if (phase >= pi) phase = 0.0;
  out.phase = phase;
  return out;
}

/// All ten parameters. Throws when the frame is too short, constant,
/// one-sided or has fewer than two zero crossings; the error context names
/// the parameter that could not be formed.
inline FeatureVector extract_features(const TrendlessSequence& seq) {
  detail::require_length(seq, kMinExtractLength, "feature extraction");
  const std::vector<double> dy = detail::deviations(seq.samples());
  const auto e = detail::extremes(dy);
  if (!(e.max > e.min)) fail(ErrorKind::kDegenerateSequence, "P8");

  FeatureVector f;
  f[0] = detail::mean_of(seq.samples());
  f[1] = e.max - e.min;
  f[2] = detail::p3_from_deviations(dy);
  f[3] = detail::walk_range(dy);
  f[4] = detail::p5_from_deviations(dy);
  f[5] = detail::p6_from_deviations(dy);
  f[6] = detail::p7_from_deviations(dy);
  f[7] = detail::walk_range(dy, 1.0 / f[1]);

  const FrequencyPhase fp =
      p9_p10_from_fit(fit_root_line(detail::roots_from_deviations(dy)));
  f[8] = fp.mean_frequency;
  f[9] = fp.phase;
  return f;
}

}  // namespace caponef
