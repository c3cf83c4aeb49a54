#pragma once

/// @file signal_pipeline.hpp
/// Baseband front end: pi-digit trans-noise etalons, a transmitter impairment
/// simulator, correlation-based frame synchronization and extraction of the
/// per-sample phase of the error signal (received frame minus etalon).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "caponef/error.hpp"
#include "caponef/pi_digits.hpp"
#include "caponef/random.hpp"
#include "caponef/tls_features.hpp"

namespace caponef {

using Complex = std::complex<double>;

inline constexpr std::size_t kDefaultFrameLength = 1024;
inline constexpr std::size_t kMinEtalonLength = 64;

/// Trans-noise amplitudes from pi digits: block `frame_index` (0 or 1) covers
/// digits [frame_index * L, (frame_index + 1) * L) of the stream 3,1,4,1,5,...
/// Digit d maps to the DAC level -1 + 2d/9, so 0 -> -1 and 9 -> +1.
inline std::vector<double> gen_transnoise(std::size_t frame_index, std::size_t length) {
  if (frame_index > 1) {
    fail(ErrorKind::kInvalidArgument, "frame_index must be 0 or 1");
  }
  const std::size_t first = frame_index * length;
  if (first + length > kPiDigits.size()) {
    fail(ErrorKind::kDigitTableExhausted,
         "need " + std::to_string(first + length) + " digits, table has " +
             std::to_string(kPiDigits.size()));
  }
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) {
    const int digit = kPiDigits[first + i] - '0';
    out[i] = -1.0 + 2.0 * static_cast<double>(digit) / 9.0;
  }
  return out;
}

/// Known reference waveform of length L >= 64 with non-zero energy.
class EtalonSignal {
 public:
  explicit EtalonSignal(std::vector<Complex> samples) : samples_(std::move(samples)) {
    if (samples_.size() < kMinEtalonLength) {
      fail(ErrorKind::kInsufficientSamples,
           "etalon needs L >= " + std::to_string(kMinEtalonLength));
    }
    for (const Complex& s : samples_) {
      if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
        fail(ErrorKind::kNonFiniteInput, "etalon");
      }
      energy_ += std::norm(s);
    }
    if (!(energy_ > 0.0)) fail(ErrorKind::kZeroGain, "etalon has zero energy");
  }

  std::span<const Complex> samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double energy() const noexcept { return energy_; }
  double rms() const noexcept { return std::sqrt(energy_ / static_cast<double>(samples_.size())); }

 private:
  std::vector<Complex> samples_;
  double energy_ = 0.0;
};

enum class EtalonLayout {
  kComplexIQ,  // I from digit block 0, Q from digit block 1
  kRealOnly,   // I from digit block 0, Q = 0
};

inline EtalonSignal make_transnoise_etalon(std::size_t length = kDefaultFrameLength,
                                           EtalonLayout layout = EtalonLayout::kComplexIQ) {
  const auto in_phase = gen_transnoise(0, length);
  std::vector<double> quadrature(length, 0.0);
  if (layout == EtalonLayout::kComplexIQ) quadrature = gen_transnoise(1, length);
  std::vector<Complex> samples(length);
  for (std::size_t i = 0; i < length; ++i) samples[i] = {in_phase[i], quadrature[i]};
  return EtalonSignal(std::move(samples));
}

struct IQFrame {
  std::vector<Complex> samples;
  std::optional<int> source_label;
  std::size_t start = 0;           // integer offset in the source stream
  double fractional_offset = 0.0;  // parabolic peak refinement, in samples
};

/// Transmitter and channel imperfections applied by simulate_device. All-zero
/// fields with no SNR describe an ideal device.
struct ImpairmentProfile {
  double gain_imbalance = 0.0;      // relative I/Q amplitude mismatch
  double quadrature_error = 0.0;    // radians
  double phase_noise_rms = 0.0;     // radians, i.i.d. per sample
  double cubic_nonlinearity = 0.0;  // x + c x |x|^2
  Complex dc_offset{0.0, 0.0};
  std::optional<double> snr_db;     // no additive noise when empty

  void validate() const {
    if (!(phase_noise_rms >= 0.0)) fail(ErrorKind::kInvalidArgument, "phase_noise_rms < 0");
    if (snr_db && !std::isfinite(*snr_db)) fail(ErrorKind::kInvalidArgument, "snr_db not finite");
    for (double v : {gain_imbalance, quadrature_error, phase_noise_rms, cubic_nonlinearity,
                     dc_offset.real(), dc_offset.imag()}) {
      if (!std::isfinite(v)) fail(ErrorKind::kInvalidArgument, "profile field not finite");
    }
  }
};

inline double mean_power(std::span<const Complex> xs) {
  if (xs.empty()) return 0.0;
  double sum = 0.0;
  for (const Complex& x : xs) sum += std::norm(x);
  return sum / static_cast<double>(xs.size());
}

/// Applies, in order: cubic nonlinearity, I/Q gain and quadrature imbalance,
/// DC offset, Gaussian phase noise and AWGN at `snr_db` relative to the power
/// of the impaired frame. Deterministic for a given seed.
inline IQFrame simulate_device(const IQFrame& clean, const ImpairmentProfile& profile,
                               std::uint64_t seed) {
  profile.validate();
  IQFrame out = clean;
  const double c = profile.cubic_nonlinearity;
  const double gi = 1.0 + profile.gain_imbalance / 2.0;
  const double gq = 1.0 - profile.gain_imbalance / 2.0;
  const double cos_q = std::cos(profile.quadrature_error / 2.0);
  const double sin_q = std::sin(profile.quadrature_error / 2.0);
  for (Complex& x : out.samples) {
    x += c * x * std::norm(x);
    const double i = x.real();
    const double q = x.imag();
    x = {gi * (i * cos_q - q * sin_q), gq * (q * cos_q - i * sin_q)};
    x += profile.dc_offset;
  }

  Rng rng(seed);
  if (profile.phase_noise_rms > 0.0) {
    for (Complex& x : out.samples) x *= std::polar(1.0, profile.phase_noise_rms * standard_normal(rng));
  }
  if (profile.snr_db) {
    const double noise_power = mean_power(out.samples) / std::pow(10.0, *profile.snr_db / 10.0);
    const double sd = std::sqrt(noise_power / 2.0);
    for (Complex& x : out.samples) {
      const double re = sd * standard_normal(rng);
      x += Complex(re, sd * standard_normal(rng));
    }
  }
  return out;
}

struct SyncConfig {
  double min_peak_ratio = 3.0;     // acquisition peak over mean |correlation|
  std::size_t track_window = 4;    // +- samples searched around each expected frame start
};

namespace detail {

inline Complex correlate_at(std::span<const Complex> stream, std::span<const Complex> ref,
                            std::ptrdiff_t lag) {
  Complex acc{0.0, 0.0};
  const auto n = static_cast<std::ptrdiff_t>(stream.size());
  const auto l = static_cast<std::ptrdiff_t>(ref.size());
  const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -lag);
  const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(l, n - lag);
  for (std::ptrdiff_t j = lo; j < hi; ++j) {
    acc += stream[static_cast<std::size_t>(lag + j)] * std::conj(ref[static_cast<std::size_t>(j)]);
  }
  return acc;
}

inline double parabolic_offset(double left, double center, double right) {
  const double denom = left - 2.0 * center + right;
  if (!(denom < 0.0)) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

}  // namespace detail

/// Splits a stream of cyclic etalon repetitions into frames. The first frame is
/// acquired by the correlation peak over lags [0, L); every later frame is
/// re-acquired within +-track_window of the previous start plus L, which
/// follows slow sampling-clock drift. The fractional peak position is
/// recorded on each frame, not resampled.
inline std::vector<IQFrame> synchronize(std::span<const Complex> stream, const EtalonSignal& etalon,
                                        const SyncConfig& config = {}) {
  const std::size_t l = etalon.size();
  if (stream.size() < l) {
    fail(ErrorKind::kInsufficientSamples, "stream shorter than etalon");
  }
  const auto ref = etalon.samples();
  const std::size_t last_start = stream.size() - l;
  const std::size_t acquire_end = std::min(l - 1, last_start);

  // Peak over full-overlap lags; the mean runs over the zero-padded linear
  // correlation of the same window so a lone full-overlap lag is still judged.
  const auto first_lag = -static_cast<std::ptrdiff_t>(l - 1);
  const auto last_lag = static_cast<std::ptrdiff_t>(std::min(acquire_end + l - 1, stream.size() - 1));
  std::vector<double> magnitude(static_cast<std::size_t>(last_lag - first_lag + 1));
  for (std::ptrdiff_t lag = first_lag; lag <= last_lag; ++lag) {
    magnitude[static_cast<std::size_t>(lag - first_lag)] =
        std::abs(detail::correlate_at(stream, ref, lag));
  }
  const auto at = [&](std::ptrdiff_t lag) { return magnitude[static_cast<std::size_t>(lag - first_lag)]; };
  std::size_t best = 0;
  for (std::size_t lag = 1; lag <= acquire_end; ++lag) {
    if (at(static_cast<std::ptrdiff_t>(lag)) > at(static_cast<std::ptrdiff_t>(best))) best = lag;
  }
  const double mean_mag = std::accumulate(magnitude.begin(), magnitude.end(), 0.0) /
                          static_cast<double>(magnitude.size());
  const double peak = at(static_cast<std::ptrdiff_t>(best));
  if (!(mean_mag > 0.0) || !(peak / mean_mag >= config.min_peak_ratio)) {
    fail(ErrorKind::kSyncNotFound,
         "peak/mean " + std::to_string(mean_mag > 0.0 ? peak / mean_mag : 0.0));
  }

  const auto refine = [&](std::size_t lag) {
    if (lag == 0 || lag >= last_start) return 0.0;
    const auto s = static_cast<std::ptrdiff_t>(lag);
    return detail::parabolic_offset(std::abs(detail::correlate_at(stream, ref, s - 1)),
                                    std::abs(detail::correlate_at(stream, ref, s)),
                                    std::abs(detail::correlate_at(stream, ref, s + 1)));
  };
  const auto emit = [&](std::size_t start, std::vector<IQFrame>& frames) {
    IQFrame frame;
    frame.samples.assign(stream.begin() + static_cast<std::ptrdiff_t>(start),
                         stream.begin() + static_cast<std::ptrdiff_t>(start + l));
    frame.start = start;
    frame.fractional_offset = refine(start);
    frames.push_back(std::move(frame));
  };

  std::vector<IQFrame> frames;
  emit(best, frames);
  std::size_t start = best;
  while (start + l <= last_start) {
    const std::size_t expected = start + l;
    const std::size_t lo = expected - std::min(config.track_window, expected);
    const std::size_t hi = std::min(expected + config.track_window, last_start);
    std::size_t next = expected;
    double next_mag = -1.0;
    for (std::size_t lag = lo; lag <= hi; ++lag) {
      if (lag <= start) continue;
      const double m = std::abs(detail::correlate_at(stream, ref, static_cast<std::ptrdiff_t>(lag)));
      if (m > next_mag) {
        next_mag = m;
        next = lag;
      }
    }
    emit(next, frames);
    start = next;
  }
  return frames;
}

/// Per-sample phase of the error signal of one frame.
struct PhaseErrorSequence {
  TrendlessSequence phases;
  std::size_t frame_start = 0;
  double fractional_offset = 0.0;
};

/// Normalizes the frame by the complex least-squares gain against the
/// etalon, subtracts the etalon and returns arg(error) in (-pi, pi]. Error
/// samples at or below 1e-12 of the etalon RMS are treated as exact zeros and
/// get phase 0.
inline PhaseErrorSequence error_phase(const IQFrame& frame, const EtalonSignal& etalon) {
  const auto ref = etalon.samples();
  if (frame.samples.size() != ref.size()) {
    fail(ErrorKind::kLengthMismatch,
         "frame " + std::to_string(frame.samples.size()) + " vs etalon " + std::to_string(ref.size()));
  }
  // Extended precision keeps the cancellation in frame/g - etalon from
  // dominating the phase of small error samples.
  using Wide = std::complex<long double>;
  Wide cross{0.0L, 0.0L};
  for (std::size_t j = 0; j < ref.size(); ++j) {
    cross += Wide(frame.samples[j]) * std::conj(Wide(ref[j]));
  }
  const Wide gain = cross / static_cast<long double>(etalon.energy());
  const double floor = 1e-12 * etalon.rms();
  if (!(std::abs(gain) >= floor)) fail(ErrorKind::kZeroGain, "frame at " + std::to_string(frame.start));

  std::vector<double> phases(ref.size());
  for (std::size_t j = 0; j < ref.size(); ++j) {
    const Wide err = Wide(frame.samples[j]) / gain - Wide(ref[j]);
    if (std::abs(err) <= floor) {
      phases[j] = 0.0;
      continue;
    }
    const double phase = static_cast<double>(std::arg(err));
    phases[j] = phase <= -std::numbers::pi ? std::numbers::pi : phase;
  }
  return {TrendlessSequence(std::move(phases)), frame.start, frame.fractional_offset};
}

/// synchronize followed by error_phase on every frame, in stream order.
inline std::vector<PhaseErrorSequence> run_capture_pipeline(std::span<const Complex> stream,
                                                            const EtalonSignal& etalon,
                                                            const SyncConfig& config = {}) {
  std::vector<PhaseErrorSequence> out;
  for (const IQFrame& frame : synchronize(stream, etalon, config)) {
    out.push_back(error_phase(frame, etalon));
  }
  return out;
}

}  // namespace caponef
