#pragma once

/// @file experiment.hpp
/// Synthetic capture generation and feature extraction shared by the CLI and
/// the acceptance suite: simulated transmitters repeat the trans-noise
/// etalon, and each received stream is synchronized, reduced to error-phase
/// sequences and described by P1..P10.

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "caponef/dataset.hpp"
#include "caponef/error.hpp"
#include "caponef/random.hpp"
#include "caponef/signal_pipeline.hpp"
#include "caponef/tls_features.hpp"

namespace caponef::experiment {

struct DeviceSpec {
  int label = 0;
  std::string name;
  ImpairmentProfile profile;
};

/// Built-in transmitters with distinct analog imperfections. The first two
/// are the default pair; up to four are available.
inline std::vector<DeviceSpec> builtin_devices(std::size_t count, std::optional<double> snr_db) {
  // Same transmitter model with small part-to-part spread, so that the
  // devices are close but separable at 20 dB.
  std::vector<DeviceSpec> all{
      {0, "tx0", {.gain_imbalance = 0.12, .quadrature_error = 0.10, .phase_noise_rms = 0.010,
                  .cubic_nonlinearity = -0.04, .dc_offset = {0.04, -0.02}, .snr_db = snr_db}},
      {1, "tx1", {.gain_imbalance = 0.08, .quadrature_error = 0.13, .phase_noise_rms = 0.020,
                  .cubic_nonlinearity = -0.02, .dc_offset = {0.03, -0.012}, .snr_db = snr_db}},
      {2, "tx2", {.gain_imbalance = 0.15, .quadrature_error = 0.07, .phase_noise_rms = 0.015,
                  .cubic_nonlinearity = -0.06, .dc_offset = {0.05, -0.03}, .snr_db = snr_db}},
      {3, "tx3", {.gain_imbalance = 0.10, .quadrature_error = 0.08, .phase_noise_rms = 0.005,
                  .cubic_nonlinearity = -0.03, .dc_offset = {0.035, -0.028}, .snr_db = snr_db}},
  };
  if (count < 2 || count > all.size()) {
    fail(ErrorKind::kInvalidArgument, "device count must be in [2, " + std::to_string(all.size()) + "]");
  }
  all.resize(count);
  return all;
}

struct CaptureConfig {
  std::size_t frames = 100;             // etalon repetitions per device
  std::size_t segment_frames = 500;     // frames sharing one channel gain
  double slip_probability = 0.002;      // chance of one extra sample between frames
};

/// One device's received stream: a random leading stretch of receiver noise
/// shorter than L, then `frames` impaired etalon repetitions. Each segment of
/// frames sees its own random complex channel gain, and an occasional extra
/// sample models a sampling-clock slip.
inline std::vector<Complex> simulate_capture(const EtalonSignal& etalon, const DeviceSpec& device,
                                             const CaptureConfig& config, std::uint64_t seed) {
  if (config.frames == 0) fail(ErrorKind::kInvalidArgument, "frames must be >= 1");
  if (config.segment_frames == 0) fail(ErrorKind::kInvalidArgument, "segment_frames must be >= 1");
  Rng rng(seed);
  const std::size_t l = etalon.size();
  const double noise_sd = device.profile.snr_db
                              ? std::sqrt(mean_power(etalon.samples()) / std::pow(10.0, *device.profile.snr_db / 10.0) / 2.0)
                              : 0.0;
  const auto noise_sample = [&] { return Complex(noise_sd * standard_normal(rng), noise_sd * standard_normal(rng)); };

  std::vector<Complex> stream;
  stream.reserve(l * (config.frames + 1));
  const std::size_t lead = uniform_index(rng, l);
  for (std::size_t i = 0; i < lead; ++i) stream.push_back(noise_sample());

  IQFrame clean;
  clean.samples.assign(etalon.samples().begin(), etalon.samples().end());
  Complex channel{1.0, 0.0};
  for (std::size_t f = 0; f < config.frames; ++f) {
    if (f % config.segment_frames == 0) {
      channel = std::polar(0.5 + 1.5 * uniform01(rng), 2.0 * std::numbers::pi * uniform01(rng));
    }
    if (f > 0 && uniform01(rng) < config.slip_probability) stream.push_back(channel * noise_sample());
    const IQFrame impaired = simulate_device(clean, device.profile, derive_seed(seed, f));
    for (const Complex& x : impaired.samples) stream.push_back(channel * x);
  }
  return stream;
}

struct ExtractionReport {
  std::size_t frames = 0;
  std::size_t extracted = 0;
  std::size_t skipped = 0;
};

/// Synchronizes one stream and appends a labeled feature row per frame whose
/// error phase yields all ten parameters. Frames that fail (no roots,
/// one-sided or constant error) are counted as skipped.
inline ExtractionReport extract_stream(std::span<const Complex> stream, const EtalonSignal& etalon, int label,
                                       LabeledFeatureSet& out, const SyncConfig& sync = {}) {
  ExtractionReport report;
  for (const IQFrame& frame : synchronize(stream, etalon, sync)) {
    ++report.frames;
    try {
      const auto phases = error_phase(frame, etalon);
      out.add_row(label, extract_features(phases.phases));
      ++report.extracted;
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::kZeroGain:
        case ErrorKind::kDegenerateSequence:
        case ErrorKind::kOneSidedSequence:
        case ErrorKind::kDegenerateAsymmetry:
        case ErrorKind::kInsufficientRoots:
        case ErrorKind::kDegenerateFit:
        case ErrorKind::kNonFiniteInput:
          ++report.skipped;
          break;
        default:
          throw;
      }
    }
  }
  return report;
}

/// Simulates every device and extracts its features into one set.
inline LabeledFeatureSet synthetic_feature_set(const std::vector<DeviceSpec>& devices, const EtalonSignal& etalon,
                                               const CaptureConfig& config, std::uint64_t seed) {
  LabeledFeatureSet set;
  for (std::size_t d = 0; d < devices.size(); ++d) {
    const auto stream = simulate_capture(etalon, devices[d], config, derive_seed(seed, d));
    extract_stream(stream, etalon, devices[d].label, set);
  }
  return set;
}

}  // namespace caponef::experiment
