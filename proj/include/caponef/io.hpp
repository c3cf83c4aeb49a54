#pragma once

/// @file io.hpp
/// File formats: raw IQ streams (float32 little-endian, interleaved I,Q, no
/// header), the feature CSV and small CSV helpers. Every double written to
/// text uses the shortest representation that round-trips exactly.

#include <array>
#include <bit>
#include <charconv>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "caponef/dataset.hpp"
#include "caponef/error.hpp"

namespace caponef::io {

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    fail(ErrorKind::kParseError, "not a number: '" + std::string(text) + "'");
  }
  return v;
}

inline long long parse_integer(std::string_view text) {
  long long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    fail(ErrorKind::kParseError, "not an integer: '" + std::string(text) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temporary file and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIoError, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorKind::kIoError, "write failed " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::kIoError, "rename to " + path.string() + ": " + ec.message());
}

inline std::string encode_iq(std::span<const std::complex<double>> samples) {
  std::string bytes;
  bytes.reserve(samples.size() * 8);
  const auto put = [&bytes](double v) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
  };
  for (const auto& s : samples) {
    put(s.real());
    put(s.imag());
  }
  return bytes;
}

inline std::vector<std::complex<double>> decode_iq(std::string_view bytes, std::string_view what = "IQ data") {
  if (bytes.size() % 8 != 0) {
    fail(ErrorKind::kParseError,
         std::string(what) + ": byte length " + std::to_string(bytes.size()) +
             " is not a whole number of I/Q float32 pairs");
  }
  const auto get = [&bytes](std::size_t offset) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + b])) << (8 * b);
    }
    return static_cast<double>(std::bit_cast<float>(bits));
  };
  std::vector<std::complex<double>> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {get(8 * i), get(8 * i + 4)};
  return out;
}

inline std::vector<std::complex<double>> read_iq_file(const std::filesystem::path& path) {
  return decode_iq(read_text_file(path), path.string());
}

inline void write_iq_file(const std::filesystem::path& path, std::span<const std::complex<double>> samples) {
  write_file_atomic(path, encode_iq(samples));
}

/// Etalon files hold exactly L complex samples (2L floats).
inline std::vector<std::complex<double>> read_etalon_file(const std::filesystem::path& path,
                                                          std::size_t frame_length) {
  auto samples = read_iq_file(path);
  if (samples.size() != frame_length) {
    fail(ErrorKind::kParseError, path.string() + ": expected " + std::to_string(2 * frame_length) +
                                     " floats, found " + std::to_string(2 * samples.size()));
  }
  return samples;
}

/// Header `label,<feature names...>`, one row per sample.
inline std::string format_feature_csv(const LabeledFeatureSet& set) {
  std::string out = "label";
  for (const auto& n : set.feature_names()) out += "," + n;
  out += "\n";
  for (std::size_t i = 0; i < set.rows(); ++i) {
    out += std::to_string(set.label(i));
    for (double v : set.row(i)) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline LabeledFeatureSet parse_feature_csv(std::string_view text, std::string_view source = "features") {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  const auto next_line = [&](std::string_view& line) {
    while (pos < text.size()) {
      const std::size_t end = std::min(text.find('\n', pos), text.size());
      line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (!line.empty()) return true;
    }
    return false;
  };
  std::string_view line;
  if (!next_line(line)) fail(ErrorKind::kEmptyInput, std::string(source) + ": no header");
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "label") {
    fail(ErrorKind::kParseError, std::string(source) + ": header must start with 'label'");
  }
  std::vector<std::string> names(header.begin() + 1, header.end());
  LabeledFeatureSet set(std::move(names));
  std::vector<double> row(set.features());
  while (next_line(line)) {
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      fail(ErrorKind::kParseError, std::string(source) + ":" + std::to_string(line_no) + ": expected " +
                                       std::to_string(header.size()) + " cells");
    }
    const auto label = static_cast<int>(parse_integer(cells[0]));
    for (std::size_t f = 0; f < row.size(); ++f) row[f] = parse_double(cells[f + 1]);
    set.add_row(label, row);
  }
  return set;
}

inline LabeledFeatureSet read_feature_csv(const std::filesystem::path& path) {
  return parse_feature_csv(read_text_file(path), path.string());
}

}  // namespace caponef::io
