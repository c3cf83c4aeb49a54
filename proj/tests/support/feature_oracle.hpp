#pragma once

// Brute-force reference for the ten parameters, written independently of
// caponef/tls_features.hpp: long double arithmetic, no sorting for P7,
// explicit walk arrays for P4/P8 and normal equations for the root line.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace caponef::oracle {

struct OracleFeatures {
  std::array<long double, 10> p{};
};

inline OracleFeatures brute_force_features(const std::vector<double>& y) {
  const std::size_t n = y.size();
  long double sum = 0.0L;
  for (double v : y) sum += v;
  const long double mean = sum / static_cast<long double>(n);

  std::vector<long double> dy(n);
  for (std::size_t i = 0; i < n; ++i) dy[i] = static_cast<long double>(y[i]) - mean;

  long double dmax = dy[0];
  long double dmin = dy[0];
  for (long double d : dy) {
    if (d > dmax) dmax = d;
    if (d < dmin) dmin = d;
  }

  OracleFeatures out;
  out.p[0] = mean;
  out.p[1] = dmax - dmin;
  out.p[2] = dmax - std::fabs(dmin);

  std::vector<long double> walk(n + 1, 0.0L);
  for (std::size_t i = 0; i < n; ++i) walk[i + 1] = walk[i] + dy[i];
  long double wmax = walk[0];
  long double wmin = walk[0];
  for (long double w : walk) {
    if (w > wmax) wmax = w;
    if (w < wmin) wmin = w;
  }
  out.p[3] = wmax - wmin;
  out.p[4] = dmax / (-dmin);

  long double last_up = 0.0L;
  long double last_dn = 0.0L;
  for (std::size_t i = n; i-- > 0;) {
    if (last_up == 0.0L && dy[i] > 0.0L) last_up = static_cast<long double>(i + 1);
    if (last_dn == 0.0L && dy[i] < 0.0L) last_dn = static_cast<long double>(i + 1);
  }
  out.p[5] = last_up - last_dn;

  long double positive = 0.0L;
  for (long double d : dy) positive += d > 0.0L ? d : 0.0L;
  out.p[6] = positive;

  const long double range = dmax - dmin;
  std::vector<long double> nwalk(n + 1, 0.0L);
  for (std::size_t i = 0; i < n; ++i) nwalk[i + 1] = nwalk[i] + dy[i] / range;
  long double nmax = 0.0L;
  long double nmin = 0.0L;
  for (long double w : nwalk) {
    if (w > nmax) nmax = w;
    if (w < nmin) nmin = w;
  }
  out.p[7] = nmax - nmin;

  std::vector<long double> roots;
  for (std::size_t j = 0; j < n; ++j) {
    const int s0 = (dy[j] > 0) - (dy[j] < 0);
    if (s0 == 0) {
      const bool prev_zero = j > 0 && dy[j - 1] == 0.0L;
      if (!prev_zero) roots.push_back(static_cast<long double>(j));
    } else if (j + 1 < n) {
      const int s1 = (dy[j + 1] > 0) - (dy[j + 1] < 0);
      if (s1 == -s0) {
        const long double t = std::fabs(dy[j]) / (std::fabs(dy[j]) + std::fabs(dy[j + 1]));
        roots.push_back(static_cast<long double>(j) + t);
      }
    }
  }
  long double sk = 0, skk = 0, sr = 0, skr = 0;
  const long double kk = static_cast<long double>(roots.size());
  for (std::size_t i = 0; i < roots.size(); ++i) {
    const long double k = static_cast<long double>(i + 1);
    sk += k;
    skk += k * k;
    sr += roots[i];
    skr += k * roots[i];
  }
  const long double a = (kk * skr - sk * sr) / (kk * skk - sk * sk);
  const long double b = (sr - a * sk) / kk;
  const long double pi = std::numbers::pi_v<long double>;
  out.p[8] = pi / a;
  long double phase = pi * b / a - pi / 2.0L;
  phase -= pi * std::floor(phase / pi);
  out.p[9] = phase;
  return out;
}

}  // namespace caponef::oracle
