#pragma once

// Slow, independent reference computations used as test oracles. None of
// them calls into the library.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

using ld = long double;

// Gaussian elimination with partial pivoting on a 3x3 system.
inline std::array<ld, 3> solve3(std::array<std::array<ld, 3>, 3> a, std::array<ld, 3> b) {
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r) {
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (int r = c + 1; r < 3; ++r) {
      const ld f = a[r][c] / a[c][c];
      for (int k = c; k < 3; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::array<ld, 3> x{};
  for (int r = 2; r >= 0; --r) {
    ld s = b[r];
    for (int k = r + 1; k < 3; ++k) s -= a[r][k] * x[k];
    x[r] = s / a[r][r];
  }
  return x;
}

// Root of an increasing function on [lo, hi] by plain bisection.
inline ld bisect(const std::function<ld(ld)>& f, ld lo, ld hi, int iters = 200) {
  for (int i = 0; i < iters; ++i) {
    const ld mid = (lo + hi) / 2;
    if (f(mid) < 0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return (lo + hi) / 2;
}

// Hann-windowed single-sided amplitude spectrum by direct DFT.
inline std::vector<double> dft_amplitude(std::span<const double> x) {
  const std::size_t n = x.size();
  const ld two_pi = 2 * std::numbers::pi_v<ld>;
  std::vector<ld> w(n);
  ld sum_w = 0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5L - 0.5L * std::cos(two_pi * static_cast<ld>(i) / static_cast<ld>(n));
    sum_w += w[i];
  }
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<ld> acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const ld ang = -two_pi * static_cast<ld>(k * i % n) / static_cast<ld>(n);
      acc += static_cast<ld>(x[i]) * w[i] * std::complex<ld>(std::cos(ang), std::sin(ang));
    }
    const ld scale = (k == 0 || k == n / 2) ? 1 / sum_w : 2 / sum_w;
    out[k] = static_cast<double>(std::abs(acc) * scale);
  }
  return out;
}

// Scalar random-walk Kalman recursion written out step by step.
struct KalmanTrace {
  std::vector<double> x;
  std::vector<double> p;
};

inline KalmanTrace kalman(double x0, double p0, double q, double r, std::span<const double> z) {
  KalmanTrace tr;
  ld x = x0;
  ld p = p0;
  for (double zi : z) {
    const ld pm = p + q;
    const ld k = pm / (pm + r);
    x = x + k * (zi - x);
    p = (1 - k) * pm;
    tr.x.push_back(static_cast<double>(x));
    tr.p.push_back(static_cast<double>(p));
  }
  return tr;
}

// Bitwise reflected CRC-32 (polynomial 0xEDB88320).
inline std::uint32_t crc32(std::span<const std::uint8_t> bytes, std::uint32_t crc = 0) {
  crc = ~crc;
  for (std::uint8_t b : bytes) {
    crc ^= b;
    for (int i = 0; i < 8; ++i) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

// Shaft angle of piecewise-linear rpm by composite Simpson integration of
// the instantaneous speed.
struct Segment {
  double duration;
  double rpm0;
  double rpm1;
};

inline ld rpm_at(std::span<const Segment> segs, ld t) {
  ld start = 0;
  for (const auto& s : segs) {
    if (t < start + s.duration) return s.rpm0 + (s.rpm1 - s.rpm0) * (t - start) / s.duration;
    start += s.duration;
  }
  return segs.back().rpm1;
}

inline ld angle_by_integration(std::span<const Segment> segs, ld t, int steps = 20000) {
  const ld two_pi = 2 * std::numbers::pi_v<ld>;
  auto omega = [&](ld u) { return rpm_at(segs, u) * two_pi / 60; };
  // Integrate piecewise so segment kinks never fall inside a Simpson panel.
  std::vector<ld> knots{0};
  ld acc_t = 0;
  for (const auto& s : segs) {
    acc_t += s.duration;
    if (acc_t < t) knots.push_back(acc_t);
  }
  knots.push_back(t);
  ld total = 0;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const ld a = knots[k];
    const ld b = knots[k + 1];
    const ld h = (b - a) / steps;
    ld s = omega(a) + omega(b);
    for (int i = 1; i < steps; ++i) s += omega(a + h * i) * (i % 2 ? 4 : 2);
    total += s * h / 3;
  }
  return total;
}

// Per-window mean the way an archive batch should summarize a sampled signal.
inline std::vector<std::pair<std::uint64_t, double>> window_means(double t0, double rate,
                                                                  std::span<const double> v,
                                                                  double period) {
  std::vector<std::pair<std::uint64_t, double>> out;
  std::uint64_t cur = ~std::uint64_t{0};
  ld sum = 0;
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const ld t = static_cast<ld>(t0) + static_cast<ld>(i) / rate;
    const auto w = static_cast<std::uint64_t>(std::floor(t / period + 1e-9L));
    if (w != cur && n) {
      out.emplace_back(cur, static_cast<double>(sum / n));
      sum = 0;
      n = 0;
    }
    cur = w;
    sum += v[i];
    ++n;
  }
  if (n) out.emplace_back(cur, static_cast<double>(sum / n));
  return out;
}

}  // namespace oracle
