#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "motormon/error.hpp"
#include "motormon/preprocess.hpp"
#include "oracles.hpp"

using namespace motormon;

namespace {

double variance(const std::vector<double>& v, std::size_t from = 0) {
  double mean = 0.0;
  for (std::size_t i = from; i < v.size(); ++i) mean += v[i];
  mean /= static_cast<double>(v.size() - from);
  double s = 0.0;
  for (std::size_t i = from; i < v.size(); ++i) s += (v[i] - mean) * (v[i] - mean);
  return s / static_cast<double>(v.size() - from - 1);
}

}  // namespace

TEST(Kalman, ConvergesMonotonicallyOnConstantInput) {
  KalmanState s{0.0, 100.0, 0.0, 1.0};
  const std::vector<double> z(50, 3.0);
  const auto ref = oracle::kalman(0.0, 100.0, 0.0, 1.0, z);
  double prev_err = 3.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    auto step = kalman_step(s, z[i]);
    EXPECT_GT(step.gain, 0.0);
    EXPECT_LT(step.gain, 1.0);
    EXPECT_NEAR(step.filtered, ref.x[i], 1e-12);
    EXPECT_NEAR(step.state.p, ref.p[i], 1e-12);
    const double err = std::abs(step.filtered - 3.0);
    EXPECT_LE(err, prev_err);
    prev_err = err;
    s = step.state;
  }
  EXPECT_LT(std::abs(s.x_hat - 3.0), 1e-3);
}

TEST(Kalman, TinyMeasurementNoiseTrustsMeasurement) {
  KalmanState s{0.0, 1.0, 0.0, 1e-12};
  auto step = kalman_step(s, 7.5);
  EXPECT_NEAR(step.filtered, 7.5, 1e-9);
}

TEST(Kalman, HugeProcessNoiseTrustsMeasurement) {
  KalmanState s{0.0, 1.0, 1e12, 1.0};
  auto step = kalman_step(s, -4.0);
  EXPECT_NEAR(step.filtered, -4.0, 1e-9);
}

TEST(Kalman, NonFiniteRejected) {
  KalmanState s{1.0, 1.0, 0.0, 1.0};
  EXPECT_THROW(kalman_step(s, NAN), Error);
  EXPECT_THROW(kalman_step(s, INFINITY), Error);
}

TEST(Physical, BypassIsAffine) {
  ChannelSpec spec{3, ChannelKind::Current, 100.0, 2.0, 1.0, {false, 0.0, 1.0}};
  SampleFrame f{3, 1.5, 100.0, {3.0, -1.0, 0.25}, 11};
  auto r = to_physical(f, spec, {});
  EXPECT_EQ(r.frame.values, (std::vector<double>{7.0, -1.0, 1.5}));
  EXPECT_EQ(r.frame.t0, 1.5);
  EXPECT_EQ(r.frame.sequence, 11u);
  EXPECT_FALSE(r.state.kalman.has_value());
}

TEST(Physical, HugeQPassesInputThrough) {
  ChannelSpec spec{3, ChannelKind::Voltage, 100.0, 1.0, 0.0, {true, 1e12, 1.0}};
  SampleFrame f{3, 0.0, 100.0, {1.0, 5.0, -2.0, 8.0}, 0};
  auto r = to_physical(f, spec, {});
  for (std::size_t i = 0; i < f.values.size(); ++i) EXPECT_NEAR(r.frame.values[i], f.values[i], 1e-9);
}

TEST(Physical, FilteredValueThenAffine) {
  // First sample seeds the filter, so the filtered value equals it.
  ChannelSpec spec{4, ChannelKind::Temperature, 10.0, 2.0, 1.0, {true, 0.0, 1.0}};
  SampleFrame f{4, 0.0, 10.0, {3.0}, 0};
  auto r = to_physical(f, spec, {});
  EXPECT_DOUBLE_EQ(r.frame.values[0], 7.0);
}

TEST(Physical, StateCarriesAcrossFrames) {
  ChannelSpec spec{4, ChannelKind::Temperature, 10.0, 1.0, 0.0, {true, 1e-3, 0.5}};
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(20.0, 0.7);
  std::vector<double> all(300);
  for (auto& v : all) v = n(rng);

  SampleFrame whole{4, 0.0, 10.0, all, 0};
  auto one = to_physical(whole, spec, {});

  ChannelFilterState st;
  std::vector<double> pieces;
  for (std::size_t at = 0; at < all.size(); at += 37) {
    const auto end = std::min(all.size(), at + 37);
    SampleFrame f{4, static_cast<double>(at) / 10.0, 10.0, {all.begin() + at, all.begin() + end}, at};
    auto r = to_physical(f, spec, st);
    st = r.state;
    pieces.insert(pieces.end(), r.frame.values.begin(), r.frame.values.end());
  }
  EXPECT_EQ(pieces, one.frame.values);

  // Seeded with x = z0, p = r, then the plain recursion.
  const auto ref = oracle::kalman(all[0], 0.5, 1e-3, 0.5, std::span(all).subspan(1));
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_NEAR(one.frame.values[i], ref.x[i - 1], 1e-12);
}

TEST(Physical, NoisyConstantVarianceDrops) {
  ChannelSpec spec{6, ChannelKind::Current, 1000.0, 1.0, 0.0, {true, 1e-6, 1.0}};
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n(5.0, 1.0);
  std::vector<double> z(10000);
  for (auto& v : z) v = n(rng);
  auto r = to_physical({6, 0.0, 1000.0, z, 0}, spec, {});
  EXPECT_LT(variance(r.frame.values), 0.8 * variance(z));
}

TEST(Physical, NonFiniteFrameRejectedStateUnchanged) {
  ChannelSpec spec{6, ChannelKind::Current, 1000.0, 1.0, 0.0, {true, 1e-4, 1.0}};
  auto first = to_physical({6, 0.0, 1000.0, {1.0, 2.0}, 0}, spec, {});
  try {
    to_physical({6, 0.002, 1000.0, {1.0, NAN}, 1}, spec, first.state);
    FAIL() << "expected rejection";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::DataQuality);
  }
  auto again = to_physical({6, 0.002, 1000.0, {3.0}, 1}, spec, first.state);
  auto ref = kalman_step(*first.state.kalman, 3.0);
  EXPECT_DOUBLE_EQ(again.frame.values[0], ref.filtered);
}

TEST(Physical, WrongChannelIsRoutingError) {
  ChannelSpec spec{6, ChannelKind::Current, 1000.0, 1.0, 0.0, {}};
  try {
    to_physical({7, 0.0, 1000.0, {1.0}, 0}, spec, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::Routing);
  }
}

TEST(Physical, ReplayIsExact) {
  ChannelSpec spec{6, ChannelKind::Current, 1000.0, 1.5, -2.0, {true, 1e-4, 1.0}};
  std::vector<double> z{1, 4, 2, 8, 5, 7};
  auto a = to_physical({6, 0.0, 1000.0, z, 0}, spec, {});
  auto b = to_physical({6, 0.0, 1000.0, z, 0}, spec, {});
  EXPECT_EQ(a.frame.values, b.frame.values);
}
