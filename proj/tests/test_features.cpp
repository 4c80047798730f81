#include <catch2/catch_amalgamated.hpp>
#include <random>
#include <sstream>

#include "ndec/features.hpp"
#include "ndec/synth.hpp"

using namespace ndec;

namespace {

Session blank_session(std::size_t n_samples, std::uint32_t n_probes = 1) {
  Session s;
  s.n_probes = n_probes;
  s.vx.assign(n_samples, 0.0f);
  s.vy.assign(n_samples, 0.0f);
  s.tx.assign(n_samples, 0.0f);
  s.ty.assign(n_samples, 0.0f);
  s.spikes.assign(n_probes, {});
  return s;
}

/// Spikes as (sample index, fraction of a stride); 0 puts a spike on the grid.
using SpikePlan = std::vector<std::vector<std::pair<std::size_t, double>>>;

SpikePlan random_plan(std::uint64_t seed, std::size_t n_samples, std::uint32_t n_probes) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  SpikePlan plan(n_probes);
  for (auto& probe : plan) {
    for (int i = 0; i < 120; ++i) probe.emplace_back(rng() % (n_samples - 1), frac(rng));
    for (int i = 0; i < 10; ++i) probe.emplace_back(rng() % n_samples, 0.0);
  }
  return plan;
}

Session session_from_plan(const SpikePlan& plan, std::size_t n_samples, std::size_t shift = 0) {
  Session s = blank_session(n_samples + shift, static_cast<std::uint32_t>(plan.size()));
  for (std::size_t p = 0; p < plan.size(); ++p) {
    for (auto [k, f] : plan[p]) s.spikes[p].push_back(s.sample_time(k + shift) + f * s.period());
    std::sort(s.spikes[p].begin(), s.spikes[p].end());
  }
  return s;
}

Session random_session(std::uint64_t seed, std::size_t n_samples = 600, std::uint32_t n_probes = 4) {
  return session_from_plan(random_plan(seed, n_samples, n_probes), n_samples);
}

/// Brute-force count over a half-open interval.
std::size_t brute_count(const std::vector<double>& train, double lo, double hi) {
  std::size_t n = 0;
  for (double x : train) n += (x > lo && x <= hi);
  return n;
}

}  // namespace

TEST_CASE("firing rate counts the half-open window") {
  Session s = blank_session(100);
  s.spikes[0] = {0.01, 0.05};
  CHECK(firing_rate(s, 0, 0.2, 0.2) == 2);
  s.spikes[0] = {};
  CHECK(firing_rate(s, 0, 0.2, 0.2) == 0);
  s.spikes[0] = {0.125};
  CHECK(firing_rate(s, 0, 0.375, 0.25) == 0);  // exactly at t_k - window
  CHECK(firing_rate(s, 0, 0.125, 0.25) == 1);  // exactly at t_k
  CHECK_THROWS_AS(firing_rate(s, 1, 0.1, 0.2), Error);
}

TEST_CASE("summation counts spikes in the window") {
  Session s = blank_session(100);
  s.spikes[0] = {0.05, 0.1, 0.15, 0.18, 0.2};
  const auto f = extract_features(s, FeatureConfig::summation(0.2));
  CHECK(f.at(50, 0) == 5);  // t = 0.2 s
  CHECK(f.at(51, 0) == 5);
  CHECK(f.at(25, 0) == 2);  // t = 0.1 s, window reaches before t = 0
}

TEST_CASE("windows before the first sample are zero padded") {
  Session s = blank_session(10);
  s.spikes[0] = {0.0};
  const auto f = extract_features(s, FeatureConfig::summation(0.2));
  CHECK(f.at(0, 0) == 1);  // spike at t_0 belongs to (t_0 - W, t_0]
  CHECK(f.n_records == s.n_samples());
}

TEST_CASE("summation features match a brute-force count") {
  const Session s = random_session(1);
  for (double w : {0.004, 0.032, 0.2, 0.017}) {
    const auto f = extract_features(s, FeatureConfig::summation(w));
    for (std::size_t k = 0; k < f.n_records; ++k)
      for (std::size_t p = 0; p < s.n_probes; ++p) {
        const double t = s.sample_time(k);
        const double whole = std::round(w * s.sample_rate);
        // Grid-aligned windows start exactly on an earlier grid point.
        const double lo = std::abs(w * s.sample_rate - whole) < 1e-9 && k >= whole
                              ? s.sample_time(k - static_cast<std::size_t>(whole))
                              : t - w;
        REQUIRE(f.at(k, p) == brute_count(s.spikes[p], lo, t));
      }
  }
}

TEST_CASE("sub-windows tile the summation window") {
  const Session s = random_session(2);
  const auto sum = extract_features(s, FeatureConfig::summation(0.2));
  const auto sub = extract_features(s, FeatureConfig::subwindow(0.2, 7));
  REQUIRE(sub.dim() == 7 * s.n_probes);
  for (std::size_t k = 0; k < sum.n_records; ++k)
    for (std::size_t p = 0; p < s.n_probes; ++p) {
      std::size_t total = 0;
      for (std::size_t j = 0; j < 7; ++j) total += sub.at(k, p, j);
      REQUIRE(total == sum.at(k, p));
    }
}

TEST_CASE("sub-window j covers the j-th seventh of the window") {
  Session s = blank_session(100);
  // 200 ms window ending at t = 0.2 s; the first seventh is (0, 0.02857].
  s.spikes[0] = {0.01, 0.199};
  const auto f = extract_features(s, FeatureConfig::subwindow(0.2, 7));
  CHECK(f.at(50, 0, 0) == 1);
  CHECK(f.at(50, 0, 6) == 1);
  for (std::size_t j = 1; j < 6; ++j) CHECK(f.at(50, 0, j) == 0);
}

TEST_CASE("streaming features are the Heaviside of 4 ms counts") {
  const Session s = random_session(3);
  const auto st = extract_features(s, FeatureConfig::streaming());
  const auto sum = extract_features(s, FeatureConfig::summation(kLabelPeriod));
  for (std::size_t i = 0; i < st.values.size(); ++i) {
    REQUIRE(st.values[i] <= 1);
    REQUIRE(st.values[i] == (sum.values[i] > 0 ? 1 : 0));
  }
}

TEST_CASE("feature config validation") {
  CHECK_THROWS_AS(validate(FeatureConfig{FeatureMode::Summation, 0.2, 7}), Error);
  try {
    validate(FeatureConfig{FeatureMode::Streaming, kLabelPeriod, 3});
    FAIL("expected ConfigMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigMismatch);
  }
  CHECK_THROWS_AS(validate(FeatureConfig{FeatureMode::Streaming, 0.2, 1}), Error);
  CHECK_THROWS_AS(validate(FeatureConfig::summation(0.001)), Error);
  CHECK_NOTHROW(validate(FeatureConfig::summation(0.032)));
}

TEST_CASE("delaying spikes by whole strides shifts the features") {
  const std::size_t n = 600, shift = 13;
  const SpikePlan plan = random_plan(4, n, 4);
  const Session s = session_from_plan(plan, n);
  const Session d = session_from_plan(plan, n, shift);
  for (const auto& cfg : {FeatureConfig::summation(0.2), FeatureConfig::subwindow(0.2, 7),
                          FeatureConfig::streaming(), FeatureConfig::summation(0.032)}) {
    const auto a = extract_features(s, cfg);
    const auto b = extract_features(d, cfg);
    std::size_t mismatches = 0;
    for (std::size_t k = 0; k < a.n_records; ++k)
      for (std::size_t i = 0; i < a.dim(); ++i) mismatches += a.record(k)[i] != b.record(k + shift)[i];
    CHECK(mismatches == 0);
  }
}

TEST_CASE("adding a spike never lowers a count") {
  std::mt19937_64 rng(5);
  Session s = random_session(6);
  const auto before = extract_features(s, FeatureConfig::subwindow(0.2, 7));
  for (int i = 0; i < 20; ++i) {
    auto& train = s.spikes[rng() % s.n_probes];
    train.push_back(std::uniform_real_distribution<double>(0, s.sample_time(s.n_samples() - 1))(rng));
    std::sort(train.begin(), train.end());
  }
  const auto after = extract_features(s, FeatureConfig::subwindow(0.2, 7));
  for (std::size_t i = 0; i < before.values.size(); ++i) REQUIRE(after.values[i] >= before.values[i]);
}

TEST_CASE("feature CSV has one row per sample") {
  Session s = blank_session(5, 2);
  s.spikes[1] = {0.004};
  const auto f = extract_features(s, FeatureConfig::subwindow(0.008, 2));
  std::ostringstream os;
  write_features_csv(os, s, f);
  std::istringstream in(os.str());
  std::string header, row;
  std::getline(in, header);
  CHECK(header == "sample_time,p0_w0,p0_w1,p1_w0,p1_w1");
  int rows = 0;
  while (std::getline(in, row)) ++rows;
  CHECK(rows == 5);
}
