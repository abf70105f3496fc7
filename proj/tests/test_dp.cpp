#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <cmath>

#include "dpmix/dp.hpp"

using namespace dpmix;
using hp = boost::multiprecision::cpp_dec_float_50;

TEST(Laplace, InverseCdfMatchesHandValues) {
  // Quantiles of Lap(b): F⁻¹(u) = b ln(2u) below ½ and −b ln(2 − 2u) above.
  EXPECT_DOUBLE_EQ(laplace_from_uniform(2.0, 0.5), 0.0);
  EXPECT_NEAR(laplace_from_uniform(2.0, 0.75), 2.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(laplace_from_uniform(2.0, 0.25), -2.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(laplace_from_uniform(1.0, 0.995), -std::log(0.01), 1e-12);
  EXPECT_DOUBLE_EQ(laplace_from_uniform(0.0, 0.9), 0.0);
  EXPECT_THROW(laplace_from_uniform(-1.0, 0.3), ArgumentError);
}

TEST(Laplace, SymmetricAroundHalf) {
  for (double u : {0.01, 0.1, 0.3, 0.49})
    EXPECT_DOUBLE_EQ(laplace_from_uniform(1.5, u), -laplace_from_uniform(1.5, 1.0 - u));
}

TEST(Pcount, ZeroNoiseIsExactAndLogged) {
  Rng rng(1);
  BudgetLedger led;
  EXPECT_DOUBLE_EQ(pcount(17.0, std::numeric_limits<double>::infinity(), rng, &led, "s"), 17.0);
  ASSERT_EQ(led.size(), 1u);
  EXPECT_TRUE(led.entries()[0].non_private);
  EXPECT_EQ(led.entries()[0].stage, "s");
}

TEST(Pcount, RejectsNonPositiveEpsilon) {
  Rng rng(1);
  EXPECT_THROW(pcount(1.0, 0.0, rng), ArgumentError);
}

TEST(GaussianMechanism, ZeroNoiseReturnsInput) {
  Rng rng(3);
  Vec v(3);
  v << 1, 2, 3;
  EXPECT_EQ(gaussian_mechanism(v, 5.0, PrivacyParams::zero_noise(), rng), v);
}

TEST(GaussianMechanism, NeedsDelta) {
  Rng rng(3);
  EXPECT_THROW(gaussian_mechanism(Vec::Zero(2), 1.0, {1.0, 0.0}, rng), ArgumentError);
}

TEST(AboveThreshold, ZeroNoiseFindsFirstAtOrAbove) {
  Rng rng(5);
  const auto idx = above_threshold({1, 2, 5, 9, 10}, 1.0, 5.0, std::numeric_limits<double>::infinity(), rng);
  ASSERT_TRUE(idx);
  EXPECT_EQ(*idx, 2u);
}

TEST(AboveThreshold, HaltsAfterTop) {
  Rng rng(5);
  AboveThreshold svt(0.0, 1.0, std::numeric_limits<double>::infinity(), rng);
  EXPECT_FALSE(svt.query(-1.0));
  EXPECT_TRUE(svt.query(0.0));
  EXPECT_TRUE(svt.halted());
  EXPECT_THROW(svt.query(3.0), StateError);
}

TEST(ReportNoisyMax, ZeroNoiseIsFirstArgmax) {
  Rng rng(5);
  EXPECT_EQ(report_noisy_max({1, 7, 3, 7}, 1.0, std::numeric_limits<double>::infinity(), rng), 1u);
  EXPECT_THROW(report_noisy_max({}, 1.0, 1.0, rng), ArgumentError);
}

TEST(ReportNoisyMax, TwoScoreWinRateMatchesLaplaceDifference) {
  // P(L1 - L2 > g) for iid Lap(b) is e^{-g/b}(2 + g/b)/4; here g = 2, b = 2Δ/ε = 2.
  const double want = std::exp(-1.0) * 3.0 / 4.0;
  Rng rng(11);
  const int trials = 20000;
  int low_wins = 0;
  for (int i = 0; i < trials; ++i) low_wins += report_noisy_max({0.0, 2.0}, 1.0, 1.0, rng) == 0;
  const double f = static_cast<double>(low_wins) / trials;
  EXPECT_NEAR(f, want, 4.0 * std::sqrt(want * (1 - want) / trials));
}

TEST(AboveThreshold, GammaFormula) {
  // 8Δ(ln t + ln(2/β))/ε evaluated by hand for t = 100, β = 0.1, Δ = 1, ε = 1.
  const hp expect = 8 * (boost::multiprecision::log(hp(100)) + boost::multiprecision::log(hp(20)));
  EXPECT_NEAR(AboveThreshold::gamma(1.0, 1.0, 100.0, 0.1), expect.convert_to<double>(), 1e-12);
  EXPECT_EQ(AboveThreshold::gamma(1.0, std::numeric_limits<double>::infinity(), 100.0, 0.1), 0.0);
}

TEST(Composition, BasicSums) {
  std::vector<LedgerEntry> e(3);
  e[0].epsilon = 0.5;
  e[1].epsilon = 0.25;
  e[1].delta = 1e-6;
  e[2].epsilon = 1.0;
  e[2].delta = 2e-6;
  const PrivacyParams p = compose(e, CompositionMode::Basic);
  EXPECT_DOUBLE_EQ(p.epsilon, 1.75);
  EXPECT_DOUBLE_EQ(p.delta, 3e-6);
}

TEST(Composition, AdvancedMatchesHighPrecision) {
  const double eps0 = 0.1, delta0 = 1e-7, dp = 1e-6;
  const int T = 50;
  const hp e(eps0), T_(T);
  const hp expect_eps = e * boost::multiprecision::sqrt(2 * T_ * boost::multiprecision::log(1 / hp(dp))) +
                        e * (boost::multiprecision::exp(e) - 1) * T_;
  const PrivacyParams p = advanced_composition(eps0, delta0, T, dp);
  EXPECT_NEAR(p.epsilon, expect_eps.convert_to<double>(), 1e-12);
  EXPECT_NEAR(p.delta, (hp(delta0) * T_ + hp(dp)).convert_to<double>(), 1e-18);
}

TEST(Composition, AdvancedFallsBackToBasicWhenHeterogeneous) {
  std::vector<LedgerEntry> e(2);
  e[0].epsilon = 0.5;
  e[1].epsilon = 0.25;
  EXPECT_DOUBLE_EQ(compose(e, CompositionMode::Advanced, 1e-6).epsilon, 0.75);
  EXPECT_THROW(compose(e, CompositionMode::Advanced, 0.0), ArgumentError);
}

TEST(Ledger, TimestampsAreLogical) {
  BudgetLedger led;
  led.append("a", {1.0, 0.0});
  led.append("b", {0.5, 1e-6}, "x", 2, true);
  EXPECT_EQ(led.entries()[0].timestamp, 0u);
  EXPECT_EQ(led.entries()[1].timestamp, 1u);
  EXPECT_EQ(led.entries()[1].level, 2);
  EXPECT_TRUE(led.entries()[1].nonprivate_candidates);
}

TEST(Ledger, JsonRoundTripKeepsInfinity) {
  BudgetLedger led;
  led.append("a", PrivacyParams::zero_noise(), "s0");
  led.append("b", {0.5, 1e-6}, "s1", 3);
  const BudgetLedger back = BudgetLedger::from_json_lines(led.to_json_lines());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(std::isinf(back.entries()[0].epsilon));
  EXPECT_TRUE(back.entries()[0].non_private);
  EXPECT_EQ(back.entries()[1].delta, 1e-6);
  EXPECT_EQ(back.entries()[1].level, 3);
  EXPECT_EQ(back.to_json_lines(), led.to_json_lines());
}

TEST(Ledger, MergeKeepsOrder) {
  BudgetLedger a, b;
  a.append("x", {1.0, 0.0});
  b.append("y", {1.0, 0.0});
  b.append("z", {1.0, 0.0});
  a.merge(b);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a.entries()[2].mechanism, "z");
  EXPECT_EQ(a.entries()[2].timestamp, 2u);
}

TEST(StabilityHistogram, ZeroNoisePicksLargestBin) {
  Rng rng(1);
  const auto b = stability_histogram({0.05, 0.15, 0.16, 0.17, 0.31}, 0.1, PrivacyParams::zero_noise(), rng);
  ASSERT_TRUE(b);
  EXPECT_EQ(*b, 1);
}

TEST(StabilityHistogram, TiesGoToLowestBin) {
  Rng rng(1);
  const auto b = stability_histogram({0.05, 0.06, 0.25, 0.26}, 0.1, PrivacyParams::zero_noise(), rng);
  ASSERT_TRUE(b);
  EXPECT_EQ(*b, 0);
}

TEST(StabilityHistogram, CountMustStrictlyExceedThreshold) {
  // Zero-noise threshold is 1, so a lone value never wins.
  Rng rng(1);
  EXPECT_FALSE(stability_histogram({0.05, 0.25}, 0.1, PrivacyParams::zero_noise(), rng));
}

TEST(StabilityHistogram, ThresholdFormula) {
  EXPECT_NEAR(stability_threshold({0.5, 1e-6}), 1.0 + 4.0 * std::log(2e6), 1e-9);
  EXPECT_EQ(stability_threshold(PrivacyParams::zero_noise()), 1.0);
}

TEST(StabilityHistogram, PrivateRunFindsDominantBin) {
  Rng rng(11);
  std::vector<double> v(500, 0.33);
  v.push_back(0.9);
  const auto b = stability_histogram(v, 0.1, {1.0, 1e-6}, rng);
  ASSERT_TRUE(b);
  EXPECT_EQ(*b, 3);
}

TEST(PrivacyParams, Validation) {
  EXPECT_THROW((PrivacyParams{0.0, 0.0}).validate(), ArgumentError);
  EXPECT_THROW((PrivacyParams{1.0, 1.0}).validate(), ArgumentError);
  EXPECT_NO_THROW(PrivacyParams::zero_noise().validate());
}
