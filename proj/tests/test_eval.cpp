#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpmix/eval.hpp"

using namespace dpmix;

namespace {

Component gauss1(double mu, double var) {
  Vec m(1);
  m << mu;
  return Component::make_spherical(m, var, 1.0);
}

// ½∫|p − q| by composite Simpson on a wide interval.
double tv_quadrature(double m1, double v1, double m2, double v2) {
  auto pdf = [](double x, double m, double v) { return std::exp(-(x - m) * (x - m) / (2 * v)) / std::sqrt(2 * M_PI * v); };
  const double lo = -60.0, hi = 60.0;
  const int n = 400000;
  const double h = (hi - lo) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double f = std::abs(pdf(x, m1, v1) - pdf(x, m2, v2));
    s += f * (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2));
  }
  return 0.5 * s * h / 3.0;
}

}  // namespace

TEST(Tv, OneDimensionalShiftMatchesQuadrature) {
  const TvResult r = tv_gaussians(gauss1(0, 1), gauss1(2, 1));
  EXPECT_TRUE(r.closed_form);
  EXPECT_NEAR(r.value, 0.682689492137, 1e-9);
  EXPECT_NEAR(r.value, tv_quadrature(0, 1, 2, 1), 1e-8);
}

TEST(Tv, OneDimensionalScaleMatchesQuadrature) {
  for (auto [m2, v2] : std::vector<std::pair<double, double>>{{0, 4}, {1, 0.25}, {-3, 9}}) {
    const TvResult r = tv_gaussians(gauss1(0, 1), gauss1(m2, v2));
    EXPECT_NEAR(r.value, tv_quadrature(0, 1, m2, v2), 1e-8) << m2 << " " << v2;
  }
}

TEST(Tv, IdenticalComponentsGiveZero) {
  Component a = Component::make_spherical(Vec::Ones(3), 2.0, 1.0);
  EXPECT_EQ(tv_gaussians(a, a).value, 0.0);
  Component z = a;
  z.covariance.setZero();
  const TvResult r = tv_gaussians(z, z);
  EXPECT_TRUE(r.singular);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(tv_gaussians(z, a).value, 1.0);
}

TEST(Tv, MonteCarloAgreesWithRotatedOneDimensionalCase) {
  Vec b = Vec::Zero(3);
  b(1) = 2.0;
  const TvResult r = tv_gaussians(Component::make_spherical(Vec::Zero(3), 1.0, 1.0), Component::make_spherical(b, 1.0, 1.0),
                                  {200000, 3});
  EXPECT_FALSE(r.closed_form);
  EXPECT_GT(r.std_error, 0.0);
  EXPECT_NEAR(r.value, 0.682689492137, 4.0 * r.std_error);
}

TEST(Hungarian, MatchesBruteForce) {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const int k = 2 + rep % 4;
    Mat C(k, k);
    for (Eigen::Index i = 0; i < C.size(); ++i) C.data()[i] = uniform_open01(rng);
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += C(i, perm[i]);
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const auto a = hungarian(C);
    double got = 0.0;
    for (int i = 0; i < k; ++i) got += C(i, a[i]);
    EXPECT_NEAR(got, best, 1e-12);
  }
}

TEST(Verdict, MatchesPermutedComponents) {
  Mixture truth, est;
  Vec a = Vec::Zero(2), b = Vec::Zero(2);
  b(0) = 10.0;
  truth.components = {Component::make_spherical(a, 1.0, 0.4), Component::make_spherical(b, 1.0, 0.6)};
  est.components = {Component::make_spherical(b, 1.0, 0.6), Component::make_spherical(a, 1.0, 0.4)};
  const EvalResult r = learning_verdict(truth, est, {0.1, 0.1});
  EXPECT_EQ(r.permutation, (std::vector<int>{1, 0}));
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.mixture_tv_upper, 0.0);
}

TEST(Verdict, KMismatchIsShapeError) {
  Mixture truth, est;
  truth.components = {Component::make_spherical(Vec::Zero(2), 1.0, 1.0)};
  est.components = {Component::make_spherical(Vec::Zero(2), 1.0, 0.5), Component::make_spherical(Vec::Ones(2), 1.0, 0.5)};
  EXPECT_THROW(learning_verdict(truth, est, {0.1, 0.1}), ShapeError);
}

TEST(Verdict, MixtureUpperBoundDominatesMonteCarlo) {
  Mixture truth, est;
  Vec a = Vec::Zero(2), b = Vec::Zero(2), a2 = Vec::Zero(2);
  b(0) = 6.0;
  a2(1) = 0.5;
  truth.components = {Component::make_spherical(a, 1.0, 0.3), Component::make_spherical(b, 1.0, 0.7)};
  est.components = {Component::make_spherical(a2, 1.5, 0.35), Component::make_spherical(b, 1.0, 0.65)};
  VerdictOptions vo;
  vo.tv.samples = 200000;
  const EvalResult r = learning_verdict(truth, est, {0.1, 0.1}, vo);
  const TvResult mc = mixture_tv_mc(truth, est, {200000, 9});
  EXPECT_GE(r.mixture_tv_upper, mc.value - 3.0 * mc.std_error);
}

TEST(ClusteringAccuracy, BestRelabelling) {
  const std::vector<int> truth{1, 1, 1, 2, 2, 3};
  const std::vector<int> pred{2, 2, 0, 0, 0, 1};
  EXPECT_NEAR(clustering_accuracy(truth, pred, 3), 5.0 / 6.0, 1e-12);
  EXPECT_NEAR(clustering_accuracy(truth, {7, 7, 7, 7, 7, 7}, 3), 0.0, 1e-12);
}

TEST(Laminarity, DetectsMixingAndSpanning) {
  const std::vector<int> labels{1, 1, 2, 2, 3};
  Partition ok;
  ok.clusters = {{0, 1}, {2, 3}};
  ok.omitted = {4};
  const LaminarityReport r = laminarity(ok, labels, 3, 1.0, 0.5);
  EXPECT_TRUE(r.pure);
  EXPECT_TRUE(r.disjoint);
  EXPECT_NEAR(r.budget, 5.0 * 0.5 / (30.0 * std::log(2.0)), 1e-12);
  EXPECT_FALSE(r.within_budget);

  Partition mixed;
  mixed.clusters = {{0, 2}, {1, 3, 4}};
  const LaminarityReport m = laminarity(mixed, labels, 3, 1.0, 0.5);
  EXPECT_FALSE(m.pure);
  EXPECT_FALSE(m.disjoint);
  EXPECT_FALSE(m.laminar());
}
