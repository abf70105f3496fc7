#include <gtest/gtest.h>

#include <cmath>

#include "dpmix/model.hpp"

using namespace dpmix;

namespace {

Mixture two_spherical(double gap) {
  Mixture m;
  Vec a = Vec::Zero(3), b = Vec::Zero(3);
  b(0) = gap;
  m.components.push_back(Component::make_spherical(a, 1.0, 0.25));
  m.components.push_back(Component::make_spherical(b, 4.0, 0.75));
  return m;
}

}  // namespace

TEST(Model, ValidateRejectsBadWeights) {
  Mixture m = two_spherical(5.0);
  m.components[0].weight = 0.5;
  EXPECT_THROW(validate_mixture(m), InvalidModelError);
}

TEST(Model, ValidateRejectsZeroCovarianceUnlessDegenerateAllowed) {
  Mixture m = two_spherical(5.0);
  m.components[0].covariance.setZero();
  EXPECT_THROW(validate_mixture(m), InvalidModelError);
  EXPECT_NO_THROW(validate_mixture(m, true));
}

TEST(Model, CovarianceFactorReproducesCovariance) {
  Mat c(2, 2);
  c << 4, 1, 1, 2;
  const Mat a = covariance_factor(c);
  EXPECT_LT((a * a.transpose() - c).norm(), 1e-12);
}

TEST(Model, CovarianceFactorClampsTinyNegativeEigenvalues) {
  Mat c(2, 2);
  c << 1, 1, 1, 1 - 1e-12;
  const Mat a = covariance_factor(c);
  EXPECT_LT((a * a.transpose() - c).norm(), 1e-9);
}

TEST(Model, Sigma2IsSpectralNorm) {
  Component g;
  g.mean = Vec::Zero(2);
  g.covariance.resize(2, 2);
  g.covariance << 2, 1, 1, 2;
  EXPECT_NEAR(g.sigma2(), 3.0, 1e-12);
}

TEST(Model, SampleMomentsConverge) {
  Rng rng(7);
  const Mixture m = two_spherical(10.0);
  const Dataset ds = sample_mixture(m, 200000, rng);
  ASSERT_EQ(ds.labels.size(), 200000u);
  double frac2 = 0.0;
  Vec mu2 = Vec::Zero(3);
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    if (ds.labels[i] == 2) {
      frac2 += 1.0;
      mu2 += ds.points.row(i).transpose();
    }
  mu2 /= frac2;
  frac2 /= 200000.0;
  EXPECT_NEAR(frac2, 0.75, 0.005);
  EXPECT_NEAR(mu2(0), 10.0, 0.02);
  EXPECT_NEAR(mu2(1), 0.0, 0.02);
}

TEST(Model, SamplingIsDeterministicPerSeed) {
  const Mixture m = two_spherical(3.0);
  Rng a(42), b(42);
  EXPECT_EQ(sample_mixture(m, 100, a).points, sample_mixture(m, 100, b).points);
}

TEST(Model, PlantedMeansRespectSeparationAndRadius) {
  PlantedSpec spec;
  spec.k = 4;
  spec.d = 6;
  spec.bounds = {50.0, 1.0, 2.0, 0.2, 0.0, 4.0};
  spec.separation = 20.0;
  spec.spherical = false;
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Mixture m = planted_model(spec, rng);
    for (int i = 0; i < 4; ++i) {
      EXPECT_LE(m.components[i].mean.norm(), 50.0 + 1e-9);
      EXPECT_GE(m.components[i].sigma2(), 1.0 - 1e-9);
      EXPECT_LE(m.components[i].sigma2(), 4.0 + 1e-9);
      for (int j = i + 1; j < 4; ++j) EXPECT_GE((m.components[i].mean - m.components[j].mean).norm(), 20.0);
    }
  }
}

TEST(Model, SimplexPlacementHasExactEdges) {
  PlantedSpec spec;
  spec.k = 3;
  spec.d = 8;
  spec.bounds = {10.0, 1.0, 1.0, 1.0 / 3.0, 0.0, 1.0};
  spec.separation = 17.0;  // circumradius 17/√3 ≈ 9.81 fits in R = 10
  spec.placement = PlantedSpec::Placement::Simplex;
  Rng rng(9);
  const Mixture m = planted_model(spec, rng);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(m.components[i].mean.norm(), 17.0 / std::sqrt(3.0), 1e-9);
    for (int j = i + 1; j < 3; ++j) EXPECT_NEAR((m.components[i].mean - m.components[j].mean).norm(), 17.0, 1e-9);
  }
  spec.separation = 18.0;
  EXPECT_THROW(planted_model(spec, rng), InfeasibleError);
}

TEST(Model, InfeasibleSeparationThrows) {
  PlantedSpec spec;
  spec.k = 3;
  spec.d = 2;
  spec.bounds = {1.0, 1.0, 1.0, 0.3, 0.0, 1.0};
  spec.separation = 5.0;
  spec.max_retries = 50;
  Rng rng(1);
  EXPECT_THROW(planted_model(spec, rng), InfeasibleError);
}

TEST(Model, GeneralSeparationFormula) {
  // 100·(1 + 2)·(√(4 ln 1000) + 1/√0.25 + 1/√0.5)
  const double expect = 300.0 * (std::sqrt(4.0 * std::log(1000.0)) + 2.0 + std::sqrt(2.0));
  EXPECT_NEAR(general_separation(1.0, 2.0, 0.25, 0.5, 4, 1000.0), expect, 1e-9);
}

TEST(Conditions, NumPointsClauses) {
  Dataset ds;
  ds.points = Mat::Zero(100, 1);
  ds.labels.assign(100, 1);
  for (int i = 0; i < 30; ++i) ds.labels[i] = 2;
  const auto r = check_condition_numpoints(ds, {0.7, 0.3}, 0.1);
  EXPECT_EQ(r.counts[0], 70);
  EXPECT_EQ(r.counts[1], 30);
  EXPECT_TRUE(r.all_pass());
  const auto bad = check_condition_numpoints(ds, {0.9, 0.1}, 0.1);
  EXPECT_FALSE(bad.all_pass());
}

TEST(Conditions, RadiusBandIsCentredOnLabelMean) {
  Mixture m;
  m.components.push_back(Component::make_spherical(Vec::Zero(4), 1.0, 1.0));
  Dataset ds;
  ds.points = Mat::Zero(2, 4);
  ds.points(0, 0) = 100.0 - 1.5;  // label mean at 100, offsets ±1.5
  ds.points(1, 0) = 100.0 + 1.5;
  ds.labels = {1, 1};
  const auto r = check_condition_radius(ds, m);
  EXPECT_NEAR(r.components[0].radius, 1.5, 1e-12);
  EXPECT_TRUE(r.all_pass());  // band [√4/2, √12] = [1, 3.46]
}

TEST(Conditions, SeparationUsesHalfC) {
  Mixture m = two_spherical(0.0);
  Dataset ds;
  ds.points = Mat::Zero(2, 1);
  ds.points(1, 0) = 3.0;
  ds.labels = {1, 2};
  // σ_max = 2, ℓ = 1: bound = C/2·2 = C.
  EXPECT_TRUE(check_condition_separation(ds, m, 3.0));
  EXPECT_FALSE(check_condition_separation(ds, m, 3.1));
}

TEST(Conditions, FlatnessOfIsotropicHighDimension) {
  Mixture m;
  m.components.push_back(Component::make_spherical(Vec::Zero(2000), 1.0, 1.0));
  const auto f = check_flatness(m, 1000.0, 1, 0.1);
  // trace/8 = 250, ‖Σ‖_F √log = √2000·√(ln 10⁴) ≈ 136, ‖Σ‖₂ log ≈ 9.2
  EXPECT_TRUE(f[0].pass());
  Mixture low;
  low.components.push_back(Component::make_spherical(Vec::Zero(8), 1.0, 1.0));
  EXPECT_FALSE(check_flatness(low, 1000.0, 1, 0.1)[0].pass());
}

TEST(Bounds, Validation) {
  BoundsConfig b{1.0, 1.0, 1.0, 0.6, 0.0, 1.0};
  EXPECT_THROW(b.validate(2), ArgumentError);
  b.w_min = 0.5;
  EXPECT_NO_THROW(b.validate(2));
  b.kappa = 0.5;
  EXPECT_THROW(b.validate(2), ArgumentError);
}
