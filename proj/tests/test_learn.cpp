#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "dpmix/eval.hpp"
#include "dpmix/learn.hpp"

using namespace dpmix;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

Mixture two_far(double gap, Eigen::Index d) {
  Mixture m;
  Vec a = Vec::Zero(d), b = Vec::Zero(d);
  a(0) = -gap / 2;
  b(0) = gap / 2;
  m.components.push_back(Component::make_spherical(a, 1.0, 0.5));
  m.components.push_back(Component::make_spherical(b, 1.0, 0.5));
  return m;
}

LearnerConfig base_config(int k, double R, double w_min) {
  LearnerConfig c;
  c.k = k;
  c.bounds = {R, 1.0, 1.0, w_min, 0.0, 1.0};
  c.zero_noise = true;
  return c;
}

}  // namespace

TEST(Pegme, SingleComponentZeroNoise) {
  Mixture m;
  m.components.push_back(Component::make_spherical(Vec::Zero(10), 1.0, 1.0));
  Rng rng(1);
  const Dataset ds = sample_mixture(m, 8000, rng);
  LearnerConfig cfg = base_config(1, 1.0, 1.0);
  BudgetLedger led;
  const PegmeResult r = pegme(ds.points, cfg, rng, &led);
  ASSERT_TRUE(r.model);
  EXPECT_LT(r.model->components[0].mean.norm(), 0.2);
  EXPECT_NEAR(r.model->components[0].sigma2(), 1.0, 0.15);
  EXPECT_EQ(r.model->components[0].weight, 1.0);
  EXPECT_EQ(r.diag.ell, 1);
}

TEST(Rpgmp, SingleClusterKeepsEverything) {
  Rng rng(2);
  const Mat X = Mat::Random(50, 3);
  const LearnerConfig cfg = base_config(1, 5.0, 1.0);
  const RpgmpResult r = rpgmp(X, cfg, rng, nullptr);
  ASSERT_EQ(r.partition.clusters.size(), 1u);
  EXPECT_EQ(r.partition.clusters[0].size(), 50u);
  EXPECT_TRUE(r.partition.omitted.empty());
  EXPECT_EQ(r.depth, 0);
}

TEST(Rpgmp, FarSeparatedPairIsLaminar) {
  Rng rng(3);
  const Dataset ds = sample_mixture(two_far(60.0, 2), 2000, rng);
  const LearnerConfig cfg = base_config(2, 40.0, 0.4);
  BudgetLedger led;
  const RpgmpResult r = rpgmp(ds.points, cfg, rng, &led);
  ASSERT_EQ(r.partition.clusters.size(), 2u);
  const LaminarityReport lam = laminarity(r.partition, ds.labels, 2, 0.4, 0.1);
  EXPECT_TRUE(lam.laminar());
  EXPECT_EQ(lam.omitted, 0);
  EXPECT_EQ(r.depth, 1);
  EXPECT_EQ(ledger_depth(led), 1);
}

TEST(Pgme, SingleComponentWeightIsOne) {
  Mixture m;
  m.components.push_back(Component::make_spherical(Vec::Zero(3), 1.0, 1.0));
  Rng rng(4);
  const Dataset ds = sample_mixture(m, 3000, rng);
  const LearnReport r = pgme(ds.points, base_config(1, 5.0, 1.0), rng);
  EXPECT_EQ(r.status, "ok");
  ASSERT_TRUE(r.model);
  EXPECT_EQ(r.model->components[0].weight, 1.0);
  EXPECT_LT(r.model->components[0].mean.norm(), 0.1);
  EXPECT_TRUE(std::isinf(r.totals.epsilon));
}

TEST(Pgme, TotalsClosedForm) {
  const PrivacyParams p = pgme_privacy_totals(1.0, 1e-6, 2);
  EXPECT_NEAR(p.epsilon, 2.0 + 8.0 * std::sqrt(4.0 * std::log(1e6)), 1e-12);
  EXPECT_NEAR(p.delta, 17e-6, 1e-18);
}

TEST(Pgme, PrivateRunReportsClosedFormForRealizedDepth) {
  Rng rng(5);
  const Dataset ds = sample_mixture(two_far(60.0, 2), 2000, rng);
  LearnerConfig cfg = base_config(2, 40.0, 0.4);
  cfg.zero_noise = false;
  cfg.epsilon = 1.0;
  cfg.delta = 1e-6;
  const LearnReport r = pgme(ds.points, cfg, rng);
  const PrivacyParams p = pgme_privacy_totals(1.0, 1e-6, ledger_depth(r.ledger));
  EXPECT_DOUBLE_EQ(r.totals.epsilon, p.epsilon);
  EXPECT_DOUBLE_EQ(r.totals.delta, p.delta);
}

TEST(Pgme, CoLocatedComponentsDoNotCrash) {
  Mixture m;
  m.components.push_back(Component::make_spherical(Vec::Zero(4), 1.0, 0.5));
  m.components.push_back(Component::make_spherical(Vec::Zero(4), 1.0, 0.5));
  Rng rng(6);
  const Dataset ds = sample_mixture(m, 2000, rng);
  const LearnReport r = pgme(ds.points, base_config(2, 5.0, 0.4), rng);
  EXPECT_TRUE(r.status == "ok" || r.status == "partial" || r.status == "abstained");
}

TEST(Aggregate, IdenticalBatchOutputsAreReproduced) {
  Mat means(2, 3);
  means << 1, 2, 3, -4, 5, 6;
  const BatchLearner fixed = [&](const Mat&, int) { return BatchOutput{means, {0.5, 0.5}}; };
  LearnerConfig cfg = base_config(2, 10.0, 0.4);
  Rng rng(7);
  BudgetLedger led;
  const AggregateResult r = sample_aggregate(Mat::Zero(500, 3), fixed, cfg, rng, &led);
  ASSERT_TRUE(r.complete);
  ASSERT_EQ(r.model.k(), 2);
  std::set<std::vector<double>> got;
  for (const auto& c : r.model.components) {
    got.insert({c.mean(0), c.mean(1), c.mean(2)});
    EXPECT_DOUBLE_EQ(c.weight, 0.5);
  }
  EXPECT_EQ(got, (std::set<std::vector<double>>{{1, 2, 3}, {-4, 5, 6}}));
}

TEST(Aggregate, ScoresCountBatchesNotBatchMeans) {
  // Three batches report c twice, four report {a, b}: by pool points c would
  // win 6 to 4, by distinct batches a wins 4 to 3.
  Mat ab(2, 1), cc(2, 1);
  ab << 0.0, 100.0;
  cc << 50.0, 50.0;
  int call = 0;
  const BatchLearner learner = [&](const Mat&, int) {
    return call++ < 3 ? BatchOutput{cc, {0.5, 0.5}} : BatchOutput{ab, {0.5, 0.5}};
  };
  LearnerConfig cfg = base_config(2, 10.0, 0.4);
  cfg.batches = 7;
  Rng rng(9);
  const AggregateResult r = sample_aggregate(Mat::Zero(70, 1), learner, cfg, rng, nullptr);
  ASSERT_FALSE(r.balls.empty());
  EXPECT_EQ(r.balls[0].center(0), 0.0);
}

TEST(Aggregate, WrongBatchShapeThrows) {
  const BatchLearner bad = [](const Mat&, int) { return BatchOutput{Mat::Zero(1, 3), {1.0}}; };
  Rng rng(7);
  EXPECT_THROW(sample_aggregate(Mat::Zero(500, 3), bad, base_config(2, 10.0, 0.4), rng, nullptr), ShapeError);
}

TEST(Spectral, RecoversWellSeparatedClusters) {
  PlantedSpec spec;
  spec.k = 3;
  spec.d = 32;
  spec.bounds = {40.0, 1.0, 1.0, 0.2, 0.0, 1.0};
  spec.separation = 20.0 * std::sqrt(3.0);
  spec.placement = PlantedSpec::Placement::Simplex;
  Rng rng(8);
  const Mixture m = planted_model(spec, rng);
  const Dataset ds = sample_mixture(m, 6000, rng);
  EXPECT_GE(clustering_accuracy(ds.labels, spectral_assign(ds.points, 3), 3), 0.99);
}

TEST(Spectral, TwoPointsTwoClusters) {
  Mat X(2, 2);
  X << 0, 0, 1, 1;
  const auto lab = spectral_assign(X, 2);
  ASSERT_EQ(lab.size(), 2u);
  EXPECT_NE(lab[0], lab[1]);
}

TEST(RunLearner, UnknownNameIsUsageError) {
  EXPECT_THROW(run_learner("nope", Mat::Zero(4, 2), base_config(1, 1.0, 1.0)), UsageError);
}

TEST(LearnerConfig, JsonRoundTripWithInfinity) {
  LearnerConfig c = base_config(3, 7.0, 0.2);
  c.epsilon = kInf;
  c.centers = CenterBackend::Grid;
  c.batches = 12;
  const LearnerConfig back = learner_config_from_json(learner_config_to_json(c));
  EXPECT_TRUE(std::isinf(back.epsilon));
  EXPECT_EQ(back.k, 3);
  EXPECT_EQ(back.bounds.R, 7.0);
  EXPECT_EQ(back.bounds.w_min, 0.2);
  EXPECT_EQ(back.centers, CenterBackend::Grid);
  EXPECT_EQ(back.batches, 12);
  EXPECT_EQ(learner_config_to_json(back), learner_config_to_json(c));
}
