#include <gtest/gtest.h>

#include <cmath>

#include "dpmix/pca.hpp"

using namespace dpmix;

TEST(Pca, TopSubspaceOfDiagonal) {
  Vec diag(4);
  diag << 1, 5, 3, 0.5;
  const Mat B = top_subspace(Mat(diag.asDiagonal()), 2);
  EXPECT_NEAR(std::abs(B(1, 0)), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(B(2, 1)), 1.0, 1e-12);
  // Sign convention: first non-negligible coordinate is positive.
  EXPECT_GT(B(1, 0), 0.0);
}

TEST(Pca, TopSubspaceIsOrthonormal) {
  Rng rng(2);
  Mat A(6, 6);
  for (Eigen::Index i = 0; i < 36; ++i) A.data()[i] = standard_normal(rng);
  const Mat B = top_subspace(A.transpose() * A, 3);
  EXPECT_LT((B.transpose() * B - Mat::Identity(3, 3)).norm(), 1e-10);
}

TEST(Pca, SpectralNormMatchesSvd) {
  Rng rng(5);
  Mat A(7, 4);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = standard_normal(rng);
  Eigen::JacobiSVD<Mat> svd(A);
  EXPECT_NEAR(spectral_norm(A), svd.singularValues()(0), 1e-7 * svd.singularValues()(0));
  EXPECT_EQ(spectral_norm(Mat::Zero(3, 3)), 0.0);
}

TEST(Pca, NoiseScaleFormula) {
  EXPECT_NEAR(gram_noise_scale(3.0, {0.5, 1e-6}), 2.0 * 9.0 * std::sqrt(2.0 * std::log(1.25e6)) / 0.5, 1e-9);
  EXPECT_EQ(gram_noise_scale(3.0, PrivacyParams::zero_noise()), 0.0);
}

TEST(Pca, NoisyGramRejectsRowsOutsideBound) {
  Rng rng(1);
  Mat Y = Mat::Zero(2, 2);
  Y(1, 0) = 2.0;
  EXPECT_THROW(noisy_gram(Y, 1.0, {1.0, 1e-6}, rng), ContractError);
}

TEST(Pca, NoiseMatrixIsSymmetric) {
  Rng rng(1);
  const Mat E = symmetric_gaussian_noise(5, 2.0, rng);
  EXPECT_EQ(E, E.transpose());
  EXPECT_GT(E.norm(), 0.0);
}

TEST(Pca, ZeroNoiseRecoversPlantedSubspace) {
  Rng rng(11);
  const Eigen::Index n = 3000, d = 20;
  Mat Y(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) Y(i, j) = 0.1 * standard_normal(rng);
    Y(i, 3) += (i % 2 ? 3.0 : -3.0);
    Y(i, 7) += (i % 3 ? 2.0 : -4.0);
  }
  const double bound = Y.rowwise().norm().maxCoeff();
  BudgetLedger led;
  const ProjectionResult p = private_pca(Y, bound, 2, PrivacyParams::zero_noise(), rng, &led, "pca");
  const Mat P = p.basis * p.basis.transpose();
  EXPECT_NEAR(P(3, 3), 1.0, 1e-3);
  EXPECT_NEAR(P(7, 7), 1.0, 1e-3);
  EXPECT_EQ(led.size(), 1u);
  EXPECT_EQ(p.defect_bound, 0.0);
}

TEST(Pca, ProjectionDefectOnHandExample) {
  Mat X(2, 2);
  X << 1, 2, 3, 2;
  const Mat A = X;
  Mat Pi = Mat::Zero(2, 2);
  Pi(0, 0) = 1.0;
  const auto d = projection_defect(X, A, Pi, 4.0, {1, 1});
  ASSERT_EQ(d.size(), 1u);
  // Mean (2, 2), projection (2, 0): distance 2. rhs = 0 + √(4/2).
  EXPECT_NEAR(d[0].lhs, 2.0, 1e-12);
  EXPECT_NEAR(d[0].rhs, std::sqrt(2.0), 1e-12);
}
