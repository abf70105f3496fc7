// Noisy Gram matrix, top eigen-subspace and projection diagnostics.
#ifndef DPMIX_PCA_HPP
#define DPMIX_PCA_HPP

#include <vector>

#include "dpmix/core.hpp"
#include "dpmix/dp.hpp"

namespace dpmix {

struct ProjectionResult {
  Mat basis;  // d x ell, orthonormal columns
  int ell = 0;
  double noise_scale = 0.0;
  double defect_bound = 0.0;  // spectral norm of the added noise matrix
};

// Δ = 2Λ²√(2 ln(1.25/δ))/ε, zero in zero-noise mode.
double gram_noise_scale(double norm_bound, const PrivacyParams& pp);

// YᵀY + E with E symmetric, upper-triangle iid N(0, Δ²). Rows of Y must have
// norm ≤ norm_bound. When noise_out is given it receives E.
Mat noisy_gram(const Mat& Y, double norm_bound, const PrivacyParams& pp, Rng& rng,
               BudgetLedger* ledger = nullptr, const std::string& stage = "", Mat* noise_out = nullptr);

// Adds a symmetric matrix with iid N(0, s²) upper triangle.
Mat symmetric_gaussian_noise(Eigen::Index d, double s, Rng& rng);

// Eigenvectors of the ell largest (signed) eigenvalues, ordered by decreasing
// eigenvalue, each flipped so its first non-negligible coordinate is positive.
Mat top_subspace(const Mat& M, int ell);

template <typename DerivedZ, typename DerivedB>
Mat project_rotate(const Eigen::MatrixBase<DerivedZ>& Z, const Eigen::MatrixBase<DerivedB>& basis) {
  return Z * basis;
}

// Spectral norm by power iteration on MᵀM (relative tolerance 1e-9, 10k cap).
double spectral_norm(const Mat& M, double tol = 1e-9, int max_iter = 10000);

// Private PCA on rows of Y (rows already within norm_bound).
ProjectionResult private_pca(const Mat& Y, double norm_bound, int ell, const PrivacyParams& pp,
                             Rng& rng, BudgetLedger* ledger = nullptr, const std::string& stage = "");

struct DefectPair {
  int label = 0;
  double lhs = 0.0;
  double rhs = 0.0;
};

// For each label class i: lhs = ‖μ̄ᵢ − mean of projected rows‖ and
// rhs = ‖X − A‖₂/√nᵢ + √(B/nᵢ).
std::vector<DefectPair> projection_defect(const Mat& X, const Mat& A, const Mat& projector, double B,
                                          const std::vector<int>& labels);

}  // namespace dpmix

#endif  // DPMIX_PCA_HPP
