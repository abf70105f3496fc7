#include "dpmix/pca.hpp"

#include <cmath>
#include <map>

namespace dpmix {

double gram_noise_scale(double norm_bound, const PrivacyParams& pp) {
  if (pp.is_zero_noise()) return 0.0;
  if (!(pp.delta > 0.0)) throw ArgumentError("noisy_gram needs delta > 0");
  return 2.0 * norm_bound * norm_bound * std::sqrt(2.0 * std::log(1.25 / pp.delta)) / pp.epsilon;
}

Mat symmetric_gaussian_noise(Eigen::Index d, double s, Rng& rng) {
  Mat E = Mat::Zero(d, d);
  if (s == 0.0) return E;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i; j < d; ++j) {
      E(i, j) = s * standard_normal(rng);
      E(j, i) = E(i, j);
    }
  return E;
}

Mat noisy_gram(const Mat& Y, double norm_bound, const PrivacyParams& pp, Rng& rng,
               BudgetLedger* ledger, const std::string& stage, Mat* noise_out) {
  pp.validate();
  const double lim2 = norm_bound * norm_bound * (1.0 + 1e-12);
  for (Eigen::Index i = 0; i < Y.rows(); ++i)
    if (Y.row(i).squaredNorm() > lim2)
      throw ContractError("noisy_gram: row " + std::to_string(i) + " exceeds the norm bound");
  const double s = gram_noise_scale(norm_bound, pp);
  Mat G = Mat::Zero(Y.cols(), Y.cols());
  G.selfadjointView<Eigen::Lower>().rankUpdate(Y.transpose());
  G = G.selfadjointView<Eigen::Lower>();
  const Mat E = symmetric_gaussian_noise(Y.cols(), s, rng);
  if (noise_out) *noise_out = E;
  if (ledger) ledger->append("noisy_gram", pp, stage);
  return G + E;
}

Mat top_subspace(const Mat& M, int ell) {
  const Eigen::Index d = M.rows();
  if (ell < 0 || ell > d) throw ArgumentError("top_subspace: ell must lie in [0, d]");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()));
  if (es.info() != Eigen::Success) throw Error("top_subspace: eigensolver failed");
  Mat basis(d, ell);
  for (int j = 0; j < ell; ++j) {
    Vec v = es.eigenvectors().col(d - 1 - j);
    for (Eigen::Index i = 0; i < d; ++i) {
      if (std::abs(v(i)) > 1e-12) {
        if (v(i) < 0) v = -v;
        break;
      }
    }
    basis.col(j) = v;
  }
  return basis;
}

double spectral_norm(const Mat& M, double tol, int max_iter) {
  if (M.size() == 0) return 0.0;
  Vec v = Vec::Ones(M.cols()) / std::sqrt(static_cast<double>(M.cols()));
  double prev = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vec w = M.transpose() * (M * v);
    const double nw = w.norm();
    if (nw == 0.0) {
      // Start vector in the null space: retry from a coordinate vector.
      if (it == 0 && M.cols() > 1) {
        v = Vec::Unit(M.cols(), 0);
        continue;
      }
      return 0.0;
    }
    v = w / nw;
    const double est = std::sqrt(nw);
    if (it > 0 && std::abs(est - prev) <= tol * est) return est;
    prev = est;
  }
  return prev;
}

ProjectionResult private_pca(const Mat& Y, double norm_bound, int ell, const PrivacyParams& pp, Rng& rng,
                             BudgetLedger* ledger, const std::string& stage) {
  ProjectionResult res;
  Mat E;
  const Mat G = noisy_gram(Y, norm_bound, pp, rng, ledger, stage, &E);
  res.basis = top_subspace(G, ell);
  res.ell = ell;
  res.noise_scale = gram_noise_scale(norm_bound, pp);
  res.defect_bound = res.noise_scale > 0.0 ? spectral_norm(E) : 0.0;
  return res;
}

std::vector<DefectPair> projection_defect(const Mat& X, const Mat& A, const Mat& projector, double B,
                                          const std::vector<int>& labels) {
  const double xa = spectral_norm(X - A);
  std::map<int, std::pair<Vec, long>> acc;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    auto& slot = acc[labels[i]];
    if (slot.second == 0) slot.first = Vec::Zero(X.cols());
    slot.first += X.row(i).transpose();
    ++slot.second;
  }
  std::vector<DefectPair> out;
  for (auto& [label, sum_count] : acc) {
    const double ni = static_cast<double>(sum_count.second);
    const Vec mean = sum_count.first / ni;
    const Vec projected_mean = projector * mean;
    DefectPair p;
    p.label = label;
    p.lhs = (mean - projected_mean).norm();
    p.rhs = xa / std::sqrt(ni) + std::sqrt(B / ni);
    out.push_back(p);
  }
  return out;
}

}  // namespace dpmix
