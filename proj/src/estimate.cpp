#include "dpmix/estimate.hpp"

#include <cmath>
#include <numeric>

#include "dpmix/pca.hpp"

namespace dpmix {

SphericalEstimate psge(const Mat& X, const BallD& ball, const PrivacyParams& pp, Rng& rng,
                       BudgetLedger* ledger, const std::string& stage, double beta) {
  pp.validate();
  if (!(ball.radius > 0.0)) throw ArgumentError("psge: ball radius must be positive");
  const Eigen::Index d = X.cols();
  const double ell = static_cast<double>(d);
  const double r = ball.radius;
  SphericalEstimate est;
  if (ell < 8.0 * std::log(10.0 / beta))
    est.warnings.push_back("dimension below 8 ln(10/beta); accuracy guarantee does not apply");

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    if (ball.contains(X.row(i))) keep.push_back(i);
  est.in_ball = static_cast<long>(keep.size());
  if (keep.size() < 2) throw InsufficientDataError("psge: fewer than 2 points inside the ball");

  const PrivacyParams third{pp.epsilon / 3.0, pp.delta};
  const bool quiet = pp.is_zero_noise();

  const double m_x = pcount(static_cast<double>(keep.size()), third.epsilon, rng, ledger, stage);
  est.noisy_count = m_x;
  double m_x_used = m_x;
  if (m_x_used < 1.0) {
    est.warnings.push_back("noisy count below 1; clamped to 1");
    m_x_used = 1.0;
  }
  double m_y = std::floor(m_x_used / 2.0);
  if (m_y < 1.0) {
    est.warnings.push_back("noisy pair count below 1; clamped to 1");
    m_y = 1.0;
  }

  double ss = 0.0;
  for (std::size_t p = 0; p + 1 < keep.size(); p += 2) {
    const Vec y = (X.row(keep[p + 1]) - X.row(keep[p])).transpose() / std::sqrt(2.0);
    ss += y.squaredNorm();
  }
  const double var_noise = quiet ? 0.0 : laplace_draw(6.0 * r * r / pp.epsilon, rng);
  if (ledger) ledger->append("laplace_variance", {third.epsilon, 0.0}, stage);
  double s2 = (ss + var_noise) / (m_y * ell);
  const double floor = 1e-12 * r * r / ell;
  if (!(s2 > floor)) {
    est.warnings.push_back("variance estimate non-positive after noise; clamped to floor");
    s2 = floor;
  }
  est.sigma2 = s2;

  Vec sum = Vec::Zero(d);
  for (auto i : keep) sum += X.row(i).transpose();
  // Sensitivity 2r at budget ε/3 gives 6r√(2 ln(1.25/δ))/ε.
  if (!quiet) {
    if (!(pp.delta > 0.0)) throw ArgumentError("psge needs delta > 0");
    const double s = 6.0 * r * std::sqrt(2.0 * std::log(1.25 / pp.delta)) / pp.epsilon;
    for (Eigen::Index j = 0; j < d; ++j) sum(j) += s * standard_normal(rng);
  }
  if (ledger) ledger->append("gaussian_mean", third, stage);
  est.mean = sum / m_x_used;
  return est;
}

GaussianEstimate pge(const Mat& X, const BoundsConfig& bounds, const PrivacyParams& pp, Rng& rng,
                     BudgetLedger* ledger, const std::string& stage) {
  pp.validate();
  if (X.rows() == 0) throw InsufficientDataError("pge: empty input");
  const Eigen::Index n = X.rows(), d = X.cols();
  const double nd = static_cast<double>(n);
  const double sd = std::sqrt(static_cast<double>(d));
  const PrivacyParams half{pp.epsilon / 2.0, pp.delta / 2.0};
  GaussianEstimate est;

  auto clip = [](const Vec& x, const Vec& c, double rad) -> Vec {
    const Vec v = x - c;
    const double nv = v.norm();
    return nv > rad ? Vec(c + v * (rad / nv)) : x;
  };

  const double r0 = bounds.R + 4.0 * sd * bounds.sigma_max;
  Vec sum = Vec::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) sum += clip(X.row(i).transpose(), Vec::Zero(d), r0);
  sum = gaussian_mechanism(sum, 2.0 * r0, half, rng, ledger, stage);
  est.mean = sum / nd;

  const double r1 = 4.0 * sd * bounds.sigma_max;
  Mat M = Mat::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec v = clip(X.row(i).transpose(), est.mean, r1) - est.mean;
    M.selfadjointView<Eigen::Lower>().rankUpdate(v);
  }
  M = M.selfadjointView<Eigen::Lower>();
  const double s = gaussian_sigma(2.0 * r1 * r1, half);
  M += symmetric_gaussian_noise(d, s, rng);
  if (ledger) ledger->append("gaussian_second_moment", half, stage);
  M /= nd;

  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()));
  Vec ev = es.eigenvalues().cwiseMax(0.0);
  const double floor = bounds.sigma_min * bounds.sigma_min;
  bool clamped = false;
  for (Eigen::Index j = 0; j < d; ++j)
    if (ev(j) < 1e-12 * floor) {
      ev(j) = floor;
      clamped = true;
    }
  if (clamped) est.warnings.push_back("singular covariance estimate; null directions set to sigma_min^2");
  est.covariance = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  est.covariance = 0.5 * (est.covariance + est.covariance.transpose()).eval();
  return est;
}

WeightEstimate estimate_weights(const std::vector<double>& noisy_counts) {
  if (noisy_counts.empty()) throw ArgumentError("estimate_weights: no counts");
  WeightEstimate w;
  const double total = std::accumulate(noisy_counts.begin(), noisy_counts.end(), 0.0);
  const std::size_t k = noisy_counts.size();
  if (!(total > 0.0)) {
    w.weights.assign(k, 1.0 / static_cast<double>(k));
    w.fallback_uniform = true;
    return w;
  }
  // Negative noisy counts are clipped before normalising so the output stays
  // on the simplex.
  double pos = 0.0;
  for (double c : noisy_counts) pos += std::max(c, 0.0);
  for (double c : noisy_counts) w.weights.push_back(std::max(c, 0.0) / pos);
  return w;
}

}  // namespace dpmix
