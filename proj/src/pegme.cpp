#include <cmath>

#include "dpmix/learn.hpp"
#include "dpmix/pca.hpp"

namespace dpmix {

PegmeResult pegme(const Mat& Xin, const LearnerConfig& cfg, Rng& rng, BudgetLedger* ledger) {
  const PrivacyParams pp = cfg.privacy();
  pp.validate();
  cfg.bounds.validate(cfg.k);
  const int k = cfg.k;
  const Eigen::Index d = Xin.cols();
  const double kappa = cfg.bounds.kappa;
  const double smin = cfg.bounds.sigma_min;
  const double n_half = static_cast<double>(Xin.rows() / 2);
  PegmeResult res;
  auto& dg = res.diag;

  dg.Lambda = 2.0 * k * std::sqrt(static_cast<double>(d) * kappa) * smin;
  long ell = k;
  if (cfg.ell_log_factor > 0.0)
    ell = std::max<long>(ell, static_cast<long>(std::ceil(cfg.ell_log_factor * std::log(n_half / cfg.beta))));
  ell = std::min<long>(ell, d);
  dg.ell = static_cast<int>(ell);

  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < Xin.rows(); ++i)
    if (Xin.row(i).norm() <= dg.Lambda) kept.push_back(i);
  dg.truncated = static_cast<long>(Xin.rows()) - static_cast<long>(kept.size());
  const Mat X = Xin(kept, Eigen::all);
  const Eigen::Index ny = X.rows() / 2;
  const Mat Y = X.topRows(ny);
  const Mat Z = X.bottomRows(X.rows() - ny);
  if (Z.rows() == 0) throw InsufficientDataError("pegme: no points left after truncation");

  const ProjectionResult proj = private_pca(Y, dg.Lambda, dg.ell, pp, rng, ledger, "pegme/pca");
  const Mat Zl = project_rotate(Z, proj.basis);

  const double log_term = std::log(1.0 / pp.delta);
  dg.loc_epsilon = pp.is_zero_noise() ? pp.epsilon : pp.epsilon / std::sqrt(8.0 * k * log_term);
  const PrivacyParams loc_pp{dg.loc_epsilon, pp.delta / (2.0 * k)};
  const double R_loc = dg.Lambda + 8.0 * std::sqrt(static_cast<double>(ell) * kappa) * smin;
  const double t = n_half / (2.0 * k);
  LocationOptions lopts;
  lopts.backend = cfg.centers;
  lopts.beta = cfg.beta;

  // remaining[j] holds the Z row index of the j-th row of S.
  std::vector<Eigen::Index> remaining(Zl.rows());
  for (Eigen::Index i = 0; i < Zl.rows(); ++i) remaining[i] = i;
  std::vector<std::vector<Eigen::Index>> peeled;
  for (int i = 0; i < k && !remaining.empty(); ++i) {
    const Mat S = Zl(remaining, Eigen::all);
    const PglocResult loc = pgloc(S, t, loc_pp, R_loc, smin, std::sqrt(kappa) * smin, lopts, rng, ledger,
                                  "pegme/loc");
    if (!loc.ball) {
      dg.notes.push_back("location round " + std::to_string(i + 1) + ": " + loc.diagnostic);
      break;
    }
    BallD b{loc.ball->center, 4.0 * std::sqrt(3.0) * loc.ball->radius};
    std::vector<Eigen::Index> in, out;
    for (auto z : remaining) (b.contains(Zl.row(z)) ? in : out).push_back(z);
    dg.projected_balls.push_back(b);
    peeled.push_back(std::move(in));
    remaining = std::move(out);
  }
  if (static_cast<int>(peeled.size()) < k) {
    dg.notes.push_back("located " + std::to_string(peeled.size()) + " of " + std::to_string(k) + " clusters");
    return res;
  }

  const double ld = static_cast<double>(ell);
  Mixture model;
  for (int i = 0; i < k; ++i) {
    const BallD& b = dg.projected_balls[i];
    const double r = b.radius;
    BallD lifted{proj.basis * b.center,
                 r + 10.0 * std::sqrt(ld * kappa) * smin + 2.0 * r * std::sqrt(3.0 * static_cast<double>(d) / ld)};
    std::vector<Eigen::Index> sel;
    for (auto z : peeled[i])
      if (lifted.contains(Z.row(z))) sel.push_back(z);
    dg.lifted_balls.push_back(lifted);
    dg.cluster_sizes.push_back(static_cast<long>(sel.size()));
    const std::string stage = "cluster/" + std::to_string(i + 1) + "/psge";
    SphericalEstimate est;
    try {
      est = psge(Z(sel, Eigen::all), lifted, pp, rng, ledger, stage, cfg.beta);
    } catch (const InsufficientDataError& e) {
      throw InsufficientDataError("pegme cluster " + std::to_string(i + 1) + ": " + e.what());
    }
    for (const auto& w : est.warnings) dg.notes.push_back(stage + ": " + w);
    model.components.push_back(Component::make_spherical(est.mean, est.sigma2, 1.0 / k));
  }
  res.model = std::move(model);
  return res;
}

}  // namespace dpmix
