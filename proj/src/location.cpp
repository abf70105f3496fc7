#include "dpmix/location.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "dpmix/neighbor_counts.hpp"

namespace dpmix {

void TerrificConfig::validate() const {
  if (t < 1) throw ArgumentError("terrific: t must be >= 1");
  if (!(c > 1.0)) throw ArgumentError("terrific: c must exceed 1");
  if (!(L > 0.0) || !(L < U)) throw ArgumentError("terrific: need 0 < L < U");
}

int TerrificConfig::grid_count() const { return static_cast<int>(std::ceil(std::log2(U / L))) + 1; }

std::vector<double> TerrificConfig::radius_grid() const {
  validate();
  std::vector<double> r;
  for (int i = 0;; ++i) {
    const double v = std::ldexp(L, i);
    if (!(v < U)) break;
    r.push_back(v);
  }
  r.push_back(U);
  if (largest) std::reverse(r.begin(), r.end());
  return r;
}

double TerrificConfig::gamma(double epsilon, double beta) const {
  if (std::isinf(epsilon)) return 0.0;
  return 16.0 / epsilon * (std::log(static_cast<double>(grid_count())) + std::log(2.0 / beta));
}

BallSplit ball_split(const Mat& X, const Vec& p, double r, double c) {
  BallSplit s;
  const double r2 = r * r, cr2 = (c * r) * (c * r);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double d2 = (X.row(i).transpose() - p).squaredNorm();
    if (d2 <= r2)
      ++s.inside;
    else if (d2 <= cr2)
      ++s.annulus;
    else
      ++s.outside;
  }
  return s;
}

long capped_query(long inside, long outside, long annulus, long t) {
  return std::min({std::min(inside, t), std::min(outside, t), t - std::min(annulus, t)});
}

long terrific_query(const Mat& X, const Vec& p, double r, const TerrificConfig& cfg) {
  const BallSplit s = ball_split(X, p, r, cfg.c);
  return capped_query(s.inside, s.outside, s.annulus, cfg.t);
}

namespace {

double top_t_mean(std::vector<long>& q, long t) {
  std::nth_element(q.begin(), q.begin() + (t - 1), q.end(), std::greater<long>());
  double s = 0.0;
  for (long i = 0; i < t; ++i) s += static_cast<double>(q[i]);
  return s / static_cast<double>(t);
}

}  // namespace

double score_L(const Mat& X, double r, const TerrificConfig& cfg) {
  if (X.rows() < cfg.t) throw UndersizeError("score_L: fewer points than t");
  std::vector<long> q(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) q[i] = terrific_query(X, X.row(i).transpose(), r, cfg);
  return top_t_mean(q, cfg.t);
}

std::vector<double> score_L_many(const Mat& X, const std::vector<double>& radii, const TerrificConfig& cfg) {
  const Eigen::Index n = X.rows();
  if (n < cfg.t) throw UndersizeError("score_L: fewer points than t");
  std::vector<double> th;
  for (double r : radii) {
    th.push_back(r);
    th.push_back(cfg.c * r);
  }
  std::sort(th.begin(), th.end());
  th.erase(std::unique(th.begin(), th.end()), th.end());
  auto col = [&](double v) { return std::lower_bound(th.begin(), th.end(), v) - th.begin(); };
  const CountMatrix counts = ball_counts_self(X, th);
  std::vector<double> out;
  std::vector<long> q(n);
  for (double r : radii) {
    const auto ci = col(r), co = col(cfg.c * r);
    for (Eigen::Index i = 0; i < n; ++i) {
      const long in = counts(i, ci), within = counts(i, co);
      q[i] = capped_query(in, n - within, within - in, cfg.t);
    }
    out.push_back(top_t_mean(q, cfg.t));
  }
  return out;
}

bool is_terrific(const Mat& X, const BallD& ball, double c, long t, double slack) {
  const BallSplit s = ball_split(X, ball.center, ball.radius, c);
  return s.inside >= t - slack && s.outside >= t - slack && s.annulus <= slack;
}

RadiusSearch terrific_radius(const Mat& X, const TerrificConfig& cfg, double epsilon, double beta, Rng& rng,
                             BudgetLedger* ledger, const std::string& stage, int level) {
  cfg.validate();
  RadiusSearch res;
  res.visited = cfg.radius_grid();
  res.gamma = cfg.gamma(epsilon, beta);
  if (ledger) ledger->append("terrific_radius", {epsilon, 0.0}, stage, level);
  if (X.rows() < cfg.t) {
    res.diagnostic = "fewer points than t";
    return res;
  }
  res.scores = score_L_many(X, res.visited, cfg);
  AboveThreshold svt(static_cast<double>(cfg.t) - res.gamma, 2.0, epsilon, rng);
  for (std::size_t i = 0; i < res.visited.size(); ++i) {
    if (svt.query(res.scores[i])) {
      res.radius = res.visited[i];
      return res;
    }
  }
  res.diagnostic = "no radius cleared the threshold";
  return res;
}

TerrificBallResult terrific_ball(const Mat& X, const TerrificConfig& cfg, const PrivacyParams& pp, double beta,
                                 Rng& rng, BudgetLedger* ledger, const std::string& stage, int level) {
  pp.validate();
  TerrificBallResult res;
  const double eps_half = pp.epsilon / 2.0;
  res.search = terrific_radius(X, cfg, eps_half, beta, rng, ledger, stage, level);
  res.gamma = res.search.gamma;
  if (ledger) {
    LedgerEntry e;
    e.mechanism = "terrific_center";
    e.epsilon = eps_half;
    e.delta = pp.delta;
    e.stage = stage;
    e.level = level;
    e.nonprivate_candidates = true;
    ledger->append(std::move(e));
  }
  if (!res.search.radius) {
    res.diagnostic = "radius search returned ⊥: " + res.search.diagnostic;
    return res;
  }
  res.r_tilde = *res.search.radius;
  const double rr = (1.0 + cfg.c / 10.0) * res.r_tilde;
  const Eigen::Index n = X.rows();
  const double gamma_c = AboveThreshold::gamma(1.0, eps_half, static_cast<double>(n), beta);
  AboveThreshold svt(static_cast<double>(cfg.t) - gamma_c, 1.0, eps_half, rng);
  const std::vector<double> th{rr, cfg.c * rr};
  constexpr Eigen::Index kChunk = 64;
  for (Eigen::Index i0 = 0; i0 < n; i0 += kChunk) {
    const Eigen::Index m = std::min(kChunk, n - i0);
    const CountMatrix cnt = ball_counts(X.middleRows(i0, m), X, th);
    for (Eigen::Index r = 0; r < m; ++r) {
      const long in = cnt(r, 0), within = cnt(r, 1);
      const long q = capped_query(in, n - within, within - in, cfg.t);
      if (svt.query(static_cast<double>(q))) {
        res.center_index = i0 + r;
        res.ball = BallD{X.row(i0 + r).transpose(), rr};
        return res;
      }
    }
  }
  res.diagnostic = "radius found but no center passed screening";
  return res;
}

ScreenResult screen_candidates(const Mat& candidates, const Mat& points, const std::vector<double>& radii,
                               double t, double epsilon, double beta, Rng& rng) {
  ScreenResult res;
  const Eigen::Index q = candidates.rows();
  const double nq = static_cast<double>(q) * static_cast<double>(radii.size());
  const double gamma = nq > 0 ? AboveThreshold::gamma(1.0, epsilon, nq, beta) : 0.0;
  res.threshold = std::max(t / 2.0, t - gamma);
  if (q == 0 || radii.empty()) return res;
  const CountMatrix cnt = ball_counts(candidates, points, radii);
  AboveThreshold svt(res.threshold, 1.0, epsilon, rng);
  for (std::size_t j = 0; j < radii.size(); ++j)
    for (Eigen::Index i = 0; i < q; ++i)
      if (svt.query(static_cast<double>(cnt(i, static_cast<Eigen::Index>(j))))) {
        res.radius_index = j;
        res.candidate_index = i;
        return res;
      }
  return res;
}

PglocResult pgloc(const Mat& X, double t, const PrivacyParams& pp, double R, double sigma_min, double sigma_max,
                  const LocationOptions& opts, Rng& rng, BudgetLedger* ledger, const std::string& stage,
                  int level) {
  pp.validate();
  PglocResult res;
  const Eigen::Index n = X.rows(), ell = X.cols();
  const double lambda = sigma_min / 10.0;
  const double half = R + 3.0 * std::sqrt(static_cast<double>(ell)) * sigma_max;
  res.lambda = lambda;

  Mat S = ((X.array() / lambda).round() * lambda).matrix();
  S = S.cwiseMax(-half).cwiseMin(half);

  std::vector<double> radii{0.0};
  const double diam = 2.0 * half * std::sqrt(static_cast<double>(ell));
  for (int j = 0; radii.back() < diam; ++j) radii.push_back(std::ldexp(lambda, j));

  Mat cand;
  bool use_grid = false;
  if (opts.backend == CenterBackend::Grid) {
    for (int s = 0;; ++s) {
      const double g = std::ldexp(lambda, s);
      if (g > 2.0 * sigma_min) break;
      const double per_axis = std::floor(2.0 * half / g) + 1.0;
      if (std::pow(per_axis, static_cast<double>(ell)) <= static_cast<double>(opts.grid_cap)) {
        const long m = static_cast<long>(per_axis);
        long total = 1;
        for (Eigen::Index a = 0; a < ell; ++a) total *= m;
        cand.resize(total, ell);
        for (long idx = 0; idx < total; ++idx) {
          long rem = idx;
          for (Eigen::Index a = ell - 1; a >= 0; --a) {
            cand(idx, a) = -half + g * static_cast<double>(rem % m);
            rem /= m;
          }
        }
        use_grid = true;
        break;
      }
    }
    if (!use_grid) res.diagnostic = "grid exceeds cap; fell back to data candidates";
  }
  if (!use_grid) {
    const Eigen::Index q = std::min(n, opts.max_data_candidates);
    cand = S.topRows(q);
    res.nonprivate_candidates = true;
  }
  res.candidate_count = cand.rows();
  if (ledger) ledger->append("pgloc", pp, stage, level, res.nonprivate_candidates);

  const ScreenResult scr = screen_candidates(cand, S, radii, t, pp.epsilon, opts.beta, rng);
  if (!scr.radius_index) {
    res.diagnostic += res.diagnostic.empty() ? "no candidate ball cleared the threshold"
                                             : "; no candidate ball cleared the threshold";
    return res;
  }
  res.candidate_index = *scr.candidate_index;
  res.core_radius = radii[*scr.radius_index];
  res.ball = BallD{cand.row(*scr.candidate_index).transpose(),
                   res.core_radius + lambda * std::sqrt(static_cast<double>(ell))};
  return res;
}

}  // namespace dpmix
