#include "dpmix/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace dpmix {

namespace {

constexpr Eigen::Index kBatch = 4096;

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct Density {
  Vec mean;
  Mat L;  // lower Cholesky factor
  double log_norm = 0.0;  // −½ d ln 2π − ln det L
  bool ok = false;
};

Density make_density(const Component& g) {
  Density p;
  p.mean = g.mean;
  const Eigen::Index d = g.mean.size();
  Eigen::LLT<Mat> llt(0.5 * (g.covariance + g.covariance.transpose()));
  if (llt.info() != Eigen::Success) return p;
  p.L = llt.matrixL();
  const Vec diag = p.L.diagonal();
  if (!(diag.minCoeff() > 1e-150)) return p;
  p.log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * M_PI) - diag.array().log().sum();
  p.ok = true;
  return p;
}

// Log densities of the rows of Xs.
Vec log_density(const Density& p, const Mat& Xs) {
  const Mat centred = (Xs.rowwise() - p.mean.transpose()).transpose();
  const Mat W = p.L.triangularView<Eigen::Lower>().solve(centred);
  return (p.log_norm - 0.5 * W.colwise().squaredNorm().array()).matrix().transpose();
}

Mat sample_rows(const Density& p, Eigen::Index m, Rng& rng) {
  Mat Z(m, p.mean.size());
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < Z.cols(); ++j) Z(i, j) = standard_normal(rng);
  return (Z * p.L.transpose()).rowwise() + p.mean.transpose();
}

bool same_component(const Component& a, const Component& b) {
  return (a.mean - b.mean).norm() <= 1e-12 * (1.0 + a.mean.norm()) &&
         (a.covariance - b.covariance).norm() <= 1e-12 * (1.0 + a.covariance.norm());
}

TvResult tv_1d(double m1, double v1, double m2, double v2) {
  TvResult r;
  r.closed_form = true;
  const double s1 = std::sqrt(v1), s2 = std::sqrt(v2);
  if (std::abs(s1 - s2) <= 1e-14 * std::max(s1, s2)) {
    r.value = std::erf(std::abs(m1 - m2) / (2.0 * s1 * std::sqrt(2.0)));
    return r;
  }
  // Roots of log p1 − log p2.
  const double a = 0.5 / v2 - 0.5 / v1;
  const double b = m1 / v1 - m2 / v2;
  const double c = 0.5 * m2 * m2 / v2 - 0.5 * m1 * m1 / v1 + std::log(s2 / s1);
  const double disc = std::sqrt(b * b - 4.0 * a * c);
  const double q = -0.5 * (b + std::copysign(disc, b));
  double x1 = q / a, x2 = c / q;
  if (x1 > x2) std::swap(x1, x2);
  const double p1 = norm_cdf((x2 - m1) / s1) - norm_cdf((x1 - m1) / s1);
  const double p2 = norm_cdf((x2 - m2) / s2) - norm_cdf((x1 - m2) / s2);
  r.value = std::min(1.0, std::abs(p1 - p2));
  return r;
}

}  // namespace

TvResult tv_gaussians(const Component& g1, const Component& g2, const TvOptions& opts) {
  if (g1.mean.size() != g2.mean.size()) throw ShapeError("tv_gaussians: dimension mismatch");
  const Eigen::Index d = g1.mean.size();
  const Density p1 = make_density(g1), p2 = make_density(g2);
  if (!p1.ok || !p2.ok) {
    TvResult r;
    r.singular = true;
    r.value = same_component(g1, g2) ? 0.0 : 1.0;
    return r;
  }
  if (d == 1) return tv_1d(g1.mean(0), g1.covariance(0, 0), g2.mean(0), g2.covariance(0, 0));
  if (opts.samples < 2) throw ArgumentError("tv_gaussians: need at least 2 samples");
  Rng rng(opts.seed);
  double s = 0.0, s2 = 0.0;
  for (long done = 0; done < opts.samples; done += kBatch) {
    const Eigen::Index m = std::min<long>(kBatch, opts.samples - done);
    const Mat Xs = sample_rows(p1, m, rng);
    const Vec diff = log_density(p2, Xs) - log_density(p1, Xs);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double v = diff(i) >= 0.0 ? 0.0 : -std::expm1(diff(i));
      s += v;
      s2 += v * v;
    }
  }
  const double n = static_cast<double>(opts.samples);
  TvResult r;
  r.value = s / n;
  r.std_error = std::sqrt(std::max(0.0, s2 / n - r.value * r.value) / (n - 1.0));
  return r;
}

TvResult mixture_tv_mc(const Mixture& p, const Mixture& q, const TvOptions& opts) {
  if (p.dim() != q.dim()) throw ShapeError("mixture_tv_mc: dimension mismatch");
  std::vector<Density> dp, dq;
  for (const auto& c : p.components) dp.push_back(make_density(c));
  for (const auto& c : q.components) dq.push_back(make_density(c));
  for (const auto& x : dp)
    if (!x.ok) throw ArgumentError("mixture_tv_mc: singular covariance");
  for (const auto& x : dq)
    if (!x.ok) throw ArgumentError("mixture_tv_mc: singular covariance");
  auto mix_logpdf = [](const std::vector<Density>& ds, const Mixture& mx, const Mat& Xs) {
    Mat lp(Xs.rows(), static_cast<Eigen::Index>(ds.size()));
    for (std::size_t j = 0; j < ds.size(); ++j)
      lp.col(static_cast<Eigen::Index>(j)) =
          log_density(ds[j], Xs).array() + std::log(std::max(mx.components[j].weight, 1e-300));
    const Vec mx_row = lp.rowwise().maxCoeff();
    return Vec(mx_row.array() + (lp.colwise() - mx_row).array().exp().rowwise().sum().log());
  };
  Rng rng(opts.seed);
  const std::vector<double> w = p.weights();
  std::discrete_distribution<int> pick(w.begin(), w.end());
  double s = 0.0, s2 = 0.0;
  for (long done = 0; done < opts.samples; done += kBatch) {
    const Eigen::Index m = std::min<long>(kBatch, opts.samples - done);
    Mat Xs(m, p.dim());
    for (Eigen::Index i = 0; i < m; ++i) Xs.row(i) = sample_rows(dp[pick(rng)], 1, rng);
    const Vec diff = mix_logpdf(dq, q, Xs) - mix_logpdf(dp, p, Xs);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double v = diff(i) >= 0.0 ? 0.0 : -std::expm1(diff(i));
      s += v;
      s2 += v * v;
    }
  }
  const double n = static_cast<double>(opts.samples);
  TvResult r;
  r.value = s / n;
  r.std_error = std::sqrt(std::max(0.0, s2 / n - r.value * r.value) / (n - 1.0));
  return r;
}

std::vector<int> hungarian(const Mat& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw ShapeError("hungarian: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assign(n);
  for (int j = 1; j <= n; ++j) assign[p[j] - 1] = j - 1;
  return assign;
}

std::vector<int> match_components(const Mixture& truth, const Mixture& est, long cost_samples, std::uint64_t seed) {
  if (truth.k() != est.k()) throw ShapeError("match_components: component counts differ");
  const int k = truth.k();
  Mat cost(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      TvOptions o;
      o.samples = cost_samples;
      o.seed = splitmix64(seed ^ static_cast<std::uint64_t>(i * k + j));
      cost(i, j) = tv_gaussians(truth.components[i], est.components[j], o).value;
    }
  return hungarian(cost);
}

EvalResult learning_verdict(const Mixture& truth, const Mixture& est, const AccuracyParams& acc,
                            const VerdictOptions& opts) {
  EvalResult r;
  r.permutation = match_components(truth, est, opts.cost_samples, opts.tv.seed);
  const int k = truth.k();
  r.tv_ok = r.weights_ok = true;
  double wsum = 0.0, wabs = 0.0;
  for (int i = 0; i < k; ++i) {
    const auto& a = truth.components[i];
    const auto& b = est.components[r.permutation[i]];
    const TvResult tv = tv_gaussians(a, b, opts.tv);
    r.per_component_tv.push_back(tv.value);
    r.tv_std_error.push_back(tv.std_error);
    const double dw = std::abs(a.weight - b.weight);
    r.weight_errors.push_back(dw);
    wsum += a.weight * tv.value;
    wabs += dw;
    if (tv.value > opts.tv_factor * acc.alpha) r.tv_ok = false;
    if (dw > opts.weight_factor * acc.alpha / k) r.weights_ok = false;
  }
  r.mixture_tv_upper = std::min(1.0, wsum + 0.5 * wabs);
  r.pass = r.tv_ok && r.weights_ok;
  return r;
}

double clustering_accuracy(const std::vector<int>& truth, const std::vector<int>& predicted, int k) {
  if (truth.size() != predicted.size()) throw ShapeError("clustering_accuracy: length mismatch");
  if (truth.empty()) return 1.0;
  Mat cost = Mat::Zero(k, k);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 1 || truth[i] > k) throw ArgumentError("clustering_accuracy: label out of range");
    if (predicted[i] < 0) throw ArgumentError("clustering_accuracy: negative cluster id");
    if (predicted[i] < k) cost(truth[i] - 1, predicted[i]) -= 1.0;
  }
  const std::vector<int> a = hungarian(cost);
  double hit = 0.0;
  for (int i = 0; i < k; ++i) hit -= cost(i, a[i]);
  return hit / static_cast<double>(truth.size());
}

LaminarityReport laminarity(const Partition& p, const std::vector<int>& labels, int k_prime, double w_min,
                            double alpha) {
  LaminarityReport r;
  const double n = static_cast<double>(labels.size());
  r.budget = n * w_min * alpha / (10.0 * k_prime * std::log(1.0 / alpha));
  r.omitted = static_cast<long>(p.omitted.size());
  r.within_budget = static_cast<double>(r.omitted) <= r.budget;
  if (!r.within_budget)
    r.problems.push_back("omitted " + std::to_string(r.omitted) + " points, budget " + std::to_string(r.budget));
  std::map<int, std::size_t> owner;
  for (std::size_t c = 0; c < p.clusters.size(); ++c) {
    std::set<int> seen;
    for (auto i : p.clusters[c]) {
      if (i < 0 || static_cast<std::size_t>(i) >= labels.size()) throw ShapeError("laminarity: index out of range");
      seen.insert(labels[i]);
    }
    if (seen.size() > 1) {
      r.pure = false;
      r.problems.push_back("cluster " + std::to_string(c + 1) + " mixes " + std::to_string(seen.size()) + " labels");
    }
    for (int l : seen) {
      const auto [it, fresh] = owner.emplace(l, c);
      if (!fresh) {
        r.disjoint = false;
        r.problems.push_back("label " + std::to_string(l) + " spans clusters " + std::to_string(it->second + 1) +
                             " and " + std::to_string(c + 1));
      }
    }
  }
  return r;
}

}  // namespace dpmix
