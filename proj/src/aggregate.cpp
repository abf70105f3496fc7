#include <algorithm>
#include <cmath>

#include "dpmix/learn.hpp"
#include "dpmix/pca.hpp"

namespace dpmix {

namespace {

constexpr int kLloydIterations = 10;

// Farthest-point seeding in the projected coordinates, then Lloyd steps.
std::vector<int> cluster_projected(const Mat& P, int k) {
  const Eigen::Index n = P.rows();
  std::vector<int> lab(n, 0);
  if (n == 0) return lab;
  if (k >= n) {
    for (Eigen::Index i = 0; i < n; ++i) lab[i] = static_cast<int>(i);
    return lab;
  }
  const Vec mean = P.colwise().mean().transpose();
  Eigen::Index first;
  (P.rowwise() - mean.transpose()).rowwise().squaredNorm().maxCoeff(&first);
  Mat seeds(k, P.cols());
  seeds.row(0) = P.row(first);
  Vec dist = (P.rowwise() - seeds.row(0)).rowwise().squaredNorm();
  for (int s = 1; s < k; ++s) {
    Eigen::Index far;
    dist.maxCoeff(&far);
    seeds.row(s) = P.row(far);
    dist = dist.cwiseMin((P.rowwise() - seeds.row(s)).rowwise().squaredNorm());
  }
  for (int it = 0; it < kLloydIterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best;
      (seeds.rowwise() - P.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (lab[i] != static_cast<int>(best) || it == 0) {
        changed |= lab[i] != static_cast<int>(best);
        lab[i] = static_cast<int>(best);
      }
    }
    if (!changed && it > 0) break;
    Mat sum = Mat::Zero(k, P.cols());
    std::vector<long> cnt(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sum.row(lab[i]) += P.row(i);
      ++cnt[lab[i]];
    }
    for (int s = 0; s < k; ++s)
      if (cnt[s] > 0) seeds.row(s) = sum.row(s) / static_cast<double>(cnt[s]);
  }
  return lab;
}

}  // namespace

std::vector<int> spectral_assign(const Mat& X, int k) {
  if (k < 1) throw ArgumentError("spectral learner: k must be >= 1");
  if (X.rows() == 0) return {};
  const Mat Xc = X.rowwise() - X.colwise().mean();
  const int kk = static_cast<int>(std::min<Eigen::Index>(k, X.cols()));
  const Mat P = Xc * top_subspace(Xc.transpose() * Xc, kk);
  return cluster_projected(P, k);
}

BatchOutput nonprivate_spectral_learner(const Mat& X, int k) {
  const std::vector<int> lab = spectral_assign(X, k);
  BatchOutput out;
  out.means = Mat::Zero(k, X.cols());
  out.weights.assign(k, 0.0);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out.means.row(lab[i]) += X.row(i);
    out.weights[lab[i]] += 1.0;
  }
  for (int s = 0; s < k; ++s) {
    if (out.weights[s] > 0) out.means.row(s) /= out.weights[s];
    out.weights[s] /= std::max<double>(1.0, static_cast<double>(X.rows()));
  }
  return out;
}

AggregateResult sample_aggregate(const Mat& X, const BatchLearner& learner, const LearnerConfig& cfg, Rng& rng,
                                 BudgetLedger* ledger) {
  const PrivacyParams pp = cfg.privacy();
  pp.validate();
  const int k = cfg.k;
  const int m = cfg.batches;
  if (m < 1) throw ArgumentError("sample_aggregate: need at least one batch");
  const Eigen::Index nb = X.rows() / m;
  if (nb < 1) throw InsufficientDataError("sample_aggregate: fewer points than batches");
  AggregateResult res;
  if (X.rows() % m != 0)
    res.notes.push_back(std::to_string(X.rows() % m) + " trailing points not assigned to any batch");

  const Eigen::Index d = X.cols();
  Mat pool(static_cast<Eigen::Index>(m) * k, d);
  std::vector<double> pool_w(static_cast<std::size_t>(m) * k);
  for (int b = 0; b < m; ++b) {
    const BatchOutput o = learner(X.middleRows(b * nb, nb), k);
    if (o.means.rows() != k || o.means.cols() != d || static_cast<int>(o.weights.size()) != k)
      throw ShapeError("sample_aggregate: batch learner returned the wrong shape");
    pool.middleRows(static_cast<Eigen::Index>(b) * k, k) = o.means;
    std::copy(o.weights.begin(), o.weights.end(), pool_w.begin() + static_cast<long>(b) * k);
  }

  const double radius = cfg.aggregate_radius_factor * cfg.alpha * cfg.bounds.sigma_min;
  const double bin = cfg.weight_bin_factor * cfg.alpha / k;
  const PrivacyParams round_pp{pp.is_zero_noise() ? pp.epsilon : pp.epsilon / std::sqrt(k * std::log(1.0 / pp.delta)),
                               0.0};
  std::vector<Eigen::Index> active(pool.rows());
  for (Eigen::Index i = 0; i < pool.rows(); ++i) active[i] = i;

  std::vector<double> weights;
  for (int j = 0; j < k; ++j) {
    if (ledger) {
      LedgerEntry e;
      e.mechanism = "noisy_max";
      e.epsilon = round_pp.epsilon;
      e.stage = "aggregate/loc";
      e.nonprivate_candidates = true;
      ledger->append(std::move(e));
    }
    if (active.empty()) {
      res.complete = false;
      res.notes.push_back("round " + std::to_string(j + 1) + ": no candidates left");
      break;
    }
    // Score = number of distinct batches with a mean inside the ball, so one
    // changed point (one batch) moves every score by at most 1.
    std::vector<double> score(active.size(), 0.0);
    for (std::size_t a = 0; a < active.size(); ++a) {
      const Vec ca = pool.row(active[a]).transpose();
      int last = -1;
      for (auto i : active) {
        const int batch = static_cast<int>(i / k);
        if (batch != last && (pool.row(i).transpose() - ca).norm() <= radius) {
          score[a] += 1.0;
          last = batch;
        }
      }
    }
    const Vec c = pool.row(active[report_noisy_max(score, 1.0, round_pp.epsilon, rng)]).transpose();
    res.balls.push_back({c, radius});
    std::vector<double> attached;
    std::vector<Eigen::Index> keep;
    // One weight per batch: the batch mean closest to c, if inside the ball.
    int cur = -1;
    double cur_dist = 0.0, cur_w = 0.0;
    auto flush = [&] {
      if (cur >= 0 && cur_dist <= radius) attached.push_back(cur_w);
    };
    for (auto i : active) {
      const double dist = (pool.row(i).transpose() - c).norm();
      const int batch = static_cast<int>(i / k);
      if (batch != cur) {
        flush();
        cur = batch;
        cur_dist = dist;
        cur_w = pool_w[i];
      } else if (dist < cur_dist) {
        cur_dist = dist;
        cur_w = pool_w[i];
      }
      if (dist > 2.0 * radius) keep.push_back(i);
    }
    flush();
    active = std::move(keep);
    const auto hb = stability_histogram(attached, bin, pp, rng, ledger, "aggregate/weights");
    if (hb) {
      weights.push_back((static_cast<double>(*hb) + 0.5) * bin);
    } else {
      weights.push_back(1.0 / k);
      res.notes.push_back("round " + std::to_string(j + 1) + ": weight histogram returned no bin; using 1/k");
    }
    res.model.components.push_back(Component::make_spherical(c, cfg.bounds.sigma_min * cfg.bounds.sigma_min, 0.0));
  }
  double total = 0.0;
  for (double w : weights) total += w;
  for (std::size_t j = 0; j < weights.size(); ++j)
    res.model.components[j].weight = total > 0 ? weights[j] / total : 1.0 / static_cast<double>(weights.size());
  return res;
}

}  // namespace dpmix
