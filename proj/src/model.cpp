#include "dpmix/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace dpmix {

void BoundsConfig::validate(int k) const {
  if (!(sigma_min > 0.0) || !(sigma_max >= sigma_min))
    throw ArgumentError("bounds: need 0 < sigma_min <= sigma_max");
  if (!(R > 0.0)) throw ArgumentError("bounds: R must be positive");
  if (!(w_min > 0.0) || w_min > 1.0 / k + 1e-12)
    throw ArgumentError("bounds: need 0 < w_min <= 1/k");
  if (!(kappa >= 1.0)) throw ArgumentError("bounds: kappa must be >= 1");
}

void AccuracyParams::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0))
    throw ArgumentError("accuracy: alpha and beta must lie in (0,1)");
}

void validate_mixture(const Mixture& model, bool allow_degenerate) {
  if (model.components.empty()) throw InvalidModelError("mixture has no components");
  const Eigen::Index d = model.dim();
  if (d < 1) throw InvalidModelError("mixture dimension must be positive");
  double total = 0.0;
  for (const auto& c : model.components) {
    if (c.mean.size() != d || c.covariance.rows() != d || c.covariance.cols() != d)
      throw InvalidModelError("component dimension mismatch");
    if (!(c.weight >= 0.0) || c.weight > 1.0) throw InvalidModelError("weight outside [0,1]");
    if ((c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff() >
        1e-9 * std::max(1.0, c.covariance.cwiseAbs().maxCoeff()))
      throw InvalidModelError("covariance is not symmetric");
    covariance_factor(c.covariance, allow_degenerate);
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidModelError("weights do not sum to 1");
}

Mat covariance_factor(const Mat& cov, bool allow_degenerate) {
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  if (es.info() != Eigen::Success) throw InvalidModelError("covariance eigendecomposition failed");
  Vec ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  if (top == 0.0) {
    if (!allow_degenerate) throw InvalidModelError("zero covariance outside test mode");
    return Mat::Zero(cov.rows(), cov.cols());
  }
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-9 * top) throw InvalidModelError("covariance is not PSD");
    ev(i) = std::max(ev(i), 0.0);
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

Dataset sample_mixture(const Mixture& model, Eigen::Index n, Rng& rng, bool allow_degenerate) {
  if (n < 1) throw ArgumentError("sample_mixture: n must be >= 1");
  validate_mixture(model, allow_degenerate);
  const Eigen::Index d = model.dim();
  const int k = model.k();
  std::vector<Mat> factors;
  factors.reserve(k);
  for (const auto& c : model.components) factors.push_back(covariance_factor(c.covariance, allow_degenerate));
  const std::vector<double> w = model.weights();
  std::vector<double> cum(k);
  std::partial_sum(w.begin(), w.end(), cum.begin());

  Dataset ds;
  ds.points.resize(n, d);
  ds.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = uniform_open01(rng) * cum.back();
    int j = 0;
    while (j < k - 1 && (u >= cum[j] || w[j] == 0.0)) ++j;
    while (w[j] == 0.0 && j > 0) --j;
    ds.labels[i] = j + 1;
    ds.points.row(i) = (model.components[j].mean + factors[j] * standard_normal_vector(d, rng)).transpose();
  }
  return ds;
}

bool NumPointsReport::all_pass() const {
  for (std::size_t i = 0; i < clause1.size(); ++i) {
    if (!clause1[i]) return false;
    if (clause2[i].has_value() && !*clause2[i]) return false;
  }
  return true;
}

NumPointsReport check_condition_numpoints(const Dataset& ds, const std::vector<double>& weights,
                                          double alpha) {
  if (!ds.has_labels()) throw UsageError("check_condition_numpoints: labels required");
  const int k = static_cast<int>(weights.size());
  const double n = static_cast<double>(ds.n());
  NumPointsReport rep;
  rep.counts.assign(k, 0);
  for (int lab : ds.labels) {
    if (lab < 1 || lab > k) throw UsageError("label outside [1..k]");
    ++rep.counts[lab - 1];
  }
  for (int u = 0; u < k; ++u) {
    const double c = static_cast<double>(rep.counts[u]);
    const double w = weights[u];
    rep.clause1.push_back(c >= n * w / 2.0 && c <= 3.0 * n * w / 2.0);
    if (w >= 4.0 * alpha / (9.0 * k)) {
      const double slack = alpha / (9.0 * k);
      rep.clause2.emplace_back(c >= n * (w - slack) && c <= n * (w + slack));
    } else {
      rep.clause2.emplace_back(std::nullopt);
    }
  }
  return rep;
}

bool RadiusReport::all_pass() const {
  return std::all_of(components.begin(), components.end(), [](const RadiusCheck& c) { return c.pass(); });
}

RadiusReport check_condition_radius(const Dataset& ds, const Mixture& model) {
  if (!ds.has_labels()) throw UsageError("check_condition_radius: labels required");
  const int k = model.k();
  const double ell = static_cast<double>(ds.dim());
  RadiusReport rep;
  rep.components.resize(k);
  std::vector<Vec> sums(k, Vec::Zero(ds.dim()));
  std::vector<long> counts(k, 0);
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    const int u = ds.labels[i] - 1;
    sums[u] += ds.points.row(i).transpose();
    ++counts[u];
  }
  std::vector<double> far(k, 0.0);
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    const int u = ds.labels[i] - 1;
    const Vec mu = sums[u] / static_cast<double>(counts[u]);
    far[u] = std::max(far[u], (ds.points.row(i).transpose() - mu).norm());
  }
  for (int u = 0; u < k; ++u) {
    auto& c = rep.components[u];
    if (counts[u] == 0) {
      c.skipped = true;
      rep.warnings.push_back("label " + std::to_string(u + 1) + " has no points; skipped");
      continue;
    }
    const double sigma = std::sqrt(model.components[u].sigma2());
    c.radius = far[u];
    c.lower = std::sqrt(ell) * sigma / 2.0;
    c.upper = std::sqrt(3.0 * ell) * sigma;
    c.lower_ok = c.radius >= c.lower;
    c.upper_ok = c.radius <= c.upper;
  }
  return rep;
}

bool check_condition_separation(const Dataset& ds, const Mixture& model, double C) {
  if (!ds.has_labels()) throw UsageError("check_condition_separation: labels required");
  const int k = model.k();
  if (k <= 1) return true;
  double smax = 0.0;
  for (const auto& c : model.components) smax = std::max(smax, std::sqrt(c.sigma2()));
  const double bound = C / 2.0 * std::sqrt(static_cast<double>(ds.dim())) * smax;
  const double bound2 = bound * bound;
  const Eigen::Index n = ds.n();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (ds.labels[i] == ds.labels[j]) continue;
      if ((ds.points.row(i) - ds.points.row(j)).squaredNorm() < bound2) return false;
    }
  }
  return true;
}

std::vector<FlatnessCheck> check_flatness(const Mixture& model, double n, int k, double beta) {
  const double lg = std::log(n * k / beta);
  std::vector<FlatnessCheck> out;
  for (const auto& c : model.components) {
    FlatnessCheck f;
    const double tr = c.covariance.trace();
    f.rhs = tr / 8.0;
    f.frobenius_lhs = c.covariance.norm() * std::sqrt(lg);
    f.spectral_lhs = c.sigma2() * lg;
    f.frobenius_ok = f.frobenius_lhs <= f.rhs;
    f.spectral_ok = f.spectral_lhs <= f.rhs;
    out.push_back(f);
  }
  return out;
}

double general_separation(double sigma_i, double sigma_j, double w_i, double w_j, int k, double n,
                          double C) {
  return C * (sigma_i + sigma_j) *
         (std::sqrt(k * std::log(n)) + 1.0 / std::sqrt(w_i) + 1.0 / std::sqrt(w_j));
}

namespace {

Vec uniform_in_ball(Eigen::Index d, double radius, Rng& rng) {
  Vec dir = standard_normal_vector(d, rng);
  dir.normalize();
  return dir * radius * std::pow(uniform_open01(rng), 1.0 / static_cast<double>(d));
}

Mat random_rotation(Eigen::Index d, Rng& rng) {
  Mat g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = standard_normal(rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

double uniform_between(double lo, double hi, Rng& rng) { return lo + (hi - lo) * uniform_open01(rng); }

}  // namespace

Mixture planted_model(const PlantedSpec& spec, Rng& rng) {
  const int k = spec.k;
  const Eigen::Index d = spec.d;
  if (k < 1 || d < 1) throw ArgumentError("planted_instance: k and d must be positive");
  spec.bounds.validate(k);
  std::vector<double> w = spec.weights;
  if (w.empty()) w.assign(k, 1.0 / k);
  if (static_cast<int>(w.size()) != k) throw ArgumentError("planted_instance: weights size != k");
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  if (std::abs(wsum - 1.0) > 1e-9) throw ArgumentError("planted_instance: weights must sum to 1");
  for (double x : w)
    if (x < spec.bounds.w_min - 1e-12) throw InfeasibleError("planted_instance: weight below w_min");

  const auto& b = spec.bounds;
  Mixture model;
  model.components.resize(k);
  std::vector<double> sig(k);
  for (int i = 0; i < k; ++i) {
    auto& c = model.components[i];
    c.weight = w[i];
    if (spec.spherical) {
      const double hi = std::min(b.sigma_max * b.sigma_max, b.kappa * b.sigma_min * b.sigma_min);
      const double s2 = uniform_between(b.sigma_min * b.sigma_min, hi, rng);
      c.covariance = Mat::Identity(d, d) * s2;
      c.spherical = true;
      sig[i] = std::sqrt(s2);
    } else {
      Vec ev(d);
      for (Eigen::Index j = 0; j < d; ++j)
        ev(j) = uniform_between(b.sigma_min * b.sigma_min, b.sigma_max * b.sigma_max, rng);
      const Mat q = random_rotation(d, rng);
      c.covariance = q * ev.asDiagonal() * q.transpose();
      c.covariance = 0.5 * (c.covariance + c.covariance.transpose()).eval();
      sig[i] = std::sqrt(ev.maxCoeff());
    }
  }

  Mat need = Mat::Zero(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      double s = spec.separation;
      if (spec.general_constant > 0.0)
        s = std::max(s, general_separation(sig[i], sig[j], w[i], w[j], k, spec.general_n,
                                           spec.general_constant));
      need(i, j) = need(j, i) = s;
    }

  if (spec.placement == PlantedSpec::Placement::Simplex && k > 1) {
    if (d < k) throw InfeasibleError("planted_instance: simplex placement needs d >= k");
    const double edge = need.maxCoeff();
    const double circ = edge * std::sqrt((k - 1.0) / (2.0 * k));
    if (circ > b.R) throw InfeasibleError("planted_instance: simplex with the required edge does not fit in the R-ball");
    const Mat q = random_rotation(d, rng);
    for (int i = 0; i < k; ++i) {
      Vec v = Vec::Constant(d, 0.0);
      v.head(k).setConstant(-1.0 / k);
      v(i) += 1.0;
      model.components[i].mean = q * (v * (edge / std::sqrt(2.0)));
    }
    return model;
  }
  for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
    std::vector<Vec> mu(k);
    for (int i = 0; i < k; ++i) mu[i] = uniform_in_ball(d, b.R, rng);
    bool ok = true;
    for (int i = 0; i < k && ok; ++i)
      for (int j = i + 1; j < k && ok; ++j) ok = (mu[i] - mu[j]).norm() >= need(i, j);
    if (!ok) continue;
    for (int i = 0; i < k; ++i) model.components[i].mean = mu[i];
    return model;
  }
  std::ostringstream msg;
  msg << "planted_instance: could not place " << k << " means in a ball of radius " << b.R
      << " with the required separation after " << spec.max_retries << " attempts";
  throw InfeasibleError(msg.str());
}

PlantedInstance planted_instance(const PlantedSpec& spec, Eigen::Index n, Rng& rng) {
  PlantedInstance inst;
  inst.model = planted_model(spec, rng);
  inst.data = sample_mixture(inst.model, n, rng);
  return inst;
}

}  // namespace dpmix
