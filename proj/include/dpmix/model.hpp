// Mixture/data types, synthetic sampling and the regularity-condition
// checkers.
#ifndef DPMIX_MODEL_HPP
#define DPMIX_MODEL_HPP

#include <optional>
#include <string>
#include <vector>

#include "dpmix/core.hpp"

namespace dpmix {

template <typename Scalar>
struct GaussianComponent {
  Vector<Scalar> mean;
  Matrix<Scalar> covariance;
  Scalar weight = Scalar(1);
  bool spherical = false;

  static GaussianComponent make_spherical(const Vector<Scalar>& mu, Scalar sigma2,
                                          Scalar w) {
    GaussianComponent g;
    g.mean = mu;
    g.covariance = Matrix<Scalar>::Identity(mu.size(), mu.size()) * sigma2;
    g.weight = w;
    g.spherical = true;
    return g;
  }

  Eigen::Index dim() const { return mean.size(); }

  // Largest directional variance (spectral norm of the covariance).
  Scalar sigma2() const {
    if (spherical && covariance.size() > 0) return covariance(0, 0);
    if (covariance.size() == 0) return Scalar(0);
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(covariance, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
};

template <typename Scalar>
struct MixtureModel {
  std::vector<GaussianComponent<Scalar>> components;

  int k() const { return static_cast<int>(components.size()); }
  Eigen::Index dim() const { return components.empty() ? 0 : components.front().dim(); }

  std::vector<Scalar> weights() const {
    std::vector<Scalar> w;
    w.reserve(components.size());
    for (const auto& c : components) w.push_back(c.weight);
    return w;
  }
};

template <typename Scalar>
struct LabelledDataset {
  Matrix<Scalar> points;   // n x d
  std::vector<int> labels;  // empty, or n values in [1..k]

  Eigen::Index n() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
  bool has_labels() const { return !labels.empty(); }
};

using Component = GaussianComponent<double>;
using Mixture = MixtureModel<double>;
using Dataset = LabelledDataset<double>;

struct BoundsConfig {
  double R = 1.0;
  double sigma_min = 1.0;
  double sigma_max = 1.0;
  double w_min = 1.0;
  double separation = 0.0;
  double kappa = 1.0;

  void validate(int k) const;
};

struct AccuracyParams {
  double alpha = 0.1;
  double beta = 0.1;

  void validate() const;
};

// Throws InvalidModelError on a malformed mixture. Zero covariances are only
// accepted when allow_degenerate is set (test mode).
void validate_mixture(const Mixture& model, bool allow_degenerate = false);

// Square-root factor A with A*A^T = cov after clamping tiny negative
// eigenvalues (>= -1e-9 * spectral norm) to zero.
Mat covariance_factor(const Mat& cov, bool allow_degenerate = false);

Dataset sample_mixture(const Mixture& model, Eigen::Index n, Rng& rng,
                       bool allow_degenerate = false);

struct NumPointsReport {
  std::vector<long> counts;
  std::vector<bool> clause1;                // [n w/2, 3 n w/2]
  std::vector<std::optional<bool>> clause2;  // only evaluated when w >= 4 alpha / 9k
  bool all_pass() const;
};

NumPointsReport check_condition_numpoints(const Dataset& ds, const std::vector<double>& weights,
                                          double alpha);

struct RadiusCheck {
  bool skipped = false;  // empty label class
  double radius = 0.0;   // label-mean-centered enclosing radius
  double lower = 0.0;
  double upper = 0.0;
  bool lower_ok = false;
  bool upper_ok = false;
  bool pass() const { return skipped || (lower_ok && upper_ok); }
};

struct RadiusReport {
  std::vector<RadiusCheck> components;
  std::vector<std::string> warnings;
  bool all_pass() const;
};

RadiusReport check_condition_radius(const Dataset& ds, const Mixture& model);

bool check_condition_separation(const Dataset& ds, const Mixture& model, double C);

struct FlatnessCheck {
  double frobenius_lhs = 0.0;
  double spectral_lhs = 0.0;
  double rhs = 0.0;
  bool frobenius_ok = false;
  bool spectral_ok = false;
  bool pass() const { return frobenius_ok && spectral_ok; }
};

std::vector<FlatnessCheck> check_flatness(const Mixture& model, double n, int k, double beta);

// Pairwise mean separation required by the general (non-spherical) learner:
// C (sigma_i + sigma_j) (sqrt(k log n) + 1/sqrt(w_i) + 1/sqrt(w_j)).
double general_separation(double sigma_i, double sigma_j, double w_i, double w_j, int k,
                          double n, double C = 100.0);

struct PlantedSpec {
  int k = 1;
  Eigen::Index d = 1;
  BoundsConfig bounds;
  bool spherical = true;
  // Absolute minimum distance between any two means.
  double separation = 0.0;
  // When positive, pairs must also satisfy general_separation with this
  // constant and the n below.
  double general_constant = 0.0;
  double general_n = 0.0;
  std::vector<double> weights;  // empty -> uniform
  int max_retries = 1000;
  // Simplex: means at the vertices of a randomly rotated regular simplex
  // centred at the origin whose edge is the largest required separation.
  // Needed when the separation is close to the largest one the R-ball admits.
  enum class Placement { Uniform, Simplex } placement = Placement::Uniform;
};

struct PlantedInstance {
  Mixture model;
  Dataset data;
};

Mixture planted_model(const PlantedSpec& spec, Rng& rng);
PlantedInstance planted_instance(const PlantedSpec& spec, Eigen::Index n, Rng& rng);

}  // namespace dpmix

#endif  // DPMIX_MODEL_HPP
