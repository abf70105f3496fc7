// Single-component private estimators and mixing-weight estimation.
#ifndef DPMIX_ESTIMATE_HPP
#define DPMIX_ESTIMATE_HPP

#include <string>
#include <vector>

#include "dpmix/core.hpp"
#include "dpmix/dp.hpp"
#include "dpmix/location.hpp"
#include "dpmix/model.hpp"

namespace dpmix {

struct SphericalEstimate {
  Vec mean;
  double sigma2 = 0.0;
  long in_ball = 0;
  double noisy_count = 0.0;
  std::vector<std::string> warnings;
};

struct GaussianEstimate {
  Vec mean;
  Mat covariance;
  std::vector<std::string> warnings;
};

// Rows of X are used in their given order; pairs are consecutive in-ball rows.
SphericalEstimate psge(const Mat& X, const BallD& ball, const PrivacyParams& pp, Rng& rng,
                       BudgetLedger* ledger = nullptr, const std::string& stage = "", double beta = 0.1);

// Clip-and-noise stand-in for a general Gaussian estimator: (ε/2, δ/2) on the
// mean, (ε/2, δ/2) on the second moment.
GaussianEstimate pge(const Mat& X, const BoundsConfig& bounds, const PrivacyParams& pp, Rng& rng,
                     BudgetLedger* ledger = nullptr, const std::string& stage = "");

struct WeightEstimate {
  std::vector<double> weights;
  bool fallback_uniform = false;
};

// ñ / Σñ; a non-positive total falls back to uniform.
WeightEstimate estimate_weights(const std::vector<double>& noisy_counts);

}  // namespace dpmix

#endif  // DPMIX_ESTIMATE_HPP
