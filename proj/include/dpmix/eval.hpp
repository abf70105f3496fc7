// Evaluation against ground truth: component matching, total variation,
// learning verdicts, clustering accuracy and laminarity.
#ifndef DPMIX_EVAL_HPP
#define DPMIX_EVAL_HPP

#include <optional>
#include <string>
#include <vector>

#include "dpmix/core.hpp"
#include "dpmix/learn.hpp"
#include "dpmix/model.hpp"

namespace dpmix {

struct TvResult {
  double value = 0.0;
  double std_error = 0.0;  // zero for the closed form
  bool closed_form = false;
  bool singular = false;  // a covariance was singular; value forced to 1 unless identical
};

struct TvOptions {
  long samples = 1000000;
  std::uint64_t seed = 0x5eed;
};

// d = 1: exact via the density crossing points. d > 1: Monte Carlo estimate of
// E_{x~g1}[max(0, 1 − p2(x)/p1(x))].
TvResult tv_gaussians(const Component& g1, const Component& g2, const TvOptions& opts = {});

// Monte Carlo TV between two mixtures, same estimator as above.
TvResult mixture_tv_mc(const Mixture& p, const Mixture& q, const TvOptions& opts = {});

// Minimum-cost assignment for a square cost matrix; result[i] is the column
// assigned to row i.
std::vector<int> hungarian(const Mat& cost);

// perm[i] = index of the estimated component matched to truth component i,
// minimizing the summed TV. The cost matrix uses cost_samples per pair.
std::vector<int> match_components(const Mixture& truth, const Mixture& est, long cost_samples = 20000,
                                  std::uint64_t seed = 0x5eed);

struct VerdictOptions {
  double tv_factor = 1.0;             // per-component TV ≤ tv_factor·α
  double weight_factor = 1.0 / 3.0;   // |Δw| ≤ weight_factor·α/k
  TvOptions tv;
  long cost_samples = 20000;
};

struct EvalResult {
  std::vector<int> permutation;
  std::vector<double> per_component_tv;
  std::vector<double> tv_std_error;
  std::vector<double> weight_errors;
  double mixture_tv_upper = 0.0;
  bool tv_ok = false;
  bool weights_ok = false;
  bool pass = false;
  std::optional<double> clustering_accuracy;
  std::optional<bool> laminar;
};

EvalResult learning_verdict(const Mixture& truth, const Mixture& est, const AccuracyParams& acc,
                            const VerdictOptions& opts = {});

// Fraction of points whose predicted cluster maps to their true label under
// the best one-to-one relabelling. truth is 1-based, predicted is any
// non-negative id; ids beyond k count as errors.
double clustering_accuracy(const std::vector<int>& truth, const std::vector<int>& predicted, int k);

struct LaminarityReport {
  bool pure = true;      // every cluster holds a single label
  bool disjoint = true;  // no label appears in two clusters
  long omitted = 0;
  double budget = 0.0;   // n·w_min·α/(10k′ ln(1/α))
  bool within_budget = true;
  bool laminar() const { return pure && disjoint && within_budget; }
  std::vector<std::string> problems;
};

LaminarityReport laminarity(const Partition& p, const std::vector<int>& labels, int k_prime, double w_min,
                            double alpha);

}  // namespace dpmix

#endif  // DPMIX_EVAL_HPP
