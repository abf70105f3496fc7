// End-to-end learners: the easy-case spherical learner, the recursive
// partitioner with the general pipeline on top, and sample-and-aggregate.
#ifndef DPMIX_LEARN_HPP
#define DPMIX_LEARN_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpmix/core.hpp"
#include "dpmix/dp.hpp"
#include "dpmix/estimate.hpp"
#include "dpmix/location.hpp"
#include "dpmix/model.hpp"

namespace dpmix {

struct LearnerConfig {
  int k = 1;
  double epsilon = 1.0;
  double delta = 1e-6;
  double alpha = 0.1;
  double beta = 0.1;
  BoundsConfig bounds;
  std::uint64_t seed = 0;
  bool zero_noise = false;
  CenterBackend centers = CenterBackend::Data;

  // Easy-case learner knobs.
  double xi = 100.0;              // C = ξ + 16√κ (reported only)
  double ell_log_factor = 0.0;    // ℓ = max(k, ⌈factor·ln(n/β)⌉), capped at d
  // Sample-and-aggregate knobs.
  int batches = 50;
  double aggregate_radius_factor = 2.0;  // ball radius = factor·α·σ_min
  double weight_bin_factor = 1.0;        // histogram bin width = factor·α/k

  PrivacyParams privacy() const {
    return zero_noise ? PrivacyParams::zero_noise() : PrivacyParams{epsilon, delta};
  }
};

LearnerConfig learner_config_from_json(const nlohmann::json& j);
nlohmann::json learner_config_to_json(const LearnerConfig& cfg);

struct Partition {
  std::vector<std::vector<Eigen::Index>> clusters;
  std::vector<Eigen::Index> omitted;

  // Throws InternalError when clusters overlap or omitted is not the
  // complement of the cluster union in [0, n).
  void check(Eigen::Index n) const;
};

// ---- easy case -----------------------------------------------------------

struct PegmeDiagnostics {
  int ell = 0;
  double Lambda = 0.0;
  double loc_epsilon = 0.0;
  long truncated = 0;
  std::vector<BallD> projected_balls;  // peeling balls (radius already ×4√3)
  std::vector<BallD> lifted_balls;
  std::vector<long> cluster_sizes;
  std::vector<std::string> notes;
};

struct PegmeResult {
  std::optional<Mixture> model;
  PegmeDiagnostics diag;
};

PegmeResult pegme(const Mat& X, const LearnerConfig& cfg, Rng& rng, BudgetLedger* ledger);

// ---- general case --------------------------------------------------------

struct RpgmpNode {
  int level = 0;
  int k = 1;
  long size = 0;
  int step = 0;  // step that produced the split (3 or 6), 1 or 8 for a leaf
  std::optional<BallD> bounding_ball;
  std::optional<BallD> split_ball;
  std::string note;
};

struct RpgmpResult {
  Partition partition;
  std::vector<RpgmpNode> nodes;
  int depth = 0;  // number of levels that spent budget
};

struct RpgmpOptions {
  long n_root = 0;     // t = n_root·w_min/2; 0 means |X|
  double c = 5.0;
};

RpgmpResult rpgmp(const Mat& X, const LearnerConfig& cfg, Rng& rng, BudgetLedger* ledger,
                  const RpgmpOptions& opts = {});

// (2ε + 8ε√(2D ln(1/δ)), (8D + 1)δ) for D recursion levels.
PrivacyParams pgme_privacy_totals(double epsilon, double delta, int depth);
// Depth recovered from the level tags of a ledger.
int ledger_depth(const BudgetLedger& ledger);

struct LearnReport {
  std::string status = "ok";  // ok | abstained | partial
  std::string learner;
  std::optional<Mixture> model;
  BudgetLedger ledger;
  PrivacyParams totals{0.0, 0.0};
  nlohmann::json diagnostics = nlohmann::json::object();
};

LearnReport pgme(const Mat& X, const LearnerConfig& cfg, Rng& rng);

// Totals the reporting layer derives from a ledger for each learner.
PrivacyParams learner_totals(const std::string& learner, const BudgetLedger& ledger,
                             const LearnerConfig& cfg);

// ---- sample and aggregate -----------------------------------------------

struct BatchOutput {
  Mat means;  // k x d
  std::vector<double> weights;
};

using BatchLearner = std::function<BatchOutput(const Mat& batch, int k)>;

BatchOutput nonprivate_spectral_learner(const Mat& X, int k);
// Labels (0-based) assigned by the spectral learner, for accuracy audits.
std::vector<int> spectral_assign(const Mat& X, int k);

struct AggregateResult {
  Mixture model;
  bool complete = true;
  std::vector<BallD> balls;
  std::vector<std::string> notes;
};

AggregateResult sample_aggregate(const Mat& X, const BatchLearner& learner, const LearnerConfig& cfg, Rng& rng,
                                 BudgetLedger* ledger);

// Dispatch by learner name (pegme | pgme | aggregate).
LearnReport run_learner(const std::string& learner, const Mat& X, const LearnerConfig& cfg);

nlohmann::json report_to_json(const LearnReport& r);

}  // namespace dpmix

#endif  // DPMIX_LEARN_HPP
