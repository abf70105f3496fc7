// Private cluster location: the capped terrific-ball query and its score,
// the radius search, the full terrific-ball procedure and grid-snapped
// private location for Gaussian data.
#ifndef DPMIX_LOCATION_HPP
#define DPMIX_LOCATION_HPP

#include <optional>
#include <string>
#include <vector>

#include "dpmix/core.hpp"
#include "dpmix/dp.hpp"
#include "dpmix/model.hpp"

namespace dpmix {

template <typename Scalar>
struct Ball {
  Vector<Scalar> center;
  Scalar radius = Scalar(0);

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& x) const {
    return (x.derived().transpose() - center).squaredNorm() <= radius * radius;
  }
};
using BallD = Ball<double>;

struct TerrificConfig {
  long t = 1;
  double c = 5.0;
  bool largest = false;
  double L = 1.0;
  double U = 2.0;

  void validate() const;
  // T = ⌈log₂(U/L)⌉ + 1.
  int grid_count() const;
  // {L·2^i : L·2^i < U} ∪ {U}, reversed when largest.
  std::vector<double> radius_grid() const;
  // (16/ε)(ln T + ln(2/β)); zero in zero-noise mode.
  double gamma(double epsilon, double beta) const;
};

// Counts for one center: inside the closed ball, outside B(p, c r), and in
// the half-open annulus B(p, c r) \ B(p, r).
struct BallSplit {
  long inside = 0;
  long outside = 0;
  long annulus = 0;
};

BallSplit ball_split(const Mat& X, const Vec& p, double r, double c);

// min(#ᵗ inside, #ᵗ outside, t − #ᵗ annulus).
long capped_query(long inside, long outside, long annulus, long t);
long terrific_query(const Mat& X, const Vec& p, double r, const TerrificConfig& cfg);

// Mean of the t largest per-point queries (direct evaluation).
double score_L(const Mat& X, double r, const TerrificConfig& cfg);
// Scores for many radii in one exact counting pass.
std::vector<double> score_L_many(const Mat& X, const std::vector<double>& radii,
                                 const TerrificConfig& cfg);

// Definition-level check with slack: inside ≥ t − slack, outside ≥ t − slack,
// annulus ≤ slack.
bool is_terrific(const Mat& X, const BallD& ball, double c, long t, double slack);

struct RadiusSearch {
  std::optional<double> radius;
  std::vector<double> visited;  // radii in query order
  std::vector<double> scores;   // exact scores, same order
  double gamma = 0.0;
  std::string diagnostic;
};

RadiusSearch terrific_radius(const Mat& X, const TerrificConfig& cfg, double epsilon, double beta,
                             Rng& rng, BudgetLedger* ledger = nullptr, const std::string& stage = "",
                             int level = -1);

struct TerrificBallResult {
  std::optional<BallD> ball;
  double r_tilde = 0.0;
  double gamma = 0.0;
  Eigen::Index center_index = -1;
  RadiusSearch search;
  std::string diagnostic;
};

// Radius search with ε/2, then data-point candidates (index order) screened by
// AboveThreshold on the query at radius (1 + c/10)·r̃ with ε/2 and δ.
TerrificBallResult terrific_ball(const Mat& X, const TerrificConfig& cfg, const PrivacyParams& pp,
                                 double beta, Rng& rng, BudgetLedger* ledger = nullptr,
                                 const std::string& stage = "", int level = -1);

enum class CenterBackend { Grid, Data };

struct LocationOptions {
  CenterBackend backend = CenterBackend::Data;
  long grid_cap = 4096;
  Eigen::Index max_data_candidates = 256;
  double beta = 0.1;
};

struct PglocResult {
  std::optional<BallD> ball;
  bool nonprivate_candidates = false;
  double lambda = 0.0;
  double core_radius = 0.0;  // before the λ√ℓ inflation
  Eigen::Index candidate_index = -1;
  long candidate_count = 0;
  std::string diagnostic;
};

// Snap to the λ = σ_min/10 grid clamped to [−(R + 3√ℓσ_max), R + 3√ℓσ_max]^ℓ,
// search (radius, candidate) pairs with AboveThreshold on the ball count,
// inflate the radius by λ√ℓ.
PglocResult pgloc(const Mat& X, double t, const PrivacyParams& pp, double R, double sigma_min,
                  double sigma_max, const LocationOptions& opts, Rng& rng,
                  BudgetLedger* ledger = nullptr, const std::string& stage = "", int level = -1);

// Shared screening used by pgloc and the aggregation step: the first
// (radius, candidate) pair, radii outer and candidates inner, whose noisy ball
// count clears max(t/2, t − Γ).
struct ScreenResult {
  std::optional<std::size_t> radius_index;
  std::optional<Eigen::Index> candidate_index;
  double threshold = 0.0;
};

ScreenResult screen_candidates(const Mat& candidates, const Mat& points, const std::vector<double>& radii,
                               double t, double epsilon, double beta, Rng& rng);

}  // namespace dpmix

#endif  // DPMIX_LOCATION_HPP
