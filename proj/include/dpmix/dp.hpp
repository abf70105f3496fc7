// Noise mechanisms, the sparse vector technique and budget bookkeeping.
#ifndef DPMIX_DP_HPP
#define DPMIX_DP_HPP

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dpmix/core.hpp"

namespace dpmix {

struct PrivacyParams {
  double epsilon = 1.0;
  double delta = 0.0;

  // epsilon = +inf is the zero-noise sentinel: mechanisms skip noise but still
  // log a ledger entry flagged non-private.
  static PrivacyParams zero_noise() { return {std::numeric_limits<double>::infinity(), 0.0}; }
  bool is_zero_noise() const { return std::isinf(epsilon); }
  void validate() const;
  PrivacyParams scaled(double eps_factor, double delta_factor = 1.0) const {
    return {epsilon * eps_factor, delta * delta_factor};
  }
};

struct LedgerEntry {
  std::string mechanism;
  double epsilon = 0.0;
  double delta = 0.0;
  std::uint64_t timestamp = 0;  // logical clock: position in the ledger
  bool non_private = false;     // zero-noise mode
  bool nonprivate_candidates = false;
  int level = -1;  // recursion level for the recursive partitioner, -1 otherwise
  std::string stage;
};

class BudgetLedger {
 public:
  void append(LedgerEntry e);
  void append(const std::string& mechanism, const PrivacyParams& pp, const std::string& stage = "",
              int level = -1, bool nonprivate_candidates = false);
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  void merge(const BudgetLedger& other);
  std::string to_json_lines() const;
  static BudgetLedger from_json_lines(const std::string& text);

 private:
  std::vector<LedgerEntry> entries_;
};

double laplace_from_uniform(double b, double u);
double laplace_draw(double b, Rng& rng);

double gaussian_sigma(double l2_sensitivity, const PrivacyParams& pp);
Vec gaussian_mechanism(const Vec& v, double l2_sensitivity, const PrivacyParams& pp, Rng& rng,
                       BudgetLedger* ledger = nullptr, const std::string& stage = "");

// |X ∩ T| + Lap(1/epsilon).
double pcount(double true_count, double epsilon, Rng& rng, BudgetLedger* ledger = nullptr,
              const std::string& stage = "");

template <typename Pred>
double pcount_if(const Mat& X, Pred&& inside, double epsilon, Rng& rng, BudgetLedger* ledger = nullptr,
                 const std::string& stage = "") {
  double c = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    if (inside(X.row(i))) c += 1.0;
  return pcount(c, epsilon, rng, ledger, stage);
}

// AboveThreshold with threshold noise Lap(2Δ/ε) and query noise Lap(4Δ/ε).
class AboveThreshold {
 public:
  AboveThreshold(double threshold, double sensitivity, double epsilon, Rng& rng);
  // True means ⊤ (and the state halts); false means ⊥.
  bool query(double value);
  bool halted() const { return halted_; }
  long query_count() const { return count_; }
  double threshold() const { return threshold_; }
  double noisy_threshold() const { return noisy_threshold_; }

  // Γ = 8Δ(ln t + ln(2/β))/ε; zero in zero-noise mode.
  static double gamma(double sensitivity, double epsilon, double t, double beta);

 private:
  double threshold_;
  double sensitivity_;
  double epsilon_;
  double noisy_threshold_;
  bool halted_ = false;
  long count_ = 0;
  Rng* rng_;
};

// Runs AboveThreshold over a finite list; returns the index of ⊤ if any.
std::optional<std::size_t> above_threshold(const std::vector<double>& queries, double sensitivity,
                                           double threshold, double epsilon, Rng& rng);

// Report-noisy-max: argmax of score + Lap(2Δ/ε); ε-DP for scores of
// sensitivity Δ. Plain argmax (first on ties) when ε is infinite.
std::size_t report_noisy_max(const std::vector<double>& scores, double sensitivity, double epsilon, Rng& rng);

enum class CompositionMode { Basic, Advanced };

PrivacyParams compose(const std::vector<LedgerEntry>& entries, CompositionMode mode,
                      double delta_prime = 0.0);
PrivacyParams compose(const BudgetLedger& ledger, CompositionMode mode, double delta_prime = 0.0);

// Advanced composition of T homogeneous (eps0, delta0) mechanisms.
PrivacyParams advanced_composition(double eps0, double delta0, double T, double delta_prime);

// Bin j covers [j w, (j+1) w). Returns the noisy-argmax bin whose noisy count
// exceeds 1 + 2 ln(2/δ)/ε, or nullopt.
std::optional<long> stability_histogram(const std::vector<double>& values, double bin_width,
                                        const PrivacyParams& pp, Rng& rng,
                                        BudgetLedger* ledger = nullptr, const std::string& stage = "");

double stability_threshold(const PrivacyParams& pp);

}  // namespace dpmix

#endif  // DPMIX_DP_HPP
