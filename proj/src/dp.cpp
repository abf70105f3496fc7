#include "dpmix/dp.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace dpmix {

void PrivacyParams::validate() const {
  if (!(epsilon > 0.0)) throw ArgumentError("privacy: epsilon must be > 0");
  if (!(delta >= 0.0 && delta < 1.0)) throw ArgumentError("privacy: delta must lie in [0,1)");
}

void BudgetLedger::append(LedgerEntry e) {
  e.timestamp = entries_.size();
  e.non_private = e.non_private || std::isinf(e.epsilon);
  entries_.push_back(std::move(e));
}

void BudgetLedger::append(const std::string& mechanism, const PrivacyParams& pp,
                          const std::string& stage, int level, bool nonprivate_candidates) {
  LedgerEntry e;
  e.mechanism = mechanism;
  e.epsilon = pp.epsilon;
  e.delta = pp.delta;
  e.stage = stage;
  e.level = level;
  e.nonprivate_candidates = nonprivate_candidates;
  append(std::move(e));
}

void BudgetLedger::merge(const BudgetLedger& other) {
  for (const auto& e : other.entries_) append(e);
}

namespace {

nlohmann::json number_or_inf(double x) {
  if (std::isinf(x)) return "inf";
  return x;
}

double parse_number_or_inf(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    throw ParseError("ledger: bad numeric field");
  }
  return j.get<double>();
}

}  // namespace

std::string BudgetLedger::to_json_lines() const {
  std::ostringstream out;
  for (const auto& e : entries_) {
    nlohmann::json j;
    j["mechanism"] = e.mechanism;
    j["epsilon"] = number_or_inf(e.epsilon);
    j["delta"] = e.delta;
    j["timestamp"] = e.timestamp;
    j["non_private"] = e.non_private;
    j["nonprivate_candidates"] = e.nonprivate_candidates;
    j["level"] = e.level;
    j["stage"] = e.stage;
    out << j.dump() << '\n';
  }
  return out.str();
}

BudgetLedger BudgetLedger::from_json_lines(const std::string& text) {
  BudgetLedger led;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    LedgerEntry e;
    e.mechanism = j.at("mechanism").get<std::string>();
    e.epsilon = parse_number_or_inf(j.at("epsilon"));
    e.delta = j.at("delta").get<double>();
    e.non_private = j.value("non_private", false);
    e.nonprivate_candidates = j.value("nonprivate_candidates", false);
    e.level = j.value("level", -1);
    e.stage = j.value("stage", std::string());
    led.append(std::move(e));
  }
  return led;
}

double laplace_from_uniform(double b, double u) {
  if (b < 0.0) throw ArgumentError("laplace: negative scale");
  if (b == 0.0) return 0.0;
  const double c = u - 0.5;
  const double mag = -b * std::log(1.0 - 2.0 * std::abs(c));
  return c < 0.0 ? -mag : mag;
}

double laplace_draw(double b, Rng& rng) {
  if (b < 0.0) throw ArgumentError("laplace: negative scale");
  if (b == 0.0) return 0.0;
  return laplace_from_uniform(b, uniform_open01(rng));
}

double gaussian_sigma(double l2_sensitivity, const PrivacyParams& pp) {
  if (l2_sensitivity < 0.0) throw ArgumentError("gaussian: negative sensitivity");
  if (pp.is_zero_noise() || l2_sensitivity == 0.0) return 0.0;
  if (!(pp.delta > 0.0)) throw ArgumentError("gaussian mechanism needs delta > 0");
  return l2_sensitivity * std::sqrt(2.0 * std::log(2.0 / pp.delta)) / pp.epsilon;
}

Vec gaussian_mechanism(const Vec& v, double l2_sensitivity, const PrivacyParams& pp, Rng& rng,
                       BudgetLedger* ledger, const std::string& stage) {
  pp.validate();
  if (!pp.is_zero_noise() && !(pp.delta > 0.0))
    throw ArgumentError("gaussian mechanism needs delta > 0");
  const double s = gaussian_sigma(l2_sensitivity, pp);
  Vec out = v;
  if (s > 0.0)
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += s * standard_normal(rng);
  if (ledger) ledger->append("gaussian", pp, stage);
  return out;
}

double pcount(double true_count, double epsilon, Rng& rng, BudgetLedger* ledger,
              const std::string& stage) {
  if (!(epsilon > 0.0)) throw ArgumentError("pcount: epsilon must be > 0");
  const double noisy = true_count + (std::isinf(epsilon) ? 0.0 : laplace_draw(1.0 / epsilon, rng));
  if (ledger) ledger->append("pcount", {epsilon, 0.0}, stage);
  return noisy;
}

AboveThreshold::AboveThreshold(double threshold, double sensitivity, double epsilon, Rng& rng)
    : threshold_(threshold), sensitivity_(sensitivity), epsilon_(epsilon), rng_(&rng) {
  if (!(sensitivity > 0.0)) throw ArgumentError("above_threshold: sensitivity must be > 0");
  if (!(epsilon > 0.0)) throw ArgumentError("above_threshold: epsilon must be > 0");
  noisy_threshold_ = threshold_;
  if (!std::isinf(epsilon_)) noisy_threshold_ += laplace_draw(2.0 * sensitivity_ / epsilon_, *rng_);
}

bool AboveThreshold::query(double value) {
  if (halted_) throw StateError("above_threshold: query after ⊤");
  ++count_;
  double noisy = value;
  if (!std::isinf(epsilon_)) noisy += laplace_draw(4.0 * sensitivity_ / epsilon_, *rng_);
  if (noisy >= noisy_threshold_) {
    halted_ = true;
    return true;
  }
  return false;
}

double AboveThreshold::gamma(double sensitivity, double epsilon, double t, double beta) {
  if (std::isinf(epsilon)) return 0.0;
  return 8.0 * sensitivity * (std::log(t) + std::log(2.0 / beta)) / epsilon;
}

std::optional<std::size_t> above_threshold(const std::vector<double>& queries, double sensitivity,
                                           double threshold, double epsilon, Rng& rng) {
  AboveThreshold svt(threshold, sensitivity, epsilon, rng);
  for (std::size_t i = 0; i < queries.size(); ++i)
    if (svt.query(queries[i])) return i;
  return std::nullopt;
}

std::size_t report_noisy_max(const std::vector<double>& scores, double sensitivity, double epsilon, Rng& rng) {
  if (scores.empty()) throw ArgumentError("report_noisy_max: no scores");
  if (!(sensitivity > 0.0)) throw ArgumentError("report_noisy_max: sensitivity must be > 0");
  if (!(epsilon > 0.0)) throw ArgumentError("report_noisy_max: epsilon must be > 0");
  std::size_t best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    double v = scores[i];
    if (!std::isinf(epsilon)) v += laplace_draw(2.0 * sensitivity / epsilon, rng);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return best;
}

PrivacyParams advanced_composition(double eps0, double delta0, double T, double delta_prime) {
  if (!(delta_prime > 0.0)) throw ArgumentError("advanced composition needs delta' > 0");
  const double eps = eps0 * std::sqrt(2.0 * T * std::log(1.0 / delta_prime)) +
                     eps0 * std::expm1(eps0) * T;
  return {eps, delta0 * T + delta_prime};
}

PrivacyParams compose(const std::vector<LedgerEntry>& entries, CompositionMode mode,
                      double delta_prime) {
  if (mode == CompositionMode::Advanced && !(delta_prime > 0.0))
    throw ArgumentError("advanced composition needs delta' > 0");
  if (entries.empty()) return {0.0, 0.0};
  bool homogeneous = true;
  for (const auto& e : entries)
    if (e.epsilon != entries.front().epsilon || e.delta != entries.front().delta) homogeneous = false;
  if (mode == CompositionMode::Advanced && homogeneous)
    return advanced_composition(entries.front().epsilon, entries.front().delta,
                                static_cast<double>(entries.size()), delta_prime);
  PrivacyParams total{0.0, 0.0};
  for (const auto& e : entries) {
    total.epsilon += e.epsilon;
    total.delta += e.delta;
  }
  return total;
}

PrivacyParams compose(const BudgetLedger& ledger, CompositionMode mode, double delta_prime) {
  return compose(ledger.entries(), mode, delta_prime);
}

double stability_threshold(const PrivacyParams& pp) {
  if (pp.is_zero_noise()) return 1.0;
  return 1.0 + 2.0 * std::log(2.0 / pp.delta) / pp.epsilon;
}

std::optional<long> stability_histogram(const std::vector<double>& values, double bin_width,
                                        const PrivacyParams& pp, Rng& rng, BudgetLedger* ledger,
                                        const std::string& stage) {
  if (!(bin_width > 0.0)) throw ArgumentError("stability_histogram: bin width must be > 0");
  pp.validate();
  if (!pp.is_zero_noise() && !(pp.delta > 0.0))
    throw ArgumentError("stability_histogram: needs delta > 0");
  if (ledger) ledger->append("stability_histogram", pp, stage);
  std::map<long, double> bins;
  for (double v : values) bins[static_cast<long>(std::floor(v / bin_width))] += 1.0;
  const double thr = stability_threshold(pp);
  std::optional<long> best;
  double best_count = 0.0;
  for (auto& [bin, count] : bins) {
    const double noisy = count + (pp.is_zero_noise() ? 0.0 : laplace_draw(2.0 / pp.epsilon, rng));
    if (noisy > thr && (!best || noisy > best_count)) {
      best = bin;
      best_count = noisy;
    }
  }
  return best;
}

}  // namespace dpmix
