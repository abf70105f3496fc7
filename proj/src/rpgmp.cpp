#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "dpmix/io.hpp"
#include "dpmix/learn.hpp"
#include "dpmix/pca.hpp"

namespace dpmix {

void Partition::check(Eigen::Index n) const {
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  auto mark = [&](Eigen::Index i) {
    if (i < 0 || i >= n) throw InternalError("partition: index out of range");
    if (seen[i]) throw InternalError("partition: index " + std::to_string(i) + " assigned twice");
    seen[i] = 1;
  };
  for (const auto& c : clusters)
    for (auto i : c) mark(i);
  for (auto i : omitted) mark(i);
  for (Eigen::Index i = 0; i < n; ++i)
    if (!seen[i]) throw InternalError("partition: index " + std::to_string(i) + " unaccounted for");
}

namespace {

struct RpgmpContext {
  const Mat& X;
  const LearnerConfig& cfg;
  const RpgmpOptions& opts;
  Rng& rng;
  BudgetLedger* ledger;
  RpgmpResult& out;
  int max_level = -1;
};

void leaf(RpgmpContext& ctx, const std::vector<Eigen::Index>& idx, RpgmpNode node, int step) {
  node.step = step;
  ctx.out.nodes.push_back(std::move(node));
  if (!idx.empty()) ctx.out.partition.clusters.push_back(idx);
}

void recurse(RpgmpContext& ctx, std::vector<Eigen::Index> idx, int k, int level, const std::string& path) {
  if (level > ctx.cfg.k) throw InternalError("rpgmp: recursion depth exceeds k");
  RpgmpNode node;
  node.level = level;
  node.k = k;
  node.size = static_cast<long>(idx.size());
  if (k == 1) return leaf(ctx, idx, node, 1);

  const PrivacyParams pp = ctx.cfg.privacy();
  const auto& bounds = ctx.cfg.bounds;
  const std::string stage = "rpgmp/" + path;
  const Eigen::Index d = ctx.X.cols();
  const double nd = static_cast<double>(idx.size());
  const double t = static_cast<double>(ctx.opts.n_root) * bounds.w_min / 2.0;
  ctx.max_level = std::max(ctx.max_level, level);

  // Step 2: bounding ball.
  const double count_noise = pp.is_zero_noise() ? 0.0 : laplace_draw(2.0 / pp.epsilon, ctx.rng);
  if (ctx.ledger) ctx.ledger->append("laplace_count", {pp.epsilon / 2.0, 0.0}, stage + "/count", level);
  const double n_prime = nd + count_noise - nd * bounds.w_min / 20.0;
  Mat Xn = ctx.X(idx, Eigen::all);
  LocationOptions lopts;
  lopts.backend = ctx.cfg.centers;
  lopts.beta = ctx.cfg.beta;
  const PglocResult loc = pgloc(Xn, n_prime, {pp.epsilon / 2.0, pp.delta}, bounds.R, bounds.sigma_min,
                                bounds.sigma_max, lopts, ctx.rng, ctx.ledger, stage + "/bound", level);
  if (!loc.ball) {
    node.note = "bounding ball not found (" + loc.diagnostic + "); treated as one cluster";
    return leaf(ctx, idx, node, 8);
  }
  const BallD bound{loc.ball->center, 12.0 * loc.ball->radius};
  node.bounding_ball = bound;
  {
    std::vector<Eigen::Index> in;
    for (std::size_t j = 0; j < idx.size(); ++j)
      if (bound.contains(Xn.row(static_cast<Eigen::Index>(j))))
        in.push_back(idx[j]);
      else
        ctx.out.partition.omitted.push_back(idx[j]);
    if (in.size() != idx.size()) {
      idx = std::move(in);
      Xn = ctx.X(idx, Eigen::all);
    }
  }
  const double r = bound.radius;

  auto split_and_recurse = [&](const Mat& coords, const BallD& ball, double c, int step) {
    std::vector<Eigen::Index> A, B;
    const double r2 = ball.radius * ball.radius, cr2 = c * c * r2;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const double d2 = (coords.row(static_cast<Eigen::Index>(j)).transpose() - ball.center).squaredNorm();
      if (d2 <= r2)
        A.push_back(idx[j]);
      else if (d2 > cr2)
        B.push_back(idx[j]);
      else
        ctx.out.partition.omitted.push_back(idx[j]);
    }
    node.step = step;
    node.split_ball = ball;
    ctx.out.nodes.push_back(node);
    recurse(ctx, std::move(A), k - 1, level + 1, path + "A");
    recurse(ctx, std::move(B), k - 1, level + 1, path + "B");
  };

  // Step 3: terrific ball in the full space.
  TerrificConfig tc;
  tc.t = static_cast<long>(std::ceil(t));
  tc.c = ctx.opts.c;
  tc.largest = false;
  tc.L = std::sqrt(static_cast<double>(d)) * bounds.sigma_min / 2.0;
  tc.U = r;
  if (tc.L < tc.U) {
    const TerrificBallResult tb = terrific_ball(Xn, tc, pp, ctx.cfg.beta, ctx.rng, ctx.ledger, stage + "/ball", level);
    if (tb.ball) return split_and_recurse(Xn, *tb.ball, tc.c, 3);
    node.note = "step 3: " + tb.diagnostic;
  } else {
    node.note = "step 3 skipped: bounding radius below the radius floor";
  }

  // Step 5: private k-PCA around the bounding-ball center.
  const Mat Yc = Xn.rowwise() - bound.center.transpose();
  Mat G = Yc.transpose() * Yc;
  if (!pp.is_zero_noise()) {
    const double s = 2.0 * r * r * std::sqrt(std::log(2.0 / pp.delta)) / pp.epsilon;
    G += symmetric_gaussian_noise(d, s, ctx.rng);
  }
  if (ctx.ledger) ctx.ledger->append("pca", pp, stage + "/pca", level);
  const int kk = static_cast<int>(std::min<Eigen::Index>(k, d));
  const Mat P = project_rotate(Yc, top_subspace(G, kk));

  // Step 6: terrific ball in the projected space.
  TerrificConfig tp = tc;
  tp.largest = true;
  tp.L = std::sqrt(static_cast<double>(k)) * bounds.sigma_min / 2.0;
  if (tp.L < tp.U) {
    const TerrificBallResult tb = terrific_ball(P, tp, pp, ctx.cfg.beta, ctx.rng, ctx.ledger, stage + "/pball", level);
    if (tb.ball) return split_and_recurse(P, *tb.ball, tp.c, 6);
    node.note += (node.note.empty() ? "" : "; ") + std::string("step 6: ") + tb.diagnostic;
  }
  return leaf(ctx, idx, node, 8);
}

}  // namespace

RpgmpResult rpgmp(const Mat& X, const LearnerConfig& cfg, Rng& rng, BudgetLedger* ledger, const RpgmpOptions& opts) {
  cfg.privacy().validate();
  cfg.bounds.validate(cfg.k);
  RpgmpResult out;
  RpgmpOptions o = opts;
  if (o.n_root <= 0) o.n_root = static_cast<long>(X.rows());
  RpgmpContext ctx{X, cfg, o, rng, ledger, out};
  std::vector<Eigen::Index> all(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) all[i] = i;
  recurse(ctx, std::move(all), cfg.k, 0, "");
  std::sort(out.partition.omitted.begin(), out.partition.omitted.end());
  out.partition.check(X.rows());
  out.depth = ctx.max_level + 1;
  return out;
}

PrivacyParams pgme_privacy_totals(double epsilon, double delta, int depth) {
  if (std::isinf(epsilon)) return {epsilon, 0.0};
  const double D = static_cast<double>(depth);
  const double eps = 2.0 * epsilon + 8.0 * epsilon * std::sqrt(2.0 * D * std::log(1.0 / delta));
  return {eps, (8.0 * D + 1.0) * delta};
}

int ledger_depth(const BudgetLedger& ledger) {
  std::set<int> levels;
  for (const auto& e : ledger.entries())
    if (e.level >= 0) levels.insert(e.level);
  return static_cast<int>(levels.size());
}

namespace {

// Key of the parallel group an entry belongs to: "cluster/<j>" for per-cluster
// stages, the node stage for recursion levels, empty otherwise.
std::string group_key(const LedgerEntry& e) {
  if (e.stage.rfind("cluster/", 0) == 0) {
    const auto slash = e.stage.find('/', 8);
    return e.stage.substr(0, slash);
  }
  if (e.level >= 0) {
    const auto slash = e.stage.rfind('/');
    return e.stage.substr(0, slash);
  }
  return "";
}

// PrivacyParams defaults to epsilon 1, so sums start from this instead.
struct Spend {
  double epsilon = 0.0;
  double delta = 0.0;
};

// Max over disjoint groups of the basic composition inside each group.
PrivacyParams parallel_max(const std::map<std::string, Spend>& groups) {
  PrivacyParams m{0.0, 0.0};
  for (const auto& [key, p] : groups) {
    m.epsilon = std::max(m.epsilon, p.epsilon);
    m.delta = std::max(m.delta, p.delta);
  }
  return m;
}

}  // namespace

PrivacyParams learner_totals(const std::string& learner, const BudgetLedger& ledger, const LearnerConfig& cfg) {
  const PrivacyParams pp = cfg.privacy();
  if (learner == "pgme") {
    // Every recursion level must stay within (4ε, 4δ) per node; the closed
    // form then applies with the realized depth.
    std::map<int, std::map<std::string, Spend>> per_level;
    std::map<std::string, Spend> clusters;
    for (const auto& e : ledger.entries()) {
      auto& slot = e.level >= 0 ? per_level[e.level][group_key(e)] : clusters[group_key(e)];
      slot.epsilon += e.epsilon;
      slot.delta += e.delta;
    }
    for (const auto& [lvl, nodes] : per_level) {
      const PrivacyParams m = parallel_max(nodes);
      if (m.epsilon > 4.0 * pp.epsilon * (1 + 1e-12) || m.delta > 4.0 * pp.delta * (1 + 1e-12))
        throw InternalError("pgme ledger: level " + std::to_string(lvl) + " exceeds (4eps, 4delta)");
    }
    const PrivacyParams c = parallel_max(clusters);
    if (c.epsilon > 2.0 * pp.epsilon * (1 + 1e-12) || c.delta > pp.delta * (1 + 1e-12))
      throw InternalError("pgme ledger: per-cluster estimation exceeds (2eps, delta): (" + std::to_string(c.epsilon) +
                          ", " + std::to_string(c.delta) + ")");
    return pgme_privacy_totals(pp.epsilon, pp.delta, ledger_depth(ledger));
  }
  // pegme and aggregate: per-cluster stages compose in parallel, location
  // rounds compose advanced (δ' = δ), the rest compose basic.
  std::vector<LedgerEntry> rounds, rest;
  std::map<std::string, Spend> clusters;
  for (const auto& e : ledger.entries()) {
    const std::string key = group_key(e);
    if (!key.empty()) {
      clusters[key].epsilon += e.epsilon;
      clusters[key].delta += e.delta;
    } else if (e.stage == "pegme/loc" || e.stage == "aggregate/loc") {
      rounds.push_back(e);
    } else {
      rest.push_back(e);
    }
  }
  PrivacyParams total = compose(rest, CompositionMode::Basic);
  if (!rounds.empty()) {
    const PrivacyParams r = pp.is_zero_noise() || !(pp.delta > 0.0)
                                ? compose(rounds, CompositionMode::Basic)
                                : compose(rounds, CompositionMode::Advanced, pp.delta);
    total.epsilon += r.epsilon;
    total.delta += r.delta;
  }
  const PrivacyParams c = parallel_max(clusters);
  total.epsilon += c.epsilon;
  total.delta += c.delta;
  return total;
}

LearnReport pgme(const Mat& Xin, const LearnerConfig& cfg, Rng& rng) {
  const PrivacyParams pp = cfg.privacy();
  pp.validate();
  cfg.bounds.validate(cfg.k);
  LearnReport rep;
  rep.learner = "pgme";
  const Eigen::Index d = Xin.cols();
  const double cap = cfg.bounds.R + 4.0 * std::sqrt(static_cast<double>(d)) * cfg.bounds.sigma_max;
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < Xin.rows(); ++i)
    if (Xin.row(i).norm() <= cap) kept.push_back(i);
  const Mat X = Xin(kept, Eigen::all);

  RpgmpOptions opts;
  opts.n_root = static_cast<long>(Xin.rows());
  RpgmpResult part = rpgmp(X, cfg, rng, &rep.ledger, opts);

  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& nd : part.nodes) {
    nlohmann::json j{{"level", nd.level}, {"k", nd.k}, {"size", nd.size}, {"step", nd.step}};
    if (nd.bounding_ball) j["bounding_radius"] = nd.bounding_ball->radius;
    if (nd.split_ball) j["split_radius"] = nd.split_ball->radius;
    if (!nd.note.empty()) j["note"] = nd.note;
    nodes.push_back(j);
  }
  rep.diagnostics["tree"] = nodes;
  rep.diagnostics["depth"] = part.depth;
  rep.diagnostics["truncated"] = static_cast<long>(Xin.rows() - X.rows());
  rep.diagnostics["omitted"] = static_cast<long>(part.partition.omitted.size());

  // Cluster indices refer back to rows of the input.
  std::vector<std::vector<Eigen::Index>> clusters;
  for (const auto& c : part.partition.clusters) {
    std::vector<Eigen::Index> orig;
    for (auto i : c) orig.push_back(kept[i]);
    clusters.push_back(std::move(orig));
  }
  nlohmann::json sizes = nlohmann::json::array();
  for (const auto& c : clusters) sizes.push_back(c.size());
  rep.diagnostics["cluster_sizes"] = sizes;

  Mixture model;
  std::vector<double> counts;
  nlohmann::json notes = nlohmann::json::array();
  for (std::size_t j = 0; j < clusters.size(); ++j) {
    const std::string stage = "cluster/" + std::to_string(j + 1);
    try {
      const GaussianEstimate g = pge(Xin(clusters[j], Eigen::all), cfg.bounds, pp, rng, &rep.ledger, stage + "/pge");
      for (const auto& w : g.warnings) notes.push_back(stage + ": " + w);
      counts.push_back(pcount(static_cast<double>(clusters[j].size()), pp.epsilon, rng, &rep.ledger, stage + "/count"));
      Component c;
      c.mean = g.mean;
      c.covariance = g.covariance;
      model.components.push_back(std::move(c));
    } catch (const InsufficientDataError& e) {
      notes.push_back(stage + ": " + e.what());
    }
  }
  if (!model.components.empty()) {
    const WeightEstimate w = estimate_weights(counts);
    if (w.fallback_uniform) notes.push_back("noisy counts non-positive; uniform weights");
    for (std::size_t j = 0; j < model.components.size(); ++j) model.components[j].weight = w.weights[j];
    rep.model = std::move(model);
  }
  rep.diagnostics["notes"] = notes;
  if (!rep.model)
    rep.status = "abstained";
  else if (rep.model->k() != cfg.k)
    rep.status = "partial";
  rep.totals = learner_totals("pgme", rep.ledger, cfg);
  rep.diagnostics["partition"] = nlohmann::json::object();
  rep.diagnostics["partition"]["clusters"] = clusters;
  std::vector<Eigen::Index> omitted;
  for (auto i : part.partition.omitted) omitted.push_back(kept[i]);
  {
    std::vector<char> in(static_cast<std::size_t>(Xin.rows()), 1);
    for (auto i : kept) in[i] = 0;
    for (Eigen::Index i = 0; i < Xin.rows(); ++i)
      if (in[i]) omitted.push_back(i);
  }
  std::sort(omitted.begin(), omitted.end());
  rep.diagnostics["partition"]["omitted"] = omitted;
  return rep;
}

// ---- config and report JSON ------------------------------------------------

namespace {

nlohmann::json num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double num_from(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    throw ParseError("expected a number, got '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace

LearnerConfig learner_config_from_json(const nlohmann::json& j) {
  try {
    LearnerConfig c;
    c.k = j.value("k", c.k);
    if (j.contains("epsilon")) c.epsilon = num_from(j["epsilon"]);
    c.delta = j.value("delta", c.delta);
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    if (j.contains("bounds")) {
      const auto& b = j["bounds"];
      c.bounds.R = b.value("R", c.bounds.R);
      c.bounds.sigma_min = b.value("sigma_min", c.bounds.sigma_min);
      c.bounds.sigma_max = b.value("sigma_max", c.bounds.sigma_max);
      c.bounds.w_min = b.value("w_min", c.bounds.w_min);
      c.bounds.kappa = b.value("kappa", c.bounds.kappa);
      c.bounds.separation = b.value("separation", c.bounds.separation);
    }
    c.seed = j.value("seed", c.seed);
    c.zero_noise = j.value("zero_noise", c.zero_noise);
    if (j.contains("backend") && j["backend"].contains("centers")) {
      const auto s = j["backend"]["centers"].get<std::string>();
      if (s == "grid")
        c.centers = CenterBackend::Grid;
      else if (s == "data")
        c.centers = CenterBackend::Data;
      else
        throw ParseError("backend.centers must be grid or data");
    }
    c.xi = j.value("xi", c.xi);
    c.ell_log_factor = j.value("ell_log_factor", c.ell_log_factor);
    c.batches = j.value("batches", c.batches);
    c.aggregate_radius_factor = j.value("aggregate_radius_factor", c.aggregate_radius_factor);
    c.weight_bin_factor = j.value("weight_bin_factor", c.weight_bin_factor);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("learner config: ") + e.what());
  }
}

nlohmann::json learner_config_to_json(const LearnerConfig& c) {
  return {{"k", c.k},
          {"epsilon", num(c.epsilon)},
          {"delta", c.delta},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"bounds",
           {{"R", c.bounds.R},
            {"sigma_min", c.bounds.sigma_min},
            {"sigma_max", c.bounds.sigma_max},
            {"w_min", c.bounds.w_min},
            {"kappa", c.bounds.kappa},
            {"separation", c.bounds.separation}}},
          {"seed", c.seed},
          {"zero_noise", c.zero_noise},
          {"backend", {{"centers", c.centers == CenterBackend::Grid ? "grid" : "data"}}},
          {"xi", c.xi},
          {"ell_log_factor", c.ell_log_factor},
          {"batches", c.batches},
          {"aggregate_radius_factor", c.aggregate_radius_factor},
          {"weight_bin_factor", c.weight_bin_factor}};
}

nlohmann::json report_to_json(const LearnReport& r) {
  nlohmann::json j;
  j["status"] = r.status;
  j["learner"] = r.learner;
  j["model"] = r.model ? mixture_to_json(*r.model) : nlohmann::json(nullptr);
  j["totals"] = {{"epsilon", num(r.totals.epsilon)}, {"delta", r.totals.delta}};
  nlohmann::json led = nlohmann::json::array();
  for (const auto& e : r.ledger.entries())
    led.push_back({{"mechanism", e.mechanism},
                   {"epsilon", num(e.epsilon)},
                   {"delta", e.delta},
                   {"timestamp", e.timestamp},
                   {"non_private", e.non_private},
                   {"nonprivate_candidates", e.nonprivate_candidates},
                   {"level", e.level},
                   {"stage", e.stage}});
  j["ledger"] = led;
  j["diagnostics"] = r.diagnostics;
  return j;
}

LearnReport run_learner(const std::string& learner, const Mat& X, const LearnerConfig& cfg) {
  Rng rng = stage_rng(cfg.seed, "learn/" + learner);
  LearnReport rep;
  rep.learner = learner;
  try {
    if (learner == "pgme") return pgme(X, cfg, rng);
    if (learner == "pegme") {
      const PegmeResult r = pegme(X, cfg, rng, &rep.ledger);
      rep.model = r.model;
      if (!r.model) rep.status = "abstained";
      rep.diagnostics["ell"] = r.diag.ell;
      rep.diagnostics["Lambda"] = r.diag.Lambda;
      rep.diagnostics["loc_epsilon"] = num(r.diag.loc_epsilon);
      rep.diagnostics["truncated"] = r.diag.truncated;
      rep.diagnostics["cluster_sizes"] = r.diag.cluster_sizes;
      nlohmann::json radii = nlohmann::json::array();
      for (const auto& b : r.diag.lifted_balls) radii.push_back(b.radius);
      rep.diagnostics["lifted_radii"] = radii;
      rep.diagnostics["notes"] = r.diag.notes;
    } else if (learner == "aggregate") {
      const AggregateResult r = sample_aggregate(X, nonprivate_spectral_learner, cfg, rng, &rep.ledger);
      if (r.model.k() > 0) rep.model = r.model;
      rep.status = r.complete ? "ok" : (r.model.k() > 0 ? "partial" : "abstained");
      rep.diagnostics["notes"] = r.notes;
    } else {
      throw UsageError("unknown learner '" + learner + "' (expected pegme, pgme or aggregate)");
    }
  } catch (const InsufficientDataError& e) {
    rep.status = "abstained";
    rep.model.reset();
    rep.diagnostics["error"] = e.what();
  }
  rep.totals = learner_totals(learner, rep.ledger, cfg);
  return rep;
}

}  // namespace dpmix
