// dpmix: generate planted mixtures, run the private learners, evaluate
// reports and sweep parameter grids.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpmix/eval.hpp"
#include "dpmix/io.hpp"
#include "dpmix/learn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dpmix;

namespace {

struct GenerateConfig {
  PlantedSpec spec;
  long n = 1000;
  double alpha = 0.1;
  double beta = 0.1;
  double check_C = 0.0;  // separation constant for the checker; 0 skips it
};

GenerateConfig generate_config_from_json(const json& j) {
  try {
    GenerateConfig g;
    auto& s = g.spec;
    s.k = j.value("k", s.k);
    s.d = j.value("d", s.d);
    g.n = j.value("n", g.n);
    s.spherical = j.value("spherical", s.spherical);
    s.separation = j.value("separation", s.separation);
    s.general_constant = j.value("general_constant", s.general_constant);
    s.general_n = j.value("general_n", s.general_n);
    s.weights = j.value("weights", s.weights);
    s.max_retries = j.value("max_retries", s.max_retries);
    const std::string placement = j.value("placement", std::string("uniform"));
    if (placement == "simplex")
      s.placement = PlantedSpec::Placement::Simplex;
    else if (placement != "uniform")
      throw UsageError("generate: placement must be uniform or simplex");
    if (j.contains("bounds")) {
      const auto& b = j["bounds"];
      s.bounds.R = b.value("R", s.bounds.R);
      s.bounds.sigma_min = b.value("sigma_min", s.bounds.sigma_min);
      s.bounds.sigma_max = b.value("sigma_max", s.bounds.sigma_max);
      s.bounds.w_min = b.value("w_min", s.bounds.w_min);
      s.bounds.kappa = b.value("kappa", s.bounds.kappa);
    }
    g.alpha = j.value("alpha", g.alpha);
    g.beta = j.value("beta", g.beta);
    g.check_C = j.value("check_C", g.check_C);
    if (g.n < 1) throw UsageError("generate: n must be positive");
    return g;
  } catch (const json::exception& e) {
    throw ParseError(std::string("generate config: ") + e.what());
  }
}

json run_checks(const GenerateConfig& g, const PlantedInstance& inst) {
  json out;
  const auto np = check_condition_numpoints(inst.data, inst.model.weights(), g.alpha);
  out["numpoints"] = {{"pass", np.all_pass()}, {"counts", np.counts}};
  const auto rad = check_condition_radius(inst.data, inst.model);
  out["radius"] = {{"pass", rad.all_pass()}, {"warnings", rad.warnings}};
  if (g.check_C > 0.0)
    out["separation"] = {{"pass", check_condition_separation(inst.data, inst.model, g.check_C)}, {"C", g.check_C}};
  bool flat = true;
  for (const auto& f : check_flatness(inst.model, static_cast<double>(g.n), g.spec.k, g.beta)) flat = flat && f.pass();
  out["flatness"] = {{"pass", flat}};
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir + ": " + ec.message());
}

json generate(const json& cfg_json, std::uint64_t seed, const std::string& out) {
  const GenerateConfig g = generate_config_from_json(cfg_json);
  Rng rng = stage_rng(seed, "generate");
  const PlantedInstance inst = planted_instance(g.spec, g.n, rng);
  ensure_dir(out);
  save_text(out + "/model.json", mixture_to_json(inst.model).dump(2) + "\n");
  save_csv(out + "/data.csv", inst.data);
  json checks = run_checks(g, inst);
  save_text(out + "/checks.json", checks.dump(2) + "\n");
  return checks;
}

json learn(const json& cfg_json, const std::string& learner_flag, const std::string& data_path,
           std::optional<std::uint64_t> seed, bool zero_noise, const std::string& out) {
  LearnerConfig cfg = learner_config_from_json(cfg_json);
  if (seed) cfg.seed = *seed;
  if (zero_noise) cfg.zero_noise = true;
  std::string learner = learner_flag;
  if (learner.empty()) learner = cfg_json.value("learner", std::string("pgme"));
  const Dataset ds = load_csv(data_path);
  const auto t0 = std::chrono::steady_clock::now();
  LearnReport rep = run_learner(learner, ds.points, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json j = report_to_json(rep);
  j["config"] = learner_config_to_json(cfg);
  if (ds.has_labels() && learner == "pgme" && rep.diagnostics.contains("partition")) {
    Partition p;
    p.clusters = rep.diagnostics["partition"]["clusters"].get<std::vector<std::vector<Eigen::Index>>>();
    p.omitted = rep.diagnostics["partition"]["omitted"].get<std::vector<Eigen::Index>>();
    const LaminarityReport lam = laminarity(p, ds.labels, cfg.k, cfg.bounds.w_min, cfg.alpha);
    j["laminarity"] = {{"laminar", lam.laminar()}, {"omitted", lam.omitted}, {"budget", lam.budget},
                       {"problems", lam.problems}};
  }
  j["wall_clock_seconds"] = secs;
  ensure_dir(out);
  save_text(out + "/report.json", j.dump(2) + "\n");
  return j;
}

json evaluate(const std::string& truth_path, const std::string& report_path, const std::string& out,
              double alpha) {
  const Mixture truth = mixture_from_json(load_json(truth_path));
  const json rep = load_json(report_path);
  json j;
  j["status"] = rep.value("status", std::string("unknown"));
  if (!rep.contains("model") || rep["model"].is_null()) {
    j["pass"] = false;
    j["note"] = "report has no model";
  } else {
    const Mixture est = mixture_from_json(rep["model"]);
    if (est.k() != truth.k())
      throw ShapeError("eval: truth has k=" + std::to_string(truth.k()) + ", estimate has k=" + std::to_string(est.k()));
    if (est.dim() != truth.dim()) throw ShapeError("eval: dimension mismatch");
    AccuracyParams acc{alpha, 0.1};
    const EvalResult r = learning_verdict(truth, est, acc);
    j["permutation"] = r.permutation;
    j["per_component_tv"] = r.per_component_tv;
    j["tv_std_error"] = r.tv_std_error;
    j["weight_errors"] = r.weight_errors;
    j["mixture_tv_upper"] = r.mixture_tv_upper;
    j["tv_ok"] = r.tv_ok;
    j["weights_ok"] = r.weights_ok;
    j["pass"] = r.pass;
  }
  if (rep.contains("laminarity")) j["laminar"] = rep["laminarity"]["laminar"];
  ensure_dir(out);
  save_text(out + "/eval.json", j.dump(2) + "\n");
  return j;
}

std::string csv_row(const std::string& id, const json& e) {
  auto maxof = [&](const char* key) {
    double m = 0.0;
    if (e.contains(key))
      for (double v : e[key]) m = std::max(m, v);
    return m;
  };
  std::ostringstream s;
  s << id << ',' << e.value("status", std::string()) << ',' << maxof("per_component_tv") << ','
    << maxof("weight_errors") << ',' << e.value("mixture_tv_upper", 1.0) << ',' << (e.value("pass", false) ? 1 : 0);
  return s.str();
}

void append_summary(const std::string& out, const std::vector<std::string>& rows) {
  const std::string path = out + "/summary.csv";
  const bool fresh = !fs::exists(path);
  std::ofstream f(path, std::ios::app);
  if (!f) throw Error("cannot write " + path);
  if (fresh) f << "run,status,max_tv,max_weight_error,mixture_tv_upper,pass\n";
  for (const auto& r : rows) f << r << '\n';
}

void sweep(const json& cfg, std::uint64_t seed, const std::string& out, bool zero_noise) {
  try {
    const json base_gen = cfg.at("generate");
    const json base_learn = cfg.at("learn");
    const auto axes = cfg.value("axes", json::object());
    auto axis = [&](const char* name, const json& fallback) {
      return axes.contains(name) ? axes[name] : json::array({fallback});
    };
    const json eps = axis("epsilon", base_learn.value("epsilon", 1.0));
    const json ns = axis("n", base_gen.value("n", 1000));
    const json ds = axis("d", base_gen.value("d", 1));
    const json ks = axis("k", base_gen.value("k", 1));
    const json seps = axis("separation_multiplier", 1.0);
    std::vector<std::uint64_t> seeds = cfg.value("seeds", std::vector<std::uint64_t>{seed});

    struct Job {
      std::string id;
      json gen, lrn;
      std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const auto& e : eps)
      for (const auto& n : ns)
        for (const auto& d : ds)
          for (const auto& k : ks)
            for (const auto& m : seps)
              for (auto s : seeds) {
                Job jb;
                jb.gen = base_gen;
                jb.lrn = base_learn;
                jb.gen["n"] = n;
                jb.gen["d"] = d;
                jb.gen["k"] = k;
                jb.gen["separation"] = base_gen.value("separation", 0.0) * m.get<double>();
                jb.lrn["k"] = k;
                jb.lrn["epsilon"] = e;
                const double wmin = std::min(base_learn.value("bounds", json::object()).value("w_min", 1.0),
                                             1.0 / k.get<double>());
                jb.lrn["bounds"]["w_min"] = wmin;
                jb.gen["bounds"]["w_min"] = std::min(base_gen.value("bounds", json::object()).value("w_min", 1.0),
                                                     1.0 / k.get<double>());
                jb.seed = s;
                jb.id = "run_" + std::to_string(jobs.size());
                jobs.push_back(std::move(jb));
              }

    std::vector<std::string> rows(jobs.size());
    std::vector<std::string> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (std::size_t i; (i = next++) < jobs.size();) {
        const Job& jb = jobs[i];
        const std::string dir = out + "/" + jb.id;
        try {
          generate(jb.gen, jb.seed, dir);
          learn(jb.lrn, "", dir + "/data.csv", jb.seed, zero_noise, dir);
          rows[i] = csv_row(jb.id, evaluate(dir + "/model.json", dir + "/report.json", dir,
                                            jb.lrn.value("alpha", 0.1)));
        } catch (const std::exception& ex) {
          errors[i] = ex.what();
          rows[i] = jb.id + ",error,,,,0";
        }
      }
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned nthreads = static_cast<unsigned>(std::min<std::size_t>(hw, jobs.size()));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    ensure_dir(out);
    append_summary(out, rows);
    for (std::size_t i = 0; i < jobs.size(); ++i)
      if (!errors[i].empty()) std::cerr << jobs[i].id << ": " << errors[i] << '\n';
  } catch (const json::exception& e) {
    throw ParseError(std::string("sweep config: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private learning of Gaussian mixtures"};
  app.require_subcommand(1);
  std::string config, out = ".", data, learner, truth, report;
  std::uint64_t seed = 0;
  bool zero_noise = false;
  double alpha = 0.1;

  auto* gen = app.add_subcommand("generate", "Sample a planted mixture and dataset");
  gen->add_option("--config", config, "Generation config JSON")->required();
  gen->add_option("--seed", seed, "Master seed");
  gen->add_option("--out", out, "Output directory");

  auto* lrn = app.add_subcommand("learn", "Run a learner on a dataset");
  lrn->add_option("--config", config, "Learner config JSON")->required();
  lrn->add_option("--data", data, "Dataset CSV")->required();
  lrn->add_option("--learner", learner, "pegme | pgme | aggregate (default: config 'learner' or pgme)");
  auto* seed_opt = lrn->add_option("--seed", seed, "Master seed (overrides config)");
  lrn->add_option("--out", out, "Output directory");
  lrn->add_flag("--zero-noise", zero_noise, "Skip all noise (non-private test mode)");

  auto* ev = app.add_subcommand("eval", "Compare a learned report with the true model");
  ev->add_option("--truth", truth, "True model JSON")->required();
  ev->add_option("--report", report, "Learner report JSON")->required();
  ev->add_option("--alpha", alpha, "Accuracy parameter");
  ev->add_option("--out", out, "Output directory");

  auto* sw = app.add_subcommand("sweep", "Generate, learn and evaluate over a parameter grid");
  sw->add_option("--config", config, "Sweep config JSON")->required();
  sw->add_option("--seed", seed, "Seed when the config lists none");
  sw->add_option("--out", out, "Output directory");
  sw->add_flag("--zero-noise", zero_noise, "Skip all noise");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) {
      std::cout << generate(load_json(config), seed, out).dump(2) << '\n';
    } else if (*lrn) {
      const json j = learn(load_json(config), learner, data,
                           seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt, zero_noise, out);
      std::cout << "status " << j["status"].get<std::string>() << ", totals eps " << j["totals"]["epsilon"]
                << " delta " << j["totals"]["delta"] << '\n';
    } else if (*ev) {
      const json j = evaluate(truth, report, out, alpha);
      append_summary(out, {csv_row(fs::path(report).stem().string(), j)});
      std::cout << j.dump(2) << '\n';
    } else if (*sw) {
      sweep(load_json(config), seed, out, zero_noise);
    }
  } catch (const UsageError& e) {
    std::cerr << "dpmix: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "dpmix: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
