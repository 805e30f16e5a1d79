// Experiment runner: load an instance plus solver config from JSON, execute,
// and emit machine-readable traces and verification reports.
//
// Exit codes: 0 ok, 1 assertion/solver failure, 2 usage or config error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "proxlin/accelerated.hpp"
#include "proxlin/finite_sum.hpp"
#include "proxlin/problems.hpp"
#include "proxlin/prox_linear.hpp"
#include "proxlin/smoothing.hpp"
#include "proxlin/verify.hpp"

using nlohmann::json;
using namespace proxlin;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check_keys(const json& node, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!node.is_object()) throw UsageError(where + " must be an object");
  for (auto it = node.begin(); it != node.end(); ++it)
    if (!allowed.count(it.key()))
      throw UsageError("unknown key '" + it.key() + "' in " + where);
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(cfg, {"instance", "solver", "solvers", "output", "timing", "verify"}, "config");
  if (!cfg.contains("instance")) throw UsageError("config needs an 'instance' section");
  return cfg;
}

Instance build_instance(const json& node, uint64_t seed_override) {
  check_keys(node, {"name", "d", "m", "seed", "beta_override"}, "instance");
  if (!node.contains("name")) throw UsageError("instance needs a 'name'");
  std::string name = node.at("name").get<std::string>();
  Eigen::Index d = node.value("d", Eigen::Index(-1));
  Eigen::Index m = node.value("m", Eigen::Index(-1));
  uint64_t seed = node.value("seed", uint64_t(0));
  if (seed_override) seed = seed_override;

  Instance inst;
  try {
    inst = make_instance(name, d, m, seed);
  } catch (const SolverError& e) {
    throw UsageError(e.what());
  }
  if (node.contains("beta_override")) {
    double b = node.at("beta_override").get<double>();
    inst.problem.c.beta = b;
    inst.problem.mu = inst.problem.L() * b;
    inst.problem.rho = inst.problem.r = inst.problem.mu;
    if (inst.finite_sum) inst.finite_sum->c.beta = b;
  }
  return inst;
}

ErrorSchedule parse_schedule(const json& node, const std::string& where) {
  check_keys(node, {"rule", "scale", "eps0", "q"}, where);
  std::string rule = node.value("rule", std::string("zero"));
  if (rule == "zero") return ErrorSchedule::zero();
  if (rule == "inverse_square") return ErrorSchedule::inverse_square(node.value("scale", 1.0));
  if (rule == "power_law")
    return ErrorSchedule::power_law(node.value("eps0", 1.0), node.value("q", 4.0));
  throw UsageError("unknown schedule rule '" + rule + "' in " + where);
}

// one solver spec -> a finished trace on a fresh copy of the instance
Trace run_solver(const json& node, const Instance& inst) {
  check_keys(node,
             {"algorithm", "name", "t", "max_outer", "grad_tol", "inner_budget",
              "record_true_G", "schedule", "delta_schedule", "mu_tilde", "eps", "q", "T",
              "seed", "t0", "eta", "alpha"},
             "solver");
  if (!node.contains("algorithm")) throw UsageError("solver needs an 'algorithm'");
  std::string alg = node.at("algorithm").get<std::string>();
  const CompositeProblem p = inst.problem.with_fresh_tally();

  ProxLinearConfig cfg;
  if (node.contains("t")) cfg.t = node.at("t").get<double>();
  cfg.max_outer = node.value("max_outer", cfg.max_outer);
  cfg.grad_tol = node.value("grad_tol", cfg.grad_tol);
  cfg.inner_budget = node.value("inner_budget", cfg.inner_budget);
  cfg.record_true_G = node.value("record_true_G", false);
  if (node.contains("schedule")) cfg.schedule = parse_schedule(node.at("schedule"), "schedule");

  if (alg == "prox_linear") return run_prox_linear(p, inst.x0, cfg);
  if (alg == "inexact_gap") return run_inexact_function_gap(p, inst.x0, cfg);
  if (alg == "inexact_stationary") return run_inexact_dual_stationary(p, inst.x0, cfg);
  if (alg == "smoothed") {
    SmoothingPlan plan = SmoothingPlan::make(p, node.value("eps", 1e-2));
    return run_smoothed_driver(p, inst.x0, plan, node.value("max_outer", 100000)).second;
  }
  if (alg == "budgeted") {
    BudgetPlan plan = BudgetPlan::make(p, node.value("q", 0.5), node.value("T", long(100000)));
    return run_budgeted_driver(p, inst.x0, plan).second;
  }
  if (alg == "finite_sum") {
    if (!inst.finite_sum) throw UsageError("instance '" + inst.name + "' has no finite-sum form");
    FiniteSumProblem fs = *inst.finite_sum;
    fs.tally = p.tally;
    FiniteSumDriverConfig fcfg;
    fcfg.seed = node.value("seed", uint64_t(1));
    fcfg.max_outer = node.value("max_outer", fcfg.max_outer);
    return run_finite_sum_driver(fs, inst.x0, node.value("eps", 5e-2), fcfg).second;
  }
  if (alg == "accelerated" || alg == "accelerated_stationary" || alg == "accelerated_gap") {
    AcceleratedConfig acfg;
    acfg.mu_tilde = node.contains("mu_tilde") ? node.at("mu_tilde").get<double>()
                                              : (p.mu > 0 ? 2 * p.mu : 1.0);
    acfg.max_outer = node.value("max_outer", acfg.max_outer);
    acfg.inner_budget = node.value("inner_budget", acfg.inner_budget);
    acfg.record_true_G = node.value("record_true_G", false);
    if (node.contains("schedule"))
      acfg.eps_schedule = parse_schedule(node.at("schedule"), "schedule");
    if (node.contains("delta_schedule"))
      acfg.delta_schedule = parse_schedule(node.at("delta_schedule"), "delta_schedule");
    if (alg == "accelerated") return run_accelerated(p, inst.x0, inst.x0, acfg);
    if (alg == "accelerated_stationary")
      return run_accelerated_inexact_stationary(p, inst.x0, inst.x0, acfg);
    return run_accelerated_inexact_gap(p, inst.x0, inst.x0, acfg);
  }
  if (alg == "accelerated_backtracking") {
    BacktrackingConfig bcfg;
    bcfg.t0 = node.value("t0", bcfg.t0);
    bcfg.eta = node.value("eta", bcfg.eta);
    bcfg.alpha = node.value("alpha", bcfg.alpha);
    bcfg.max_outer = node.value("max_outer", bcfg.max_outer);
    bcfg.inner_budget = node.value("inner_budget", bcfg.inner_budget);
    return run_accelerated_backtracking(p, inst.x0, inst.x0, bcfg);
  }
  throw UsageError("unknown algorithm '" + alg + "'");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trace_csv(const std::string& path, const Trace& tr, bool timing) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open output file: " + path);
  out << "k,F,proxgrad_norm_surrogate,proxgrad_norm_true,step_norm,eps_k,delta_k,"
         "inner_iters,n_c_eval,n_jvp,n_vjp,n_prox_h,n_prox_g,wall_ns\n";
  for (const auto& r : tr.records) {
    out << r.k << ',' << fmt(r.F_val) << ',' << fmt(r.prox_grad_norm) << ',';
    if (r.prox_grad_norm_true) out << fmt(*r.prox_grad_norm_true);
    out << ',' << fmt(r.step_norm) << ',' << fmt(r.eps_k) << ',' << fmt(r.delta_k) << ','
        << r.inner_iters << ',' << r.counters.n_c_eval << ',' << r.counters.n_jvp << ','
        << r.counters.n_vjp << ',' << r.counters.n_prox_h << ',' << r.counters.n_prox_g << ','
        << (timing ? r.wall_ns : 0) << '\n';
  }
}

// --- verification suites ---

struct SuiteResult {
  std::string name;
  bool passed = true;
  std::string detail;
};

Vector sample_near(const Vector& base, double radius, Rng& rng) {
  Vector x = base;
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += radius * rng.gaussian();
  return x;
}

SuiteResult suite_jacobian(const Instance& inst, int points, uint64_t seed) {
  SuiteResult res{"jacobian", true, ""};
  Rng rng(mix64(seed, 0x1ac0));
  double worst = 0;
  for (int i = 0; i < points; ++i) {
    Vector x = sample_near(inst.x0, 0.5, rng);
    worst = std::max(worst, finite_diff_jacobian_check(inst.problem.c, x, 4, seed + i));
  }
  res.passed = worst < 1e-5;
  res.detail = "worst relative Jacobian residual " + fmt(worst);
  return res;
}

SuiteResult suite_model_error(const Instance& inst, int samples, uint64_t seed) {
  SuiteResult res{"model_error", true, ""};
  ProbeReport rep = model_error_probe(inst.problem, inst.x0, 0.5, samples, seed);
  res.passed = rep.violations == 0;
  res.detail = std::to_string(rep.violations) + "/" + std::to_string(rep.samples) +
               " violations, worst margin " + fmt(rep.worst_margin);
  return res;
}

SuiteResult suite_weak_convexity(const Instance& inst, int samples, uint64_t seed) {
  SuiteResult res{"weak_convexity", true, ""};
  ProbeReport rep = weak_convexity_probe(inst.problem, inst.x0, 0.5, samples, seed);
  res.passed = rep.violations == 0;
  res.detail = std::to_string(rep.violations) + "/" + std::to_string(rep.samples) +
               " violations, worst margin " + fmt(rep.worst_margin);
  return res;
}

SuiteResult suite_sandwich(const Instance& inst, int points, double t, uint64_t seed) {
  SuiteResult res{"sandwich", true, ""};
  Rng rng(mix64(seed, 0x5a));
  for (int i = 0; i < points && res.passed; ++i) {
    Vector x = sample_near(inst.x0, 0.3, rng);
    SandwichReport rep = check_sandwich(inst.problem, x, t);
    if (!rep.ok()) {
      res.passed = false;
      res.detail = "failed at sampled point " + std::to_string(i) + ": G=" + fmt(rep.g_norm) +
                   " env=" + fmt(rep.env_norm);
    }
  }
  if (res.passed) res.detail = "both bounds hold at " + std::to_string(points) + " points";
  return res;
}

SuiteResult suite_descent(const Instance& inst) {
  SuiteResult res{"descent", true, ""};
  ProxLinearConfig cfg;
  cfg.max_outer = 30;
  Trace tr = run_prox_linear(inst.problem.with_fresh_tally(), inst.x0, cfg);
  TraceAuditReport audit = audit_exact_descent(tr, tr.stats.at("t"));
  res.passed = audit.descent_ok && audit.efficiency_ok;
  res.detail = "worst per-step margin " + fmt(audit.worst_descent_margin);
  return res;
}

SuiteResult suite_penalization(const Instance& inst, int points, uint64_t seed) {
  SuiteResult res{"penalization", true, ""};
  const CompositeProblem& p = inst.problem;
  double t = p.mu > 0 ? 1 / p.mu : 1.0;
  LinearizedModel m = make_model(p, inst.x0, t);
  ProxFunction f = model_objective_function(m);
  SubproblemSolution sol = solve_exact(m);
  double f_inf = model_value(m, sol.x_plus) - exact_solve_tol(m);

  Rng rng(mix64(seed, 0xbe7a));
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < points && res.passed; ++i) {
    Vector z = sample_near(inst.x0, 0.3, rng);
    double lambda = std::exp(rng.uniform() * 3 - 2) * t;  // spread around t
    PenalizationReport rep = quadratic_penalization_check(f, z, lambda, f_inf, 1e-7);
    worst = std::min({worst, rep.rhs_plain - rep.lhs, rep.rhs_strong - rep.lhs});
    if (!rep.ok()) {
      res.passed = false;
      res.detail = "failed at point " + std::to_string(i) + ": lhs=" + fmt(rep.lhs) +
                   " rhs_strong=" + fmt(rep.rhs_strong);
    }
  }
  if (res.passed) res.detail = "tightest margin " + fmt(worst);
  return res;
}

SuiteResult suite_prox_calculus(const Instance& inst, int points, uint64_t seed) {
  SuiteResult res{"prox_calculus", true, ""};
  const ProxFunction& h = inst.problem.h;
  const double L = inst.problem.L();
  Rng rng(mix64(seed, 0xca1c));
  Vector base = eval_c(inst.problem, inst.x0);
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < points && res.passed; ++i) {
    Vector z = sample_near(base, 1.0, rng);
    double nu = std::exp(rng.uniform() * 2 - 1);
    ProxFunction hnu = envelope_function(h, nu);

    // envelope stays within [h - L^2 nu / 2, h]
    double gap = h.value(z) - hnu.value(z);
    double m1 = std::min(gap + 1e-12, L * L * nu / 2 - gap + 1e-12);
    // gradient against a central difference of the envelope value
    Vector grad = envelope_gradient(h, nu, z);
    double fd_tol = 1e-5 * (1 + grad.norm());
    double m2 = fd_tol;
    for (Eigen::Index j = 0; j < z.size() && i == 0; ++j) {
      Vector e = Vector::Zero(z.size());
      e[j] = 1e-6;
      double fd = (envelope_value(h, nu, z + e) - envelope_value(h, nu, z - e)) / 2e-6;
      m2 = std::min(m2, fd_tol - std::abs(fd - grad[j]));
    }
    // prox of the envelope satisfies the envelope's own optimality condition
    double tt = 0.5 + rng.uniform();
    Vector u = prox_of_envelope(h, nu, tt, z);
    double resid = ((z - u) / tt - envelope_gradient(h, nu, u)).norm();
    double m3 = 1e-9 * (1 + grad.norm()) - resid;
    // variational upper bound at a random competitor
    Vector w = sample_near(z, 1.0, rng);
    double m4 = h.value(w) + (z - w).squaredNorm() / (2 * nu) - hnu.value(z) + 1e-12;

    worst = std::min({worst, m1, m2, m3, m4});
    if (worst < 0) {
      res.passed = false;
      res.detail = "identity violated at sampled point " + std::to_string(i);
    }
  }
  if (res.passed) res.detail = "tightest margin " + fmt(worst);
  return res;
}

int cmd_verify(const json& cfg, const Instance& inst, bool quiet) {
  std::set<std::string> suites = {"jacobian",  "model_error",  "weak_convexity", "sandwich",
                                  "descent",   "penalization", "prox_calculus"};
  int samples = 200, points = 5;
  double t = inst.problem.mu > 0 ? 1 / inst.problem.mu : 1.0;
  uint64_t seed = 2024;
  if (cfg.contains("verify")) {
    const json& v = cfg.at("verify");
    check_keys(v, {"suites", "samples", "points", "t", "seed"}, "verify");
    if (v.contains("suites")) {
      suites.clear();
      for (const auto& s : v.at("suites")) suites.insert(s.get<std::string>());
    }
    samples = v.value("samples", samples);
    points = v.value("points", points);
    t = v.value("t", t);
    seed = v.value("seed", seed);
  }

  std::vector<SuiteResult> results;
  for (const std::string& s : suites) {
    if (s == "jacobian") results.push_back(suite_jacobian(inst, points, seed));
    else if (s == "model_error") results.push_back(suite_model_error(inst, samples, seed));
    else if (s == "weak_convexity") results.push_back(suite_weak_convexity(inst, samples, seed));
    else if (s == "sandwich") results.push_back(suite_sandwich(inst, points, t, seed));
    else if (s == "descent") results.push_back(suite_descent(inst));
    else if (s == "penalization") results.push_back(suite_penalization(inst, points, seed));
    else if (s == "prox_calculus") results.push_back(suite_prox_calculus(inst, points, seed));
    else throw UsageError("unknown verify suite '" + s + "'");
  }

  bool all_ok = true;
  for (const auto& r : results) {
    all_ok = all_ok && r.passed;
    if (!quiet)
      std::printf("%-16s %s  (%s)\n", r.name.c_str(), r.passed ? "PASS" : "FAIL",
                  r.detail.c_str());
  }
  return all_ok ? 0 : 1;
}

int cmd_compare(const json& cfg, const Instance& inst, const std::string& out_path,
                bool quiet) {
  if (!cfg.contains("solvers") || !cfg.at("solvers").is_array() || cfg.at("solvers").empty())
    throw UsageError("compare needs a non-empty 'solvers' array");

  struct Row {
    double F = 0, G = 0;
  };
  std::vector<std::string> names;
  std::vector<std::map<long, Row>> columns;
  for (const auto& spec : cfg.at("solvers")) {
    std::string name = spec.value("name", spec.value("algorithm", std::string("solver")));
    Trace tr = run_solver(spec, inst);
    std::map<long, Row> col;
    for (const auto& r : tr.records) {
      long ops = r.counters.n_c_eval + r.counters.n_jvp + r.counters.n_vjp +
                 r.counters.n_prox_h + r.counters.n_prox_g;
      col[ops] = Row{r.F_val, r.prox_grad_norm};
    }
    names.push_back(name);
    columns.push_back(std::move(col));
    if (!quiet)
      std::printf("%-24s iters=%zu F_final=%s\n", name.c_str(), tr.records.size(),
                  fmt(tr.F_final).c_str());
  }

  std::set<long> keys;
  for (const auto& col : columns)
    for (const auto& [k, v] : col) keys.insert(k);

  std::ofstream out(out_path);
  if (!out) throw UsageError("cannot open output file: " + out_path);
  out << "ops";
  for (const auto& n : names) out << ',' << n << "_F," << n << "_G";
  out << '\n';
  for (long k : keys) {
    out << k;
    for (const auto& col : columns) {
      auto it = col.find(k);
      if (it == col.end()) out << ",,";
      else out << ',' << fmt(it->second.F) << ',' << fmt(it->second.G);
    }
    out << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prox-linear solver toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  uint64_t seed_override = 0;
  bool quiet = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_path, "output path override");
    sub->add_option("--seed", seed_override, "instance seed override");
    sub->add_flag("--quiet", quiet, "suppress console summary");
  };
  CLI::App* run = app.add_subcommand("run", "execute one solver, write a trace CSV");
  CLI::App* verify = app.add_subcommand("verify", "check inequality suites on an instance");
  CLI::App* compare = app.add_subcommand("compare", "run several solvers, join on oracle cost");
  add_common(run);
  add_common(verify);
  add_common(compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    json cfg = load_config(config_path);
    Instance inst = build_instance(cfg.at("instance"), seed_override);
    bool timing = cfg.value("timing", false);

    if (run->parsed()) {
      if (!cfg.contains("solver")) throw UsageError("run needs a 'solver' section");
      Trace tr = run_solver(cfg.at("solver"), inst);
      std::string path =
          !out_path.empty() ? out_path : cfg.value("output", std::string("trace.csv"));
      write_trace_csv(path, tr, timing);
      if (!quiet)
        std::printf("%s: %zu iterations, F_final=%s -> %s\n", inst.name.c_str(),
                    tr.records.size(), fmt(tr.F_final).c_str(), path.c_str());
      return 0;
    }
    if (verify->parsed()) return cmd_verify(cfg, inst, quiet);
    std::string path =
        !out_path.empty() ? out_path : cfg.value("output", std::string("compare.csv"));
    return cmd_compare(cfg, inst, path, quiet);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return 1;
  }
}
