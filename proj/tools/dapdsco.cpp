// Command-line front end: generate instances, run the asynchronous engine or a
// baseline, verify recorded runs against the descent/summability/rate checks,
// and drive multi-seed comparisons and impairment sweeps.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 verification failure.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dapdsco/analysis.hpp"
#include "dapdsco/baselines.hpp"
#include "dapdsco/generator.hpp"
#include "dapdsco/io.hpp"
#include "dapdsco/oracles.hpp"
#include "dapdsco/simnet.hpp"
#include "dapdsco/trace.hpp"

namespace fs = std::filesystem;
using namespace dapdsco;

namespace {

struct GenerateArgs {
  std::string kind = "three_tier";
  std::string spec_path;
  std::string out;
  std::uint64_t seed = 1;
  int suppliers = 2, warehouses = 3, retailers = 5;
  std::vector<double> cost_range{0.5, 2.0};
  std::vector<double> demand_range;
  std::vector<double> curvature_range{0.5, 2.0};
  std::vector<double> linear_range{-1.0, 1.0};
};

struct RunArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> algorithm;
  std::optional<long> iterations;
  bool overwrite = false;
  bool full_trace = false;
  long stride = 0;
};

struct VerifyArgs {
  std::string run_dir;
  std::string report;
};

struct CompareArgs {
  std::string config;
  std::string out;
  std::string algorithms = "dapdsco,sync_pd";
  std::string seeds = "1..10";
  bool overwrite = false;
};

struct SweepArgs {
  std::string config;
  std::string out;
  std::vector<std::string> params;
  std::string seeds = "1..5";
  long cap = 256;
  bool overwrite = false;
};

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dots = item.find("..");
    if (dots != std::string::npos) {
      const auto lo = std::stoull(item.substr(0, dots));
      const auto hi = std::stoull(item.substr(dots + 2));
      if (hi < lo) throw std::runtime_error("seed range is descending: " + item);
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } else if (!item.empty()) {
      seeds.push_back(std::stoull(item));
    }
  }
  if (seeds.empty()) throw std::runtime_error("empty seed list");
  return seeds;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::runtime_error("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

fs::path resolve_out_dir(const std::string& out, const std::string& fallback_name) {
  if (!out.empty()) return fs::path(out);
  if (const char* root = std::getenv("DAPDSCO_OUT_ROOT"))
    return fs::path(root) / fallback_name;
  throw std::runtime_error("--out is required (or set DAPDSCO_OUT_ROOT)");
}

void prepare_dir(const fs::path& dir, bool overwrite, const char* marker) {
  if (fs::exists(dir / marker) && !overwrite)
    throw std::runtime_error("refusing to overwrite existing run directory " + dir.string() +
                             " (pass --overwrite)");
  fs::create_directories(dir);
}

SimResult dispatch_run(const RunSetup& setup) {
  const SimConfig& cfg = setup.sim;
  switch (cfg.algorithm) {
    case Algorithm::Dapdsco:
      return run_simulation_full(cfg);
    case Algorithm::SyncPd:
      if (cfg.dag)
        return sync_pd_run_full(*cfg.dag, cfg.alpha, cfg.beta, cfg.iterations, cfg.seed, cfg.init,
                                cfg.lambda_max_override);
      return sync_pd_run_full(*cfg.quad, cfg.alpha, cfg.beta, cfg.iterations, cfg.seed, cfg.init,
                              cfg.lambda_max_override);
    case Algorithm::Admm:
      if (!cfg.quad) throw std::runtime_error("admm requires a quadratic problem");
      return admm_run_full(*cfg.quad, cfg.admm_rho, cfg.iterations, cfg.seed, cfg.init,
                           cfg.lambda_max_override);
    case Algorithm::GradientPush:
    default:
      if (!cfg.quad) throw std::runtime_error("gradient_push requires a quadratic problem");
      return gradient_push_run_full(*cfg.quad, make_ring_mixing(cfg.quad->n_agents()), cfg.gp_step,
                                    cfg.gp_penalty, cfg.iterations, cfg.seed, cfg.init,
                                    cfg.lambda_max_override);
  }
}

int cmd_generate(const GenerateArgs& args) {
  GeneratorSpec spec;
  if (!args.spec_path.empty()) {
    spec = generator_spec_from_json(load_json_file(args.spec_path));
  } else {
    spec.kind = args.kind;
    spec.seed = args.seed;
    spec.three_tier.suppliers = spec.quadratic.suppliers = args.suppliers;
    spec.three_tier.warehouses = spec.quadratic.warehouses = args.warehouses;
    spec.three_tier.retailers = spec.quadratic.retailers = args.retailers;
    auto as_range = [](const std::vector<double>& v, const char* what) {
      if (v.size() != 2) throw std::runtime_error(std::string(what) + " range needs two values");
      return std::make_pair(v[0], v[1]);
    };
    spec.three_tier.cost_range = as_range(args.cost_range, "cost");
    if (!args.demand_range.empty()) {
      spec.three_tier.demand_range = as_range(args.demand_range, "demand");
      spec.quadratic.demand_range = spec.three_tier.demand_range;
    }
    spec.quadratic.curvature_range = as_range(args.curvature_range, "curvature");
    spec.quadratic.linear_range = as_range(args.linear_range, "linear");
  }

  const AnyProblem problem = materialize(spec);
  json j = problem.is_dag() ? problem_to_json(*problem.dag) : problem_to_json(*problem.quad);
  j["generator"] = generator_spec_to_json(spec);
  atomic_write_file(args.out, j.dump(2) + "\n");

  if (problem.is_dag()) {
    const auto& p = *problem.dag;
    const auto slater = slater_check(p);
    const double min_margin =
        *std::min_element(slater.margins.begin(), slater.margins.end());
    std::cout << "wrote " << args.out << ": supply_chain, " << p.num_nodes() << " nodes, "
              << p.num_edges() << " edges, " << p.num_retailers() << " retailers\n"
              << "slater: " << (slater.strictly_feasible ? "strictly feasible" : "NOT satisfied")
              << " (min margin " << min_margin << ")\n";
    if (!slater.strictly_feasible) return 1;
  } else {
    const auto& q = *problem.quad;
    try {
      const auto sp = exact_oracle_kkt(q);
      std::cout << "wrote " << args.out << ": quadratic, N=" << q.n_agents()
                << ", m=" << q.n_constraints() << "\n"
                << "kkt: nonsingular, |lambda*| = " << norm2(sp.lambda_star)
                << ", optimal value " << sp.optimal_value << "\n";
    } catch (const std::exception& e) {
      std::cout << "wrote " << args.out << ": quadratic, N=" << q.n_agents()
                << ", m=" << q.n_constraints() << "\nkkt: SINGULAR (" << e.what() << ")\n";
      return 1;
    }
  }
  return 0;
}

void write_run_dir(const fs::path& dir, const RunSetup& setup, const SimResult& result,
                   const TraceWriteOptions& topts) {
  if (setup.sim.dag)
    atomic_write_file(dir / "problem.json", problem_to_json(*setup.sim.dag).dump(2) + "\n");
  else
    atomic_write_file(dir / "problem.json", problem_to_json(*setup.sim.quad).dump(2) + "\n");
  atomic_write_file(dir / "config.json", setup.effective.dump(2) + "\n");
  atomic_write_file(dir / "trace.csv", trace_to_csv(result.trace, topts));
  atomic_write_file(dir / "summary.json", make_run_summary(result, setup).dump(2) + "\n");
}

int cmd_run(const RunArgs& args) {
  const fs::path config_path(args.config);
  if (!fs::exists(config_path)) throw std::runtime_error("config file not found: " + args.config);
  RunSetup setup = load_run_setup(load_json_file(config_path), config_path.parent_path(),
                                  args.seed, args.algorithm, args.iterations);
  if (args.full_trace) setup.trace_opts.full_iterates = true;
  if (args.stride > 0) setup.trace_opts.stride = args.stride;

  const std::string fallback = config_path.stem().string() + "-" +
                               algorithm_name(setup.sim.algorithm) + "-s" +
                               std::to_string(setup.sim.seed);
  const fs::path dir = resolve_out_dir(args.out, fallback);
  prepare_dir(dir, args.overwrite, "summary.json");

  const SimResult result = dispatch_run(setup);
  write_run_dir(dir, setup, result, setup.trace_opts);

  const auto& last = result.trace.ticks.back();
  const auto kstar = convergence_time(result.trace, setup.gap_threshold, setup.violation_threshold);
  std::cout << algorithm_name(setup.sim.algorithm) << " seed=" << setup.sim.seed << " K="
            << setup.sim.iterations << ": final gap " << format_double(last.gap)
            << ", violation " << format_double(last.violation) << ", messages "
            << result.trace.total_sent << ", k*="
            << (kstar ? std::to_string(*kstar) : std::string("none")) << "\n"
            << "run directory: " << dir.string() << "\n";
  return 0;
}

int cmd_verify(const VerifyArgs& args) {
  const fs::path dir(args.run_dir);
  if (!fs::exists(dir / "trace.csv") || !fs::exists(dir / "problem.json"))
    throw std::runtime_error("run directory must contain trace.csv and problem.json: " +
                             dir.string());
  const TraceTable table = read_trace_csv((dir / "trace.csv").string());
  const AnyProblem problem = load_problem(dir / "problem.json");
  json summary;
  if (fs::exists(dir / "summary.json")) summary = load_json_file(dir / "summary.json");
  json config;
  if (fs::exists(dir / "config.json")) config = load_json_file(dir / "config.json");

  if (summary.contains("variant")) {
    const std::string variant = summary.at("variant").get<std::string>();
    if ((variant == "supply_chain") != problem.is_dag())
      throw std::runtime_error("trace/problem mismatch: summary says " + variant);
  }

  bool all_ok = true;
  json report;
  auto record = [&](const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
    report["checks"].push_back({{"name", name}, {"passed", ok}, {"detail", detail}});
    all_ok = all_ok && ok;
  };

  // Schema and message conservation.
  {
    const auto& k = table.column("k");
    bool monotone = true;
    for (std::size_t i = 1; i < k.size(); ++i)
      if (k[i] <= k[i - 1]) monotone = false;
    record("trace_schema", monotone && table.rows() > 0,
           std::to_string(table.rows()) + " rows, monotone ticks");
    const auto& sent = table.column("sent");
    const auto& dropped = table.column("dropped");
    const auto& delivered = table.column("delivered");
    bool conserved = true;
    for (long i = 0; i < table.rows(); ++i)
      if (delivered[static_cast<std::size_t>(i)] + dropped[static_cast<std::size_t>(i)] !=
          sent[static_cast<std::size_t>(i)])
        conserved = false;
    record("message_conservation", conserved, "delivered + dropped == sent on every tick");
  }

  // Lyapunov descent, when the trace carries the annotated columns.
  {
    const auto& E = table.column("E");
    const bool applicable = std::any_of(E.begin(), E.end(), [](double v) { return !std::isnan(v); });
    if (applicable) {
      const auto rep = lyapunov_descent_check_columns(
          table.column("V_pre"), table.column("V_post"), table.column("alpha"),
          table.column("beta"), table.column("delta_x"), table.column("delta_lambda"), E);
      record("lyapunov_descent", rep.violations == 0,
             std::to_string(rep.checked) + " ticks checked, " + std::to_string(rep.violations) +
                 " violations, worst slack " + format_double(rep.worst_slack));
      report["lyapunov"] = {{"checked", rep.checked},
                            {"violations", rep.violations},
                            {"worst_slack", rep.worst_slack}};
    } else {
      std::cout << "SKIP lyapunov_descent: trace has no error-envelope columns (quadratic "
                   "variant or missing oracle)\n";
    }
  }

  // Error-series growth. The verify gate rejects divergent (linearly growing)
  // series, which is what a constant-step run produces; the strict 5%-tail
  // `summable` flag is reported alongside. Traces without envelope columns
  // (quadratic variant) skip the check.
  {
    const auto& E = table.column("E");
    const bool applicable = std::any_of(E.begin(), E.end(), [](double v) { return !std::isnan(v); });
    if (applicable) {
      bool diminishing = true;
      if (config.contains("resolved") && config["resolved"].contains("alpha"))
        diminishing = config["resolved"]["alpha"].value("kind", "diminishing") == "diminishing";
      const auto rep = error_series_check(E, table.column("S"), diminishing);
      const bool sublinear = rep.tail_increment < 0.6 * rep.sum_half;
      record("error_series", sublinear && diminishing,
             "partial sums " + format_double(rep.sum_half) + " -> " + format_double(rep.sum_full) +
                 ", tail ratio " + format_double(rep.tail_ratio) +
                 (rep.summable ? " (summable at the 5% bar)" : " (not summable at the 5% bar)"));
      report["error_series"] = {{"sum_half", rep.sum_half},
                                {"sum_full", rep.sum_full},
                                {"tail_ratio", rep.tail_ratio},
                                {"summable", rep.summable}};
    } else {
      std::cout << "SKIP error_series: trace has no error-envelope columns\n";
    }
  }

  // Ergodic rate slope, when at least three decades are available.
  {
    const auto& eg = table.column("ergodic_gap");
    const auto& kcol = table.column("k");
    std::vector<std::pair<double, double>> pts;
    for (long k = 100; k <= table.rows(); k *= 10) {
      // rows may be strided; locate the row with tick k-1
      for (std::size_t i = 0; i < kcol.size(); ++i)
        if (static_cast<long>(kcol[i]) == k - 1 && !std::isnan(eg[i]))
          pts.emplace_back(static_cast<double>(k), eg[i]);
    }
    if (pts.size() >= 3) {
      const auto fit = fit_log_slope(pts);
      const bool in_band = fit.slope >= -0.7 && fit.slope <= -0.35;
      record("rate_slope", in_band,
             "slope " + format_double(fit.slope) + " over " + std::to_string(fit.points) +
                 " decades (band [-0.7, -0.35])");
      report["rate_slope"] = {{"slope", fit.slope}, {"residual", fit.residual}};
    } else {
      std::cout << "SKIP rate_slope: fewer than three decades of ergodic gap samples\n";
    }
  }

  report["passed"] = all_ok;
  const fs::path report_path =
      args.report.empty() ? dir / "verify.json" : fs::path(args.report);
  atomic_write_file(report_path, report.dump(2) + "\n");
  return all_ok ? 0 : 2;
}

int cmd_compare(const CompareArgs& args) {
  const fs::path config_path(args.config);
  const json raw = load_json_file(config_path);
  const auto seeds = parse_seed_list(args.seeds);

  std::vector<std::string> algos;
  {
    std::stringstream ss(args.algorithms);
    std::string a;
    while (std::getline(ss, a, ','))
      if (!a.empty()) algos.push_back(a);
  }
  if (algos.size() < 1) throw std::runtime_error("compare needs at least one algorithm");

  const fs::path dir = resolve_out_dir(args.out, config_path.stem().string() + "-compare");
  prepare_dir(dir, args.overwrite, "compare.csv");

  std::string csv = "algorithm,seed,final_cost,final_gap,final_violation,messages,k_star\n";
  std::string medians;
  for (const auto& algo : algos) {
    std::vector<double> costs, gaps, viols, msgs, kstars;
    for (const auto seed : seeds) {
      RunSetup setup = load_run_setup(raw, config_path.parent_path(), seed, algo, std::nullopt);
      const SimResult result = dispatch_run(setup);
      const auto& last = result.trace.ticks.back();
      const auto kstar =
          convergence_time(result.trace, setup.gap_threshold, setup.violation_threshold);
      const double final_cost = setup.sim.dag ? total_cost(*setup.sim.dag, result.trace.x.back())
                                              : setup.sim.quad->objective(result.trace.x.back());
      costs.push_back(final_cost);
      gaps.push_back(last.gap);
      viols.push_back(last.violation);
      msgs.push_back(static_cast<double>(result.trace.total_sent));
      kstars.push_back(kstar ? static_cast<double>(*kstar)
                             : std::numeric_limits<double>::infinity());
      csv += algo + "," + std::to_string(seed) + "," + format_double(final_cost) + "," +
             format_double(last.gap) + "," + format_double(last.violation) + "," +
             std::to_string(result.trace.total_sent) + "," +
             (kstar ? std::to_string(*kstar) : std::string()) + "\n";
    }
    const double med_kstar = median(kstars);
    medians += algo + ",median," + format_double(median(costs)) + "," +
               format_double(median(gaps)) + "," + format_double(median(viols)) + "," +
               format_double(median(msgs)) + "," +
               (std::isinf(med_kstar) ? std::string() : format_double(med_kstar)) + "\n";
  }
  csv += medians;
  atomic_write_file(dir / "compare.csv", csv);
  atomic_write_file(dir / "config.json", raw.dump(2) + "\n");
  std::cout << "comparison table: " << (dir / "compare.csv").string() << "\n";
  return 0;
}

int cmd_sweep(const SweepArgs& args) {
  const fs::path config_path(args.config);
  const json raw = load_json_file(config_path);
  const auto seeds = parse_seed_list(args.seeds);
  if (args.params.empty()) throw std::runtime_error("sweep needs at least one --param");

  struct Axis {
    std::string key;
    std::vector<double> values;
  };
  std::vector<Axis> axes;
  for (const auto& p : args.params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("--param must look like key=v1,v2,...: " + p);
    Axis axis;
    axis.key = p.substr(0, eq);
    std::stringstream ss(p.substr(eq + 1));
    std::string v;
    while (std::getline(ss, v, ','))
      if (!v.empty()) axis.values.push_back(std::stod(v));
    if (axis.values.empty()) throw std::runtime_error("empty value list for " + axis.key);
    axes.push_back(std::move(axis));
  }

  long cells = 1;
  for (const auto& a : axes) cells *= static_cast<long>(a.values.size());
  if (cells > args.cap)
    throw std::runtime_error("sweep grid has " + std::to_string(cells) +
                             " cells, above the cap of " + std::to_string(args.cap));

  const fs::path dir = resolve_out_dir(args.out, config_path.stem().string() + "-sweep");
  prepare_dir(dir, args.overwrite, "sweep.csv");

  std::string csv;
  for (const auto& a : axes) csv += a.key + ",";
  csv += "median_k_star,median_final_gap,converged_seeds\n";

  std::vector<std::size_t> idx(axes.size(), 0);
  for (long cell = 0; cell < cells; ++cell) {
    json cell_cfg = raw;
    if (!cell_cfg.contains("impairments")) cell_cfg["impairments"] = json::object();
    std::string prefix;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      cell_cfg["impairments"][axes[a].key] = axes[a].values[idx[a]];
      prefix += format_double(axes[a].values[idx[a]]) + ",";
    }
    std::vector<double> kstars, gaps;
    long converged = 0;
    for (const auto seed : seeds) {
      RunSetup setup =
          load_run_setup(cell_cfg, config_path.parent_path(), seed, std::nullopt, std::nullopt);
      const SimResult result = dispatch_run(setup);
      const auto kstar =
          convergence_time(result.trace, setup.gap_threshold, setup.violation_threshold);
      if (kstar) ++converged;
      kstars.push_back(kstar ? static_cast<double>(*kstar)
                             : std::numeric_limits<double>::infinity());
      gaps.push_back(result.trace.ticks.back().gap);
    }
    const double med_kstar = median(kstars);
    csv += prefix + (std::isinf(med_kstar) ? std::string() : format_double(med_kstar)) + "," +
           format_double(median(gaps)) + "," + std::to_string(converged) + "\n";
    // advance the odometer
    for (std::size_t a = axes.size(); a-- > 0;) {
      if (++idx[a] < axes[a].values.size()) break;
      idx[a] = 0;
    }
  }
  atomic_write_file(dir / "sweep.csv", csv);
  atomic_write_file(dir / "config.json", raw.dump(2) + "\n");
  std::cout << "sweep table: " << (dir / "sweep.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asynchronous primal-dual supply-chain flow allocation"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "generate a problem instance file");
  g->add_option("--kind", gen.kind, "three_tier | fig1 | quadratic_three_tier");
  g->add_option("--spec", gen.spec_path, "generator spec JSON (overrides inline flags)");
  g->add_option("--seed", gen.seed, "generator seed");
  g->add_option("--suppliers", gen.suppliers);
  g->add_option("--warehouses", gen.warehouses);
  g->add_option("--retailers", gen.retailers);
  g->add_option("--cost-range", gen.cost_range, "low high")->expected(2);
  g->add_option("--demand-range", gen.demand_range, "low high")->expected(2);
  g->add_option("--curvature-range", gen.curvature_range, "low high")->expected(2);
  g->add_option("--linear-range", gen.linear_range, "low high")->expected(2);
  g->add_option("--out", gen.out, "output problem file")->required();

  RunArgs run;
  auto* r = app.add_subcommand("run", "execute one run and write its artifacts");
  r->add_option("--config", run.config, "run configuration JSON")->required();
  r->add_option("--out", run.out, "run directory (default: $DAPDSCO_OUT_ROOT/<name>)");
  std::uint64_t seed_opt = 0;
  auto* seed_flag = r->add_option("--seed", seed_opt, "seed override");
  std::string algo_opt;
  auto* algo_flag = r->add_option("--algorithm", algo_opt,
                                  "dapdsco | sync_pd | admm | gradient_push");
  long iter_opt = 0;
  auto* iter_flag = r->add_option("--iterations", iter_opt, "iteration override");
  r->add_flag("--overwrite", run.overwrite, "allow writing into an existing run directory");
  r->add_flag("--full-trace", run.full_trace, "include iterate columns in trace.csv");
  r->add_option("--stride", run.stride, "write every n-th tick row");

  VerifyArgs ver;
  auto* v = app.add_subcommand("verify", "check a recorded run against the theory suite");
  v->add_option("--run", ver.run_dir, "run directory")->required();
  v->add_option("--report", ver.report, "verification report path");

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "run several algorithms over a seed list");
  c->add_option("--config", cmp.config, "base configuration JSON")->required();
  c->add_option("--algorithms", cmp.algorithms, "comma-separated algorithm list");
  c->add_option("--seeds", cmp.seeds, "comma list and/or a..b ranges");
  c->add_option("--out", cmp.out, "output directory");
  c->add_flag("--overwrite", cmp.overwrite);

  SweepArgs swp;
  auto* s = app.add_subcommand("sweep", "cross-product impairment sweep");
  s->add_option("--config", swp.config, "base configuration JSON")->required();
  s->add_option("--param", swp.params, "impairment axis, e.g. loss_rate=0,0.1,0.3")
      ->take_all();
  s->add_option("--seeds", swp.seeds, "seed list");
  s->add_option("--cap", swp.cap, "maximum number of grid cells");
  s->add_option("--out", swp.out, "output directory");
  s->add_flag("--overwrite", swp.overwrite);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (r->parsed()) {
      if (*seed_flag) run.seed = seed_opt;
      if (*algo_flag) run.algorithm = algo_opt;
      if (*iter_flag) run.iterations = iter_opt;
      return cmd_run(run);
    }
    if (v->parsed()) return cmd_verify(ver);
    if (c->parsed()) return cmd_compare(cmp);
    if (s->parsed()) return cmd_sweep(swp);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
