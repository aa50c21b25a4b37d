#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "dapdsco/analysis.hpp"
#include "dapdsco/generator.hpp"
#include "dapdsco/problem.hpp"
#include "dapdsco/simnet.hpp"
#include "dapdsco/trace.hpp"

namespace dapdsco {

using json = nlohmann::ordered_json;

// Write-temp-then-rename so partially written artifacts never appear under the
// final name.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json load_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Problem files
// ---------------------------------------------------------------------------

inline json problem_to_json(const SupplyChainProblem& p) {
  json j;
  j["type"] = "supply_chain";
  j["nodes"] = json::array();
  for (const auto& n : p.nodes()) j["nodes"].push_back({{"id", n.id}, {"tier", tier_name(n.tier)}});
  j["edges"] = json::array();
  for (const auto& e : p.edges()) {
    json je{{"from", e.from}, {"to", e.to}, {"cost", e.cost}, {"capacity", e.capacity}};
    if (e.cost_quadratic > 0.0) je["cost_quadratic"] = e.cost_quadratic;
    j["edges"].push_back(std::move(je));
  }
  json demands = json::object();
  for (int r = 0; r < p.num_retailers(); ++r) demands[p.retailer_id(r)] = p.demand(r);
  j["demands"] = std::move(demands);
  return j;
}

inline json problem_to_json(const QuadraticProblem& q) {
  json j;
  j["type"] = "quadratic";
  j["quadratic_coefficients"] = q.quad_coeff;
  j["linear_coefficients"] = q.lin_coeff;
  j["constraint_matrix"] = q.constraint;
  j["rhs"] = q.rhs;
  if (!q.labels.empty()) j["labels"] = q.labels;
  return j;
}

inline SupplyChainProblem dag_from_json(const json& j) {
  std::vector<NodeSpec> nodes;
  for (const auto& n : j.at("nodes"))
    nodes.push_back({n.at("id").get<std::string>(), tier_from_name(n.at("tier").get<std::string>())});
  std::vector<EdgeSpec> edges;
  for (const auto& e : j.at("edges")) {
    EdgeSpec spec;
    spec.from = e.at("from").get<std::string>();
    spec.to = e.at("to").get<std::string>();
    spec.cost = e.at("cost").get<double>();
    spec.capacity = e.at("capacity").get<double>();
    spec.cost_quadratic = e.value("cost_quadratic", 0.0);
    edges.push_back(std::move(spec));
  }
  std::map<std::string, double> demands;
  for (const auto& [id, d] : j.at("demands").items()) demands[id] = d.get<double>();
  return SupplyChainProblem(std::move(nodes), std::move(edges), std::move(demands));
}

inline QuadraticProblem quad_from_json(const json& j) {
  QuadraticProblem q;
  q.quad_coeff = j.at("quadratic_coefficients").get<std::vector<double>>();
  q.lin_coeff = j.at("linear_coefficients").get<std::vector<double>>();
  q.constraint = j.at("constraint_matrix").get<std::vector<std::vector<double>>>();
  q.rhs = j.at("rhs").get<std::vector<double>>();
  if (j.contains("labels")) q.labels = j.at("labels").get<std::vector<std::string>>();
  q.validate();
  return q;
}

struct AnyProblem {
  std::optional<SupplyChainProblem> dag;
  std::optional<QuadraticProblem> quad;

  bool is_dag() const { return dag.has_value(); }
};

inline AnyProblem problem_from_json(const json& j) {
  AnyProblem p;
  const std::string type = j.at("type").get<std::string>();
  if (type == "supply_chain")
    p.dag = dag_from_json(j);
  else if (type == "quadratic")
    p.quad = quad_from_json(j);
  else
    throw std::runtime_error("unknown problem type: " + type);
  return p;
}

inline AnyProblem load_problem(const std::filesystem::path& path) {
  return problem_from_json(load_json_file(path));
}

// ---------------------------------------------------------------------------
// Generator specs
// ---------------------------------------------------------------------------

struct GeneratorSpec {
  std::string kind;  // three_tier | fig1 | quadratic_three_tier
  std::uint64_t seed = 1;
  ThreeTierOptions three_tier;
  QuadraticOptions quadratic;
};

inline std::pair<double, double> range_from_json(const json& j, const char* key,
                                                 std::pair<double, double> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2)
    throw std::runtime_error(std::string("config key '") + key + "' must be [low, high]");
  return {v[0].get<double>(), v[1].get<double>()};
}

inline GeneratorSpec generator_spec_from_json(const json& j) {
  GeneratorSpec g;
  g.kind = j.at("kind").get<std::string>();
  if (g.kind != "three_tier" && g.kind != "fig1" && g.kind != "quadratic_three_tier")
    throw std::runtime_error("unknown generator kind: " + g.kind);
  g.seed = j.value("seed", 1ull);
  g.three_tier.suppliers = j.value("suppliers", 2);
  g.three_tier.warehouses = j.value("warehouses", 3);
  g.three_tier.retailers = j.value("retailers", 5);
  g.three_tier.cost_range = range_from_json(j, "cost_range", {0.5, 2.0});
  g.three_tier.demand_range = range_from_json(j, "demand_range", {0.25, 1.0});
  g.quadratic.suppliers = g.three_tier.suppliers;
  g.quadratic.warehouses = g.three_tier.warehouses;
  g.quadratic.retailers = g.three_tier.retailers;
  g.quadratic.curvature_range = range_from_json(j, "curvature_range", {0.5, 2.0});
  g.quadratic.linear_range = range_from_json(j, "linear_range", {-1.0, 1.0});
  g.quadratic.demand_range = range_from_json(j, "demand_range", {0.25, 0.75});
  return g;
}

inline json generator_spec_to_json(const GeneratorSpec& g) {
  json j;
  j["kind"] = g.kind;
  j["seed"] = g.seed;
  j["suppliers"] = g.three_tier.suppliers;
  j["warehouses"] = g.three_tier.warehouses;
  j["retailers"] = g.three_tier.retailers;
  if (g.kind == "quadratic_three_tier") {
    j["curvature_range"] = {g.quadratic.curvature_range.first, g.quadratic.curvature_range.second};
    j["linear_range"] = {g.quadratic.linear_range.first, g.quadratic.linear_range.second};
    j["demand_range"] = {g.quadratic.demand_range.first, g.quadratic.demand_range.second};
  } else {
    j["cost_range"] = {g.three_tier.cost_range.first, g.three_tier.cost_range.second};
    j["demand_range"] = {g.three_tier.demand_range.first, g.three_tier.demand_range.second};
  }
  return j;
}

inline AnyProblem materialize(const GeneratorSpec& g) {
  AnyProblem p;
  if (g.kind == "three_tier")
    p.dag = generate_three_tier(g.seed, g.three_tier);
  else if (g.kind == "fig1")
    p.dag = generate_fig1(g.seed, g.three_tier.cost_range, g.three_tier.demand_range);
  else
    p.quad = generate_quadratic_three_tier(g.seed, g.quadratic);
  return p;
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunSetup {
  SimConfig sim;
  TraceWriteOptions trace_opts;
  double gap_threshold = 0.1;
  double violation_threshold = 0.05;
  json effective;  // echo of the fully resolved configuration
};

inline StepSchedule schedule_from_json(const json& j, const char* key) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return StepSchedule::constant(j.at("value").get<double>());
    if (kind == "diminishing")
      return StepSchedule::diminishing(j.value("scale", 1.0), j.value("exponent", 0.5));
    throw std::runtime_error("unknown schedule kind: " + kind);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("config key '") + key + "': " + e.what());
  }
}

inline json schedule_to_json(const StepSchedule& s) {
  if (s.kind == StepSchedule::Kind::Constant) return json{{"kind", "constant"}, {"value", s.value}};
  return json{{"kind", "diminishing"}, {"scale", s.scale}, {"exponent", s.exponent}};
}

inline DriftSchedule drift_schedule_from_json(const json& j) {
  DriftSchedule d;
  for (const auto& knot : j) {
    if (!knot.is_array() || knot.size() != 2)
      throw std::runtime_error("drift knots must be [tick, scale] pairs");
    d.knots.emplace_back(knot[0].get<double>(), knot[1].get<double>());
  }
  d.validate();
  return d;
}

inline json drift_schedule_to_json(const DriftSchedule& d) {
  json j = json::array();
  for (const auto& [t, v] : d.knots) j.push_back({t, v});
  return j;
}

// Resolves a raw config object against its preset and overrides. `base_dir`
// anchors relative problem paths (typically the config file's directory).
inline RunSetup load_run_setup(json raw, const std::filesystem::path& base_dir,
                               std::optional<std::uint64_t> seed_override = std::nullopt,
                               std::optional<std::string> algorithm_override = std::nullopt,
                               std::optional<long> iterations_override = std::nullopt) {
  RunSetup setup;
  const std::string preset = raw.value("preset", std::string{});
  if (!preset.empty() && preset != "theory" && preset != "experiment-s10")
    throw std::runtime_error("unknown preset: " + preset);

  auto set_default = [&](const char* key, json value) {
    if (!raw.contains(key)) raw[key] = std::move(value);
  };

  if (preset == "theory") {
    set_default("iterations", 10000);
    set_default("alpha", json{{"kind", "diminishing"}, {"scale", 1.0}, {"exponent", 0.5}});
    set_default("beta", json{{"kind", "diminishing"}, {"scale", 1.0}, {"exponent", 0.5}});
    set_default("impairments", json::object());
    auto& imp = raw["impairments"];
    if (!imp.contains("delay_coeff")) imp["delay_coeff"] = 1.0;
    if (!imp.contains("delay_exponent")) imp["delay_exponent"] = 0.3;
    set_default("init", json{{"kind", "zero"}});
    if (!raw.contains("generator") && !raw.contains("problem"))
      raw["generator"] = json{{"kind", "three_tier"}, {"seed", 1},   {"suppliers", 1},
                              {"warehouses", 2},      {"retailers", 3}};
  } else if (preset == "experiment-s10") {
    set_default("iterations", 2000);
    set_default("alpha", json{{"kind", "constant"}, {"value", 0.01}});
    set_default("beta", json{{"kind", "constant"}, {"value", 0.05}});
    set_default("impairments", json::object());
    auto& imp = raw["impairments"];
    if (!imp.contains("delay_coeff")) imp["delay_coeff"] = 5.0;
    if (!imp.contains("delay_exponent")) imp["delay_exponent"] = 0.0;
    if (!imp.contains("max_buffer")) imp["max_buffer"] = 5;
    if (!imp.contains("loss_rate")) imp["loss_rate"] = 0.10;
    set_default("init", json{{"kind", "uniform"}, {"low", -1.0}, {"high", 1.0}});
    if (!raw.contains("generator") && !raw.contains("problem"))
      raw["generator"] = json{{"kind", "quadratic_three_tier"}, {"seed", 1}, {"suppliers", 2},
                              {"warehouses", 3},                {"retailers", 5}};
  }

  if (seed_override) raw["seed"] = *seed_override;
  if (algorithm_override) raw["algorithm"] = *algorithm_override;
  if (iterations_override) raw["iterations"] = *iterations_override;

  SimConfig& cfg = setup.sim;
  try {
    cfg.seed = raw.value("seed", 1ull);
    cfg.iterations = raw.value("iterations", 1000L);
    cfg.algorithm = algorithm_from_name(raw.value("algorithm", std::string{"dapdsco"}));
    if (raw.contains("alpha")) cfg.alpha = schedule_from_json(raw.at("alpha"), "alpha");
    if (raw.contains("beta")) cfg.beta = schedule_from_json(raw.at("beta"), "beta");
    cfg.preset = preset;

    if (raw.contains("impairments")) {
      const auto& imp = raw.at("impairments");
      cfg.impairments.delay_coeff = imp.value("delay_coeff", 0.0);
      cfg.impairments.delay_exponent = imp.value("delay_exponent", 0.3);
      cfg.impairments.loss_rate = imp.value("loss_rate", 0.0);
      cfg.impairments.activation_prob = imp.value("activation_prob", 1.0);
      cfg.impairments.noise_cost = imp.value("noise_cost", 0.0);
      cfg.impairments.noise_demand = imp.value("noise_demand", 0.0);
      if (imp.contains("max_buffer") && imp.at("max_buffer").get<long>() > 0) {
        cfg.impairments.max_buffer = imp.at("max_buffer").get<int>();
      } else {
        // Size the buffer so the sublinear cap never outgrows it over this run.
        const double cap = cfg.impairments.delay_coeff *
                           std::pow(static_cast<double>(cfg.iterations),
                                    cfg.impairments.delay_exponent);
        cfg.impairments.max_buffer = std::max(1, static_cast<int>(std::ceil(cap)));
      }
      if (imp.contains("link_outages")) {
        for (const auto& o : imp.at("link_outages")) {
          LinkOutage out;
          const std::string sender = o.at("sender").get<std::string>();
          const auto colon = sender.find(':');
          if (colon == std::string::npos)
            throw std::runtime_error("link outage sender must look like flow:<i> or price:<i>");
          const std::string side = sender.substr(0, colon);
          if (side == "price")
            out.price_side = true;
          else if (side != "flow")
            throw std::runtime_error("link outage sender side must be flow or price");
          out.index = std::stoi(sender.substr(colon + 1));
          out.from_tick = o.at("from").get<long>();
          out.to_tick = o.at("to").get<long>();
          cfg.impairments.outages.push_back(out);
        }
      }
      if (imp.contains("drift")) {
        const auto& dr = imp.at("drift");
        if (dr.contains("cost"))
          cfg.impairments.drift.cost = drift_schedule_from_json(dr.at("cost"));
        if (dr.contains("demand"))
          cfg.impairments.drift.demand = drift_schedule_from_json(dr.at("demand"));
        if (dr.contains("capacity"))
          cfg.impairments.drift.capacity = drift_schedule_from_json(dr.at("capacity"));
        cfg.impairments.drift.summability_check = dr.value("summability_check", false);
      }
    }

    if (raw.contains("init")) {
      const auto& init = raw.at("init");
      const std::string kind = init.value("kind", std::string{"zero"});
      if (kind == "zero") {
        cfg.init.kind = InitKind::Zero;
      } else if (kind == "uniform") {
        cfg.init.kind = InitKind::Uniform;
        cfg.init.low = init.value("low", -1.0);
        cfg.init.high = init.value("high", 1.0);
      } else {
        throw std::runtime_error("config key 'init.kind' must be zero or uniform");
      }
    }

    cfg.lambda_max_override = raw.value("lambda_max", 0.0);
    cfg.parallel = raw.value("parallel", false);
    cfg.threads = raw.value("threads", 0);
    if (raw.contains("admm")) cfg.admm_rho = raw.at("admm").value("rho", 1.0);
    if (raw.contains("gradient_push")) {
      const auto& gp = raw.at("gradient_push");
      cfg.gp_penalty = gp.value("penalty", 10.0);
      if (gp.contains("step")) cfg.gp_step = schedule_from_json(gp.at("step"), "gradient_push.step");
    }

    if (raw.contains("trace")) {
      const auto& tr = raw.at("trace");
      setup.trace_opts.full_iterates = tr.value("full_iterates", false);
      setup.trace_opts.stride = tr.value("stride", 1L);
    }
    if (raw.contains("thresholds")) {
      setup.gap_threshold = raw.at("thresholds").value("gap", 0.1);
      setup.violation_threshold = raw.at("thresholds").value("violation", 0.05);
    }

    if (raw.contains("problem") && raw.contains("generator"))
      throw std::runtime_error("config must name either 'problem' or 'generator', not both");
    if (raw.contains("problem")) {
      std::filesystem::path p = raw.at("problem").get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      auto any = load_problem(p);
      cfg.dag = std::move(any.dag);
      cfg.quad = std::move(any.quad);
    } else if (raw.contains("generator")) {
      auto any = materialize(generator_spec_from_json(raw.at("generator")));
      cfg.dag = std::move(any.dag);
      cfg.quad = std::move(any.quad);
    } else {
      throw std::runtime_error("config needs a 'problem' path or a 'generator' spec");
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("config error: ") + e.what());
  }

  cfg.validate();
  setup.effective = std::move(raw);
  setup.effective["resolved"] = {
      {"alpha", schedule_to_json(cfg.alpha)},
      {"beta", schedule_to_json(cfg.beta)},
      {"max_buffer", cfg.impairments.max_buffer},
      {"iterations", cfg.iterations},
      {"seed", cfg.seed},
      {"algorithm", algorithm_name(cfg.algorithm)},
  };
  return setup;
}

// ---------------------------------------------------------------------------
// Run summary
// ---------------------------------------------------------------------------

inline json make_run_summary(const SimResult& result, const RunSetup& setup) {
  const RunTrace& t = result.trace;
  json s;
  s["algorithm"] = t.algorithm;
  s["variant"] = t.variant;
  s["seed"] = t.seed;
  s["iterations"] = t.iterations;
  const auto kstar = convergence_time(t, setup.gap_threshold, setup.violation_threshold);
  s["thresholds"] = {{"gap", setup.gap_threshold}, {"violation", setup.violation_threshold}};
  if (kstar)
    s["k_star"] = *kstar;
  else
    s["k_star"] = nullptr;
  const TickRecord& last = t.ticks.back();
  s["final_gap"] = last.gap;
  s["final_violation"] = last.violation;
  s["final_ergodic_gap"] = last.ergodic_gap;
  double final_cost = 0.0;
  if (setup.sim.dag)
    final_cost = total_cost(*setup.sim.dag, t.x.back());
  else
    final_cost = setup.sim.quad->objective(t.x.back());
  s["final_cost"] = final_cost;
  s["messages"] = {{"sent", t.total_sent},
                   {"dropped", t.total_dropped},
                   {"delivered", t.total_sent - t.total_dropped}};
  s["lambda_max"] = result.lambda_max;
  if (result.constants)
    s["constants"] = {{"G", result.constants->G},
                      {"D", result.constants->D},
                      {"U", result.constants->U},
                      {"lambda_max", result.constants->lambda_max}};
  if (result.saddle) s["optimal_value"] = result.saddle->optimal_value;
  s["config"] = setup.effective;
  return s;
}

}  // namespace dapdsco
