#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dapdsco/agents.hpp"
#include "dapdsco/analysis.hpp"
#include "dapdsco/oracles.hpp"
#include "dapdsco/problem.hpp"
#include "dapdsco/rng.hpp"
#include "dapdsco/schedule.hpp"
#include "dapdsco/trace.hpp"

namespace dapdsco {

// Scheduled outage of one sender's outgoing link: messages it emits during
// [from_tick, to_tick) are dropped. Senders are named by role and index:
// flow owners (edges / primal agents) vs price owners (retailers / dual agents).
struct LinkOutage {
  bool price_side = false;
  int index = 0;
  long from_tick = 0;
  long to_tick = 0;

  bool covers(long k) const { return k >= from_tick && k < to_tick; }
};

// Message-layer impairments. The staleness cap at tick k is
// min(tau, ceil(delay_coeff * k^delay_exponent), k); the exponent must stay below
// 1/2 so the cap grows sublinearly in sqrt(k).
struct ImpairmentModel {
  double delay_coeff = 0.0;
  double delay_exponent = 0.3;
  int max_buffer = 8;  // tau
  double loss_rate = 0.0;
  double activation_prob = 1.0;
  double noise_cost = 0.0;
  double noise_demand = 0.0;
  std::vector<LinkOutage> outages;  // deterministic link up/down windows
  DriftConfig drift;

  bool link_down(bool price_side, int index, long k) const {
    for (const auto& o : outages)
      if (o.price_side == price_side && o.index == index && o.covers(k)) return true;
    return false;
  }

  void validate() const {
    if (delay_coeff < 0.0) throw std::invalid_argument("delay_coeff must be >= 0");
    if (!(delay_exponent >= 0.0 && delay_exponent < 0.5))
      throw std::invalid_argument("delay_exponent must lie in [0, 0.5)");
    if (max_buffer < 0) throw std::invalid_argument("max_buffer must be >= 0");
    if (!(loss_rate >= 0.0 && loss_rate < 1.0))
      throw std::invalid_argument("loss_rate must lie in [0, 1)");
    if (!(activation_prob > 0.0 && activation_prob <= 1.0))
      throw std::invalid_argument("activation_prob must lie in (0, 1]");
    if (noise_cost < 0.0 || noise_demand < 0.0)
      throw std::invalid_argument("noise bounds must be >= 0");
    for (const auto& o : outages)
      if (o.index < 0 || o.to_tick < o.from_tick)
        throw std::invalid_argument("link outage window is malformed");
    drift.validate();
    for (const auto& knot : drift.capacity.knots)
      if (knot.second <= 0.0)
        throw std::invalid_argument("capacity drift would drive a capacity to <= 0");
    for (const auto& knot : drift.cost.knots)
      if (knot.second <= 0.0)
        throw std::invalid_argument("cost drift would drive a cost to <= 0");
  }

  long delay_cap(long k) const {
    if (k <= 0 || delay_coeff <= 0.0) return 0;
    const long cap =
        static_cast<long>(std::ceil(delay_coeff * std::pow(static_cast<double>(k), delay_exponent)));
    return std::min({static_cast<long>(max_buffer), cap, k});
  }
};

inline long sample_delay(RngStream& stream, long k, const ImpairmentModel& m) {
  if (k < 0) throw std::invalid_argument("sample_delay: k must be >= 0");
  const long cap = m.delay_cap(k);
  return cap > 0 ? static_cast<long>(stream.next_below(static_cast<std::uint64_t>(cap) + 1)) : 0;
}

// Bounded observation noise: value + U(-sigma, sigma). sigma = 0 leaves the value
// (and the stream) untouched.
inline double inject_noise(RngStream& stream, double value, double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("noise bound must be >= 0");
  if (sigma == 0.0) return value;
  return value + stream.next_uniform(-sigma, sigma);
}

enum class Algorithm { Dapdsco, SyncPd, Admm, GradientPush };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Dapdsco: return "dapdsco";
    case Algorithm::SyncPd: return "sync_pd";
    case Algorithm::Admm: return "admm";
    default: return "gradient_push";
  }
}

inline Algorithm algorithm_from_name(const std::string& s) {
  if (s == "dapdsco") return Algorithm::Dapdsco;
  if (s == "sync_pd") return Algorithm::SyncPd;
  if (s == "admm") return Algorithm::Admm;
  if (s == "gradient_push") return Algorithm::GradientPush;
  throw std::invalid_argument("unknown algorithm: " + s);
}

enum class InitKind { Zero, Uniform, Explicit };

struct InitSpec {
  InitKind kind = InitKind::Zero;
  double low = -1.0;
  double high = 1.0;
  std::vector<double> explicit_x;       // InitKind::Explicit only
  std::vector<double> explicit_lambda;  // optional; zero duals otherwise
};

struct SimConfig {
  std::optional<SupplyChainProblem> dag;
  std::optional<QuadraticProblem> quad;
  Algorithm algorithm = Algorithm::Dapdsco;
  long iterations = 1000;
  std::uint64_t seed = 1;
  StepSchedule alpha = StepSchedule::diminishing();
  StepSchedule beta = StepSchedule::diminishing();
  ImpairmentModel impairments;
  InitSpec init;
  double lambda_max_override = 0.0;  // 0 -> derived from the oracle saddle point
  bool parallel = false;
  int threads = 0;  // 0 -> hardware concurrency
  std::string preset;

  double admm_rho = 1.0;
  double gp_penalty = 10.0;
  StepSchedule gp_step = StepSchedule::diminishing(0.05, 0.5);

  void validate() const {
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (dag.has_value() == quad.has_value())
      throw std::invalid_argument("config must reference exactly one problem");
    impairments.validate();
    if (quad.has_value()) {
      quad->validate();
      if (!impairments.drift.capacity.is_identity())
        throw std::invalid_argument("capacity drift does not apply to the quadratic variant");
    }
    if (init.kind == InitKind::Uniform && !(init.low < init.high))
      throw std::invalid_argument("init range is empty");
    if (admm_rho <= 0.0) throw std::invalid_argument("admm rho must be > 0");
    if (gp_penalty <= 0.0) throw std::invalid_argument("gradient-push penalty must be > 0");
  }
};

inline std::vector<double> initial_flows(const SupplyChainProblem& p, const InitSpec& init,
                                         std::uint64_t seed) {
  std::vector<double> x(static_cast<std::size_t>(p.num_edges()), 0.0);
  if (init.kind == InitKind::Uniform) {
    for (int e = 0; e < p.num_edges(); ++e) {
      RngStream st(seed, StreamPurpose::Init, static_cast<std::uint64_t>(e));
      x[static_cast<std::size_t>(e)] =
          std::clamp(st.next_uniform(init.low, init.high), 0.0, p.capacity(e));
    }
  } else if (init.kind == InitKind::Explicit) {
    if (init.explicit_x.size() != x.size())
      throw std::invalid_argument("explicit init has wrong flow dimension");
    x = init.explicit_x;
  }
  return x;
}

inline std::vector<double> initial_prices(const SupplyChainProblem& p, const InitSpec& init) {
  std::vector<double> l(static_cast<std::size_t>(p.num_retailers()), 0.0);
  if (init.kind == InitKind::Explicit && !init.explicit_lambda.empty()) {
    if (init.explicit_lambda.size() != l.size())
      throw std::invalid_argument("explicit init has wrong price dimension");
    l = init.explicit_lambda;
  }
  return l;
}

inline std::vector<double> initial_primal(const QuadraticProblem& q, const InitSpec& init,
                                          std::uint64_t seed) {
  std::vector<double> x(static_cast<std::size_t>(q.n_agents()), 0.0);
  if (init.kind == InitKind::Uniform) {
    for (int i = 0; i < q.n_agents(); ++i) {
      RngStream st(seed, StreamPurpose::Init, static_cast<std::uint64_t>(i));
      x[static_cast<std::size_t>(i)] = st.next_uniform(init.low, init.high);
    }
  } else if (init.kind == InitKind::Explicit) {
    if (init.explicit_x.size() != x.size())
      throw std::invalid_argument("explicit init has wrong dimension");
    x = init.explicit_x;
  }
  return x;
}

inline std::vector<double> initial_duals(const QuadraticProblem& q, const InitSpec& init) {
  std::vector<double> l(static_cast<std::size_t>(q.n_constraints()), 0.0);
  if (init.kind == InitKind::Explicit && !init.explicit_lambda.empty()) {
    if (init.explicit_lambda.size() != l.size())
      throw std::invalid_argument("explicit init has wrong dual dimension");
    l = init.explicit_lambda;
  }
  return l;
}

struct SimResult {
  RunTrace trace;
  std::optional<SaddlePoint> saddle;
  std::optional<TheoryConstants> constants;
  double lambda_max = 0.0;
  // Gradient push only: each agent's final ratio estimate of the full vector.
  std::vector<std::vector<double>> agent_estimates;
};

namespace detail {

inline void run_chunked(bool parallel, int threads, int n, const std::function<void(int)>& work) {
  if (!parallel || n < 2) {
    for (int i = 0; i < n; ++i) work(i);
    return;
  }
  int t = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  t = std::max(1, std::min(t, n));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(t));
  for (int c = 0; c < t; ++c) {
    const int lo = n * c / t;
    const int hi = n * (c + 1) / t;
    pool.emplace_back([&, lo, hi] {
      for (int i = lo; i < hi; ++i) work(i);
    });
  }
  for (auto& th : pool) th.join();
}

// Pre-run enforcement of the drift summability precondition: when the flag is on,
// the weighted deviation series for cost and demand drift must plateau within the
// run horizon.
inline void enforce_drift_summability(const SimConfig& cfg, double cost_mag, double demand_mag) {
  if (!cfg.impairments.drift.summability_check) return;
  const auto check = [&](const DriftSchedule& d, double mag, const char* what) {
    if (d.is_identity()) return;
    const auto rep = drift_series_check(cfg.alpha, d, mag, cfg.iterations);
    if (!rep.summable)
      throw std::invalid_argument(std::string("drift summability check failed for ") + what +
                                  ": tail increment " + std::to_string(rep.tail_increment));
  };
  check(cfg.impairments.drift.cost, cost_mag, "cost");
  check(cfg.impairments.drift.demand, demand_mag, "demand");
}

inline SimResult run_dag_async(const SimConfig& cfg) {
  const SupplyChainProblem& p = *cfg.dag;
  const ImpairmentModel& imp = cfg.impairments;
  const long K = cfg.iterations;
  const int ne = p.num_edges();
  const int nr = p.num_retailers();
  const int tau = imp.max_buffer;

  double cost_mag = 0.0, demand_mag = 0.0;
  for (int e = 0; e < ne; ++e) cost_mag = std::max(cost_mag, p.cost(e));
  for (int r = 0; r < nr; ++r) demand_mag = std::max(demand_mag, p.demand(r));
  enforce_drift_summability(cfg, cost_mag, demand_mag);

  // Exact solution and envelope constants up front: infeasible instances fail
  // before tick 0, and annotation reuses them afterwards.
  std::optional<SaddlePoint> saddle;
  std::optional<TheoryConstants> constants;
  if (!p.has_quadratic_costs()) {
    saddle = exact_oracle_greedy(p);
    constants = TheoryConstants::compute(p, *saddle, cfg.lambda_max_override);
  }

  const auto x0 = initial_flows(p, cfg.init, cfg.seed);
  const auto l0 = initial_prices(p, cfg.init);

  std::vector<EdgeAgentState> edge_agents;
  edge_agents.reserve(static_cast<std::size_t>(ne));
  for (int e = 0; e < ne; ++e) {
    const int r = p.edge_retailer(e);
    const double price0 = r >= 0 ? l0[static_cast<std::size_t>(r)] : 0.0;
    edge_agents.emplace_back(e, p.edge_cost_fn(e), p.capacity(e), x0[static_cast<std::size_t>(e)],
                             tau, price0);
  }
  std::vector<RetailerAgentState> retailer_agents(static_cast<std::size_t>(nr));
  for (int r = 0; r < nr; ++r) {
    auto& ag = retailer_agents[static_cast<std::size_t>(r)];
    ag.retailer = r;
    ag.demand = p.demand(r);
    ag.price = l0[static_cast<std::size_t>(r)];
    for (int e : p.inbound_edges(r))
      ag.flow_buffers.emplace_back(tau, x0[static_cast<std::size_t>(e)]);
  }
  // Edge position within its retailer's inbound list, for buffer addressing.
  std::vector<int> edge_slot(static_cast<std::size_t>(ne), -1);
  for (int r = 0; r < nr; ++r) {
    const auto& in = p.inbound_edges(r);
    for (std::size_t j = 0; j < in.size(); ++j)
      edge_slot[static_cast<std::size_t>(in[j])] = static_cast<int>(j);
  }

  std::vector<RngStream> act_e, delay_e, loss_e, noise_e, act_r, loss_r, noise_r;
  for (int e = 0; e < ne; ++e) {
    const auto uid = static_cast<std::uint64_t>(e);
    act_e.emplace_back(cfg.seed, StreamPurpose::Activation, uid);
    delay_e.emplace_back(cfg.seed, StreamPurpose::PrimalDelay, uid);
    loss_e.emplace_back(cfg.seed, StreamPurpose::Loss, uid);
    noise_e.emplace_back(cfg.seed, StreamPurpose::NoiseCost, uid);
  }
  std::vector<std::vector<RngStream>> delay_r(static_cast<std::size_t>(nr));
  for (int r = 0; r < nr; ++r) {
    const auto uid = static_cast<std::uint64_t>(ne + r);
    act_r.emplace_back(cfg.seed, StreamPurpose::Activation, uid);
    loss_r.emplace_back(cfg.seed, StreamPurpose::Loss, uid);
    noise_r.emplace_back(cfg.seed, StreamPurpose::NoiseDemand, uid);
    for (int e : p.inbound_edges(r))
      delay_r[static_cast<std::size_t>(r)].emplace_back(cfg.seed, StreamPurpose::DualDelay, uid,
                                                        static_cast<std::uint64_t>(e));
  }

  RunTrace t;
  t.algorithm = algorithm_name(Algorithm::Dapdsco);
  t.variant = "supply_chain";
  t.seed = cfg.seed;
  t.iterations = K;
  t.x0 = x0;
  t.lambda0 = l0;
  t.x.reserve(static_cast<std::size_t>(K));
  t.lambda.reserve(static_cast<std::size_t>(K));
  t.ticks.reserve(static_cast<std::size_t>(K));

  std::vector<double> cum_alpha(static_cast<std::size_t>(K) + 1, 0.0);
  std::vector<double> cum_beta(static_cast<std::size_t>(K) + 1, 0.0);

  std::vector<double> edge_msg(static_cast<std::size_t>(ne), 0.0);
  std::vector<std::uint8_t> edge_sendf(static_cast<std::size_t>(ne), 0);
  std::vector<std::uint8_t> edge_dropf(static_cast<std::size_t>(ne), 0);
  std::vector<long> edge_age(static_cast<std::size_t>(ne), -1);
  std::vector<double> ret_msg(static_cast<std::size_t>(nr), 0.0);
  std::vector<std::uint8_t> ret_sendf(static_cast<std::size_t>(nr), 0);
  std::vector<std::uint8_t> ret_dropf(static_cast<std::size_t>(nr), 0);
  std::vector<long> ret_age(static_cast<std::size_t>(nr), -1);
  std::vector<double> delayed_flows;

  for (long k = 0; k < K; ++k) {
    const double ak = cfg.alpha.at(k);
    const double bk = cfg.beta.at(k);
    cum_alpha[static_cast<std::size_t>(k) + 1] = cum_alpha[static_cast<std::size_t>(k)] + ak;
    cum_beta[static_cast<std::size_t>(k) + 1] = cum_beta[static_cast<std::size_t>(k)] + bk;
    const double fc = imp.drift.cost.factor_at(static_cast<double>(k));
    const double fd = imp.drift.demand.factor_at(static_cast<double>(k));
    const double fu = imp.drift.capacity.factor_at(static_cast<double>(k));

    auto edge_work = [&](int e) {
      const auto ei = static_cast<std::size_t>(e);
      edge_sendf[ei] = 0;
      edge_age[ei] = -1;
      EdgeAgentState& ag = edge_agents[ei];
      if (!act_e[ei].next_bernoulli(imp.activation_prob)) {
        ++ag.iteration;
        return;
      }
      const CostFunction base = p.edge_cost_fn(e);
      ag.cost.kind = base.kind;
      ag.cost.curvature = base.curvature * fc;
      ag.cost.linear = inject_noise(noise_e[ei], base.linear * fc, imp.noise_cost);
      const double cap_k = p.capacity(e) * fu;
      if (cap_k <= 0.0) throw std::runtime_error("capacity drift drove a capacity to <= 0");
      ag.capacity = cap_k;
      double price = 0.0;
      if (p.edge_retailer(e) >= 0) {
        const long delta = sample_delay(delay_e[ei], k, imp);
        const auto rd = edge_read_delayed_price(ag, delta);
        price = rd.value;
        edge_age[ei] = rd.effective_age;
      } else {
        edge_age[ei] = 0;
      }
      edge_update(ag, price, ak);
      edge_msg[ei] = ag.flow;
      edge_sendf[ei] = 1;
      const bool lost = loss_e[ei].next_bernoulli(imp.loss_rate);
      edge_dropf[ei] = (lost || imp.link_down(false, e, k)) ? 1 : 0;
    };

    auto retailer_work = [&](int r) {
      const auto ri = static_cast<std::size_t>(r);
      ret_sendf[ri] = 0;
      ret_age[ri] = -1;
      RetailerAgentState& ag = retailer_agents[ri];
      if (!act_r[ri].next_bernoulli(imp.activation_prob)) {
        ++ag.iteration;
        return;
      }
      const auto& in = p.inbound_edges(r);
      std::vector<double> flows(in.size());
      long age = 0;
      for (std::size_t j = 0; j < in.size(); ++j) {
        const long delta = sample_delay(delay_r[ri][j], k, imp);
        const auto rd = ag.flow_buffers[j].read(k, delta);
        flows[j] = rd.value;
        age = std::max(age, rd.effective_age);
      }
      ret_age[ri] = age;
      ag.demand = inject_noise(noise_r[ri], p.demand(r) * fd, imp.noise_demand);
      retailer_update(ag, flows, bk);
      ret_msg[ri] = ag.price;
      ret_sendf[ri] = 1;
      const bool lost = loss_r[ri].next_bernoulli(imp.loss_rate);
      ret_dropf[ri] = (lost || imp.link_down(true, r, k)) ? 1 : 0;
    };

    run_chunked(cfg.parallel, cfg.threads, ne, edge_work);
    run_chunked(cfg.parallel, cfg.threads, nr, retailer_work);

    // Delivery barrier: messages land in destination buffers stamped with the
    // post-update iterate index, never visible to reads within this tick.
    TickRecord rec;
    rec.k = k;
    rec.alpha = ak;
    rec.beta = bk;
    for (int e = 0; e < ne; ++e) {
      const auto ei = static_cast<std::size_t>(e);
      if (!edge_sendf[ei]) continue;
      ++rec.sent;
      if (edge_dropf[ei]) {
        ++rec.dropped;
        continue;
      }
      const int r = p.edge_retailer(e);
      if (r >= 0)
        retailer_agents[static_cast<std::size_t>(r)]
            .flow_buffers[static_cast<std::size_t>(edge_slot[ei])]
            .store(k + 1, edge_msg[ei]);
    }
    for (int r = 0; r < nr; ++r) {
      const auto ri = static_cast<std::size_t>(r);
      if (!ret_sendf[ri]) continue;
      ++rec.sent;
      if (ret_dropf[ri]) {
        ++rec.dropped;
        continue;
      }
      for (int e : p.inbound_edges(r))
        edge_agents[static_cast<std::size_t>(e)].price_buffer.store(k + 1, ret_msg[ri]);
    }

    long dmax = 0, Dmax = 0;
    for (long a : edge_age) dmax = std::max(dmax, a);
    for (long a : ret_age) Dmax = std::max(Dmax, a);
    rec.price_age_max = dmax;
    rec.flow_age_max = Dmax;
    rec.S = cum_beta[static_cast<std::size_t>(k)] - cum_beta[static_cast<std::size_t>(k - dmax)];
    rec.T = cum_alpha[static_cast<std::size_t>(k)] - cum_alpha[static_cast<std::size_t>(k - Dmax)];
    t.total_sent += rec.sent;
    t.total_dropped += rec.dropped;
    t.ticks.push_back(rec);

    std::vector<double> xk(static_cast<std::size_t>(ne));
    for (int e = 0; e < ne; ++e) xk[static_cast<std::size_t>(e)] = edge_agents[static_cast<std::size_t>(e)].flow;
    std::vector<double> lk(static_cast<std::size_t>(nr));
    for (int r = 0; r < nr; ++r) lk[static_cast<std::size_t>(r)] = retailer_agents[static_cast<std::size_t>(r)].price;
    t.x.push_back(std::move(xk));
    t.lambda.push_back(std::move(lk));
  }

  SimResult result;
  result.trace = std::move(t);
  result.saddle = std::move(saddle);
  result.constants = std::move(constants);
  result.lambda_max = result.constants ? result.constants->lambda_max : cfg.lambda_max_override;
  AnnotationInputs ann;
  ann.dag = &p;
  ann.saddle = result.saddle ? &*result.saddle : nullptr;
  ann.constants = result.constants ? &*result.constants : nullptr;
  ann.lambda_max = result.lambda_max;
  annotate_trace(result.trace, ann);
  return result;
}

inline SimResult run_quad_async(const SimConfig& cfg) {
  const QuadraticProblem& q = *cfg.quad;
  const ImpairmentModel& imp = cfg.impairments;
  const long K = cfg.iterations;
  const int n = q.n_agents();
  const int m = q.n_constraints();
  const int tau = imp.max_buffer;

  double cost_mag = 0.0, demand_mag = 0.0;
  for (double c : q.quad_coeff) cost_mag = std::max(cost_mag, std::abs(c));
  for (double b : q.rhs) demand_mag = std::max(demand_mag, std::abs(b));
  enforce_drift_summability(cfg, cost_mag, demand_mag);

  // Singular instances fail before tick 0.
  SaddlePoint saddle = exact_oracle_kkt(q);

  // Nonzero pattern: which rows read each primal agent, which columns each row reads.
  std::vector<std::vector<int>> col_rows(static_cast<std::size_t>(n));
  std::vector<std::vector<int>> row_cols(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r)
    for (int i = 0; i < n; ++i)
      if (q.constraint[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] != 0.0) {
        col_rows[static_cast<std::size_t>(i)].push_back(r);
        row_cols[static_cast<std::size_t>(r)].push_back(i);
      }

  const auto x0 = initial_primal(q, cfg.init, cfg.seed);
  const auto l0 = initial_duals(q, cfg.init);

  std::vector<double> x = x0, lam = l0;
  // Buffers: per primal agent one price buffer per touching row; per dual agent one
  // flow buffer per touching column.
  std::vector<std::vector<StalenessBuffer>> price_buf(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int r : col_rows[static_cast<std::size_t>(i)])
      price_buf[static_cast<std::size_t>(i)].emplace_back(tau, l0[static_cast<std::size_t>(r)]);
  std::vector<std::vector<StalenessBuffer>> flow_buf(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r)
    for (int i : row_cols[static_cast<std::size_t>(r)])
      flow_buf[static_cast<std::size_t>(r)].emplace_back(tau, x0[static_cast<std::size_t>(i)]);

  std::vector<RngStream> act_p, loss_p, noise_p, act_d, loss_d, noise_d;
  std::vector<std::vector<RngStream>> delay_p(static_cast<std::size_t>(n)),
      delay_d(static_cast<std::size_t>(m));
  for (int i = 0; i < n; ++i) {
    const auto uid = static_cast<std::uint64_t>(i);
    act_p.emplace_back(cfg.seed, StreamPurpose::Activation, uid);
    loss_p.emplace_back(cfg.seed, StreamPurpose::Loss, uid);
    noise_p.emplace_back(cfg.seed, StreamPurpose::NoiseCost, uid);
    for (int r : col_rows[static_cast<std::size_t>(i)])
      delay_p[static_cast<std::size_t>(i)].emplace_back(cfg.seed, StreamPurpose::PrimalDelay, uid,
                                                        static_cast<std::uint64_t>(r));
  }
  for (int r = 0; r < m; ++r) {
    const auto uid = static_cast<std::uint64_t>(n + r);
    act_d.emplace_back(cfg.seed, StreamPurpose::Activation, uid);
    loss_d.emplace_back(cfg.seed, StreamPurpose::Loss, uid);
    noise_d.emplace_back(cfg.seed, StreamPurpose::NoiseDemand, uid);
    for (int i : row_cols[static_cast<std::size_t>(r)])
      delay_d[static_cast<std::size_t>(r)].emplace_back(cfg.seed, StreamPurpose::DualDelay, uid,
                                                        static_cast<std::uint64_t>(i));
  }

  RunTrace t;
  t.algorithm = algorithm_name(Algorithm::Dapdsco);
  t.variant = "quadratic";
  t.seed = cfg.seed;
  t.iterations = K;
  t.x0 = x0;
  t.lambda0 = l0;

  std::vector<double> cum_alpha(static_cast<std::size_t>(K) + 1, 0.0);
  std::vector<double> cum_beta(static_cast<std::size_t>(K) + 1, 0.0);

  std::vector<double> newx(static_cast<std::size_t>(n));
  std::vector<double> newlam(static_cast<std::size_t>(m));
  std::vector<std::uint8_t> p_send(static_cast<std::size_t>(n), 0), p_drop(static_cast<std::size_t>(n), 0);
  std::vector<std::uint8_t> d_send(static_cast<std::size_t>(m), 0), d_drop(static_cast<std::size_t>(m), 0);
  std::vector<long> p_age(static_cast<std::size_t>(n), -1), d_age(static_cast<std::size_t>(m), -1);

  for (long k = 0; k < K; ++k) {
    const double ak = cfg.alpha.at(k);
    const double bk = cfg.beta.at(k);
    cum_alpha[static_cast<std::size_t>(k) + 1] = cum_alpha[static_cast<std::size_t>(k)] + ak;
    cum_beta[static_cast<std::size_t>(k) + 1] = cum_beta[static_cast<std::size_t>(k)] + bk;
    const double fc = imp.drift.cost.factor_at(static_cast<double>(k));
    const double fd = imp.drift.demand.factor_at(static_cast<double>(k));

    auto primal_work = [&](int i) {
      const auto ii = static_cast<std::size_t>(i);
      p_send[ii] = 0;
      p_age[ii] = -1;
      if (!act_p[ii].next_bernoulli(imp.activation_prob)) {
        newx[ii] = x[ii];
        return;
      }
      double ci = q.quad_coeff[ii] * fc;
      double di = q.lin_coeff[ii] * fc;
      if (imp.noise_cost > 0.0) {
        ci = inject_noise(noise_p[ii], ci, imp.noise_cost);
        di = inject_noise(noise_p[ii], di, imp.noise_cost);
      }
      double g = ci * x[ii] + di;
      long age = 0;
      const auto& rows = col_rows[ii];
      for (std::size_t j = 0; j < rows.size(); ++j) {
        const long delta = sample_delay(delay_p[ii][j], k, imp);
        const auto rd = price_buf[ii][j].read(k, delta);
        age = std::max(age, rd.effective_age);
        g += q.constraint[static_cast<std::size_t>(rows[j])][ii] * rd.value;
      }
      p_age[ii] = age;
      newx[ii] = x[ii] - ak * g;
      p_send[ii] = 1;
      const bool lost = loss_p[ii].next_bernoulli(imp.loss_rate);
      p_drop[ii] = (lost || imp.link_down(false, i, k)) ? 1 : 0;
    };

    auto dual_work = [&](int r) {
      const auto ri = static_cast<std::size_t>(r);
      d_send[ri] = 0;
      d_age[ri] = -1;
      if (!act_d[ri].next_bernoulli(imp.activation_prob)) {
        newlam[ri] = lam[ri];
        return;
      }
      const double br = inject_noise(noise_d[ri], q.rhs[ri] * fd, imp.noise_demand);
      double res = -br;
      long age = 0;
      const auto& cols = row_cols[ri];
      for (std::size_t j = 0; j < cols.size(); ++j) {
        const long delta = sample_delay(delay_d[ri][j], k, imp);
        const auto rd = flow_buf[ri][j].read(k, delta);
        age = std::max(age, rd.effective_age);
        res += q.constraint[ri][static_cast<std::size_t>(cols[j])] * rd.value;
      }
      d_age[ri] = age;
      newlam[ri] = lam[ri] + bk * res;
      d_send[ri] = 1;
      const bool lost = loss_d[ri].next_bernoulli(imp.loss_rate);
      d_drop[ri] = (lost || imp.link_down(true, r, k)) ? 1 : 0;
    };

    run_chunked(cfg.parallel, cfg.threads, n, primal_work);
    run_chunked(cfg.parallel, cfg.threads, m, dual_work);

    x = newx;
    lam = newlam;

    TickRecord rec;
    rec.k = k;
    rec.alpha = ak;
    rec.beta = bk;
    for (int i = 0; i < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      if (!p_send[ii]) continue;
      ++rec.sent;
      if (p_drop[ii]) {
        ++rec.dropped;
        continue;
      }
      for (int r : col_rows[ii]) {
        const auto ri = static_cast<std::size_t>(r);
        const auto& cols = row_cols[ri];
        for (std::size_t j = 0; j < cols.size(); ++j)
          if (cols[j] == i) flow_buf[ri][j].store(k + 1, x[ii]);
      }
    }
    for (int r = 0; r < m; ++r) {
      const auto ri = static_cast<std::size_t>(r);
      if (!d_send[ri]) continue;
      ++rec.sent;
      if (d_drop[ri]) {
        ++rec.dropped;
        continue;
      }
      for (int i : row_cols[ri]) {
        const auto ii = static_cast<std::size_t>(i);
        const auto& rows = col_rows[ii];
        for (std::size_t j = 0; j < rows.size(); ++j)
          if (rows[j] == r) price_buf[ii][j].store(k + 1, lam[ri]);
      }
    }

    long dmax = 0, Dmax = 0;
    for (long a : p_age) dmax = std::max(dmax, a);
    for (long a : d_age) Dmax = std::max(Dmax, a);
    rec.price_age_max = dmax;
    rec.flow_age_max = Dmax;
    rec.S = cum_beta[static_cast<std::size_t>(k)] - cum_beta[static_cast<std::size_t>(k - dmax)];
    rec.T = cum_alpha[static_cast<std::size_t>(k)] - cum_alpha[static_cast<std::size_t>(k - Dmax)];
    t.total_sent += rec.sent;
    t.total_dropped += rec.dropped;
    t.ticks.push_back(rec);
    t.x.push_back(x);
    t.lambda.push_back(lam);
  }

  SimResult result;
  result.trace = std::move(t);
  result.saddle = std::move(saddle);
  result.lambda_max = cfg.lambda_max_override > 0.0
                          ? cfg.lambda_max_override
                          : 2.0 * std::max(1.0, norm2(result.saddle->lambda_star));
  AnnotationInputs ann;
  ann.quad = &q;
  ann.saddle = &*result.saddle;
  ann.lambda_max = result.lambda_max;
  annotate_trace(result.trace, ann);
  return result;
}

}  // namespace detail

inline SimResult run_simulation_full(const SimConfig& cfg) {
  cfg.validate();
  if (cfg.algorithm != Algorithm::Dapdsco)
    throw std::invalid_argument("run_simulation drives the asynchronous engine only");
  return cfg.dag ? detail::run_dag_async(cfg) : detail::run_quad_async(cfg);
}

inline RunTrace run_simulation(const SimConfig& cfg) { return run_simulation_full(cfg).trace; }

}  // namespace dapdsco
