#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "dapdsco/baselines.hpp"
#include "dapdsco/generator.hpp"
#include "dapdsco/oracles.hpp"
#include "dapdsco/simnet.hpp"

using namespace dapdsco;

namespace {

SimConfig theory_config(SupplyChainProblem p, long K, std::uint64_t seed, double gamma = 0.3,
                        double delay_coeff = 1.0) {
  SimConfig cfg;
  cfg.dag = std::move(p);
  cfg.iterations = K;
  cfg.seed = seed;
  cfg.impairments.delay_coeff = delay_coeff;
  cfg.impairments.delay_exponent = gamma;
  cfg.impairments.max_buffer =
      std::max(1, static_cast<int>(std::ceil(delay_coeff * std::pow(double(K), gamma))));
  return cfg;
}

SimConfig zero_impairment_config(SupplyChainProblem p, long K, std::uint64_t seed) {
  SimConfig cfg;
  cfg.dag = std::move(p);
  cfg.iterations = K;
  cfg.seed = seed;
  cfg.impairments.delay_coeff = 0.0;
  cfg.impairments.max_buffer = 1;
  return cfg;
}

}  // namespace

TEST_CASE("delay cap is zero at the first tick for any model") {
  ImpairmentModel m;
  m.delay_coeff = 5.0;
  m.delay_exponent = 0.0;
  m.max_buffer = 10;
  RngStream st(1, StreamPurpose::PrimalDelay, 0);
  REQUIRE(sample_delay(st, 0, m) == 0);
}

TEST_CASE("delay samples respect the sublinear cap") {
  ImpairmentModel m;
  m.delay_coeff = 1.0;
  m.delay_exponent = 0.3;
  m.max_buffer = 10;
  // ceil(1000^0.3) = 8
  REQUIRE(m.delay_cap(1000) == 8);
  RngStream st(2, StreamPurpose::PrimalDelay, 0);
  long top = 0;
  for (int i = 0; i < 2000; ++i) {
    const long d = sample_delay(st, 1000, m);
    REQUIRE(d >= 0);
    REQUIRE(d <= 8);
    top = std::max(top, d);
  }
  REQUIRE(top == 8);
}

TEST_CASE("the reference experiment delay model stays within five ticks") {
  ImpairmentModel m;
  m.delay_coeff = 5.0;
  m.delay_exponent = 0.0;
  m.max_buffer = 5;
  RngStream st(3, StreamPurpose::PrimalDelay, 0);
  for (long k : {1L, 3L, 10L, 1999L})
    for (int i = 0; i < 200; ++i) REQUIRE(sample_delay(st, k, m) <= std::min(5L, k));
}

TEST_CASE("noise injection is bounded and unbiased") {
  RngStream st(4, StreamPurpose::NoiseCost, 0);
  REQUIRE(inject_noise(st, 3.25, 0.0) == 3.25);
  double worst = 0.0, sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double v = inject_noise(st, 0.0, 0.1);
    worst = std::max(worst, std::abs(v));
    sum += v;
  }
  REQUIRE(worst <= 0.1);
  REQUIRE(std::abs(sum / n) <= 3.0 * 0.1 / std::sqrt(double(n)));
}

TEST_CASE("impairment validation rejects out-of-range parameters") {
  ImpairmentModel m;
  m.delay_exponent = 0.5;
  REQUIRE_THROWS(m.validate());
  m.delay_exponent = 0.3;
  m.loss_rate = 1.0;
  REQUIRE_THROWS(m.validate());
  m.loss_rate = 0.0;
  m.activation_prob = 0.0;
  REQUIRE_THROWS(m.validate());
  m.activation_prob = 1.0;
  m.drift.capacity.knots = {{0.0, 1.0}, {10.0, -0.5}};
  REQUIRE_THROWS(m.validate());
}

TEST_CASE("config validation requires exactly one problem") {
  SimConfig cfg;
  REQUIRE_THROWS(cfg.validate());
  cfg.dag = generate_fig1(1);
  cfg.quad = generate_quadratic_three_tier(1, {});
  REQUIRE_THROWS(cfg.validate());
}

TEST_CASE("zero-impairment asynchronous run equals the synchronous baseline bit for bit") {
  const long K = 400;
  auto cfg = zero_impairment_config(generate_fig1(11), K, 11);
  const auto async_result = run_simulation_full(cfg);
  const auto sync_result = sync_pd_run_full(*cfg.dag, cfg.alpha, cfg.beta, K, cfg.seed, cfg.init);

  REQUIRE(async_result.trace.x.size() == sync_result.trace.x.size());
  for (std::size_t k = 0; k < async_result.trace.x.size(); ++k) {
    REQUIRE(async_result.trace.x[k] == sync_result.trace.x[k]);
    REQUIRE(async_result.trace.lambda[k] == sync_result.trace.lambda[k]);
  }
  TraceWriteOptions full;
  full.full_iterates = true;
  REQUIRE(trace_to_csv(async_result.trace, full) == trace_to_csv(sync_result.trace, full));
}

TEST_CASE("zero-impairment quadratic run equals the synchronous baseline bit for bit") {
  SimConfig cfg;
  cfg.quad = generate_quadratic_three_tier(7, {});
  cfg.iterations = 300;
  cfg.seed = 7;
  cfg.alpha = StepSchedule::constant(0.01);
  cfg.beta = StepSchedule::constant(0.05);
  cfg.init.kind = InitKind::Uniform;
  cfg.impairments.delay_coeff = 0.0;
  cfg.impairments.max_buffer = 1;
  const auto a = run_simulation_full(cfg);
  const auto s =
      sync_pd_run_full(*cfg.quad, cfg.alpha, cfg.beta, cfg.iterations, cfg.seed, cfg.init);
  for (std::size_t k = 0; k < a.trace.x.size(); ++k) {
    REQUIRE(a.trace.x[k] == s.trace.x[k]);
    REQUIRE(a.trace.lambda[k] == s.trace.lambda[k]);
  }
}

TEST_CASE("identical configs replay identical traces, different seeds diverge") {
  auto cfg = theory_config(
      generate_three_tier(5, {.suppliers = 1, .warehouses = 2, .retailers = 3}), 500, 42);
  cfg.impairments.loss_rate = 0.1;
  cfg.impairments.activation_prob = 0.8;
  cfg.impairments.noise_cost = 0.05;
  const auto a = run_simulation_full(cfg);
  const auto b = run_simulation_full(cfg);
  TraceWriteOptions full;
  full.full_iterates = true;
  REQUIRE(trace_to_csv(a.trace, full) == trace_to_csv(b.trace, full));

  cfg.seed = 43;
  const auto c = run_simulation_full(cfg);
  REQUIRE(trace_to_csv(a.trace, full) != trace_to_csv(c.trace, full));
}

TEST_CASE("message accounting is exact under full activation and zero loss") {
  const long K = 250;
  auto cfg = zero_impairment_config(generate_fig1(3), K, 3);
  const auto res = run_simulation_full(cfg);
  REQUIRE(res.trace.total_sent == K * (6 + 4));
  REQUIRE(res.trace.total_dropped == 0);
  for (const auto& tick : res.trace.ticks) REQUIRE(tick.sent == 10);
}

TEST_CASE("message conservation holds tickwise under loss and partial activation") {
  auto cfg = theory_config(generate_fig1(9), 600, 9);
  cfg.impairments.loss_rate = 0.25;
  cfg.impairments.activation_prob = 0.7;
  const auto res = run_simulation_full(cfg);
  long sent = 0, dropped = 0;
  for (const auto& tick : res.trace.ticks) {
    REQUIRE(tick.dropped <= tick.sent);
    REQUIRE(tick.sent <= 10);
    sent += tick.sent;
    dropped += tick.dropped;
  }
  REQUIRE(sent == res.trace.total_sent);
  REQUIRE(dropped == res.trace.total_dropped);
  REQUIRE(dropped > 0);
  REQUIRE(sent < 600 * 10);  // some agents idle
}

TEST_CASE("realized staleness respects the cap when nothing is lost") {
  auto cfg = theory_config(
      generate_three_tier(2, {.suppliers = 1, .warehouses = 2, .retailers = 3}), 800, 2);
  const auto res = run_simulation_full(cfg);
  for (const auto& tick : res.trace.ticks) {
    const long cap = cfg.impairments.delay_cap(tick.k);
    REQUIRE(tick.price_age_max <= cap);
    REQUIRE(tick.flow_age_max <= cap);
  }
}

TEST_CASE("loss can only age reads, never break them") {
  auto cfg = theory_config(generate_fig1(21), 400, 21);
  cfg.impairments.loss_rate = 0.6;
  cfg.impairments.max_buffer = 3;  // tight buffer plus heavy loss forces clamped reads
  const auto res = run_simulation_full(cfg);
  for (const auto& tick : res.trace.ticks) {
    REQUIRE(tick.price_age_max >= 0);
    REQUIRE(std::isfinite(res.trace.x[static_cast<std::size_t>(tick.k)][0]));
  }
}

TEST_CASE("parallel mode reproduces the reference trajectory exactly") {
  auto cfg = theory_config(
      generate_three_tier(13, {.suppliers = 2, .warehouses = 2, .retailers = 4}), 300, 13);
  cfg.impairments.loss_rate = 0.1;
  const auto ref = run_simulation_full(cfg);
  cfg.parallel = true;
  cfg.threads = 4;
  const auto par = run_simulation_full(cfg);
  TraceWriteOptions full;
  full.full_iterates = true;
  REQUIRE(trace_to_csv(ref.trace, full) == trace_to_csv(par.trace, full));
}

TEST_CASE("flows remain in the box and prices nonnegative through impaired runs") {
  auto cfg = theory_config(generate_fig1(31), 700, 31);
  cfg.impairments.loss_rate = 0.2;
  cfg.impairments.noise_cost = 0.2;
  cfg.impairments.noise_demand = 0.2;
  cfg.impairments.activation_prob = 0.6;
  const auto res = run_simulation_full(cfg);
  const auto& p = *cfg.dag;
  for (const auto& xk : res.trace.x)
    for (int e = 0; e < p.num_edges(); ++e) {
      REQUIRE(xk[static_cast<std::size_t>(e)] >= 0.0);
      REQUIRE(xk[static_cast<std::size_t>(e)] <= p.capacity(e));
    }
  for (const auto& lk : res.trace.lambda)
    for (double v : lk) REQUIRE(v >= 0.0);
}

TEST_CASE("a network without retailers degenerates cleanly") {
  std::vector<NodeSpec> nodes{{"S", Tier::Supplier}, {"W", Tier::Warehouse}};
  std::vector<EdgeSpec> edges{{"S", "W", 1.5, 2.0}};
  SupplyChainProblem p(std::move(nodes), std::move(edges), {});
  auto cfg = zero_impairment_config(std::move(p), 50, 1);
  cfg.init.kind = InitKind::Uniform;
  const auto res = run_simulation_full(cfg);
  REQUIRE(res.trace.total_sent == 50 * 1);
  REQUIRE(res.trace.x.back()[0] <= res.trace.x.front()[0]);  // positive cost decays the flow
  REQUIRE(res.trace.ticks.back().gap >= -1e-12);
}

TEST_CASE("quadratic edge costs drive the engine to the stationary allocation") {
  // f(x) = x^2 + x on [0,2], demand 1: x* = 1, price* = 3.
  std::vector<NodeSpec> nodes{{"W", Tier::Warehouse}, {"R", Tier::Retailer}};
  std::vector<EdgeSpec> edges{{"W", "R", 1.0, 2.0, 2.0}};
  SupplyChainProblem p(std::move(nodes), std::move(edges), {{"R", 1.0}});
  auto cfg = theory_config(std::move(p), 20000, 1);
  const auto res = run_simulation_full(cfg);
  REQUIRE_FALSE(res.saddle.has_value());  // greedy oracle is linear-only
  const auto [xbar, lbar] = ergodic_average(res.trace, 20000);
  REQUIRE(std::abs(xbar[0] - 1.0) <= 0.05);
  REQUIRE(std::abs(lbar[0] - 3.0) <= 0.15);
}

TEST_CASE("cost drift shifts the trajectory of an otherwise identical run") {
  auto base = zero_impairment_config(generate_fig1(17), 300, 17);
  const auto plain = run_simulation_full(base);
  base.impairments.drift.cost.knots = {{0.0, 1.0}, {300.0, 1.1}};
  const auto drifted = run_simulation_full(base);
  REQUIRE(plain.trace.x.back() != drifted.trace.x.back());
}

TEST_CASE("capacity drift below zero is rejected up front") {
  auto cfg = zero_impairment_config(generate_fig1(1), 100, 1);
  cfg.impairments.drift.capacity.knots = {{0.0, 1.0}, {50.0, -1.0}};
  REQUIRE_THROWS(run_simulation_full(cfg));
}

TEST_CASE("the drift summability flag rejects non-decaying drift under diminishing steps") {
  auto cfg = theory_config(generate_fig1(2), 2000, 2);
  cfg.impairments.drift.cost.knots = {{0.0, 1.5}, {2000.0, 1.5}};  // permanent offset
  cfg.impairments.drift.summability_check = true;
  REQUIRE_THROWS_WITH(run_simulation_full(cfg), Catch::Matchers::ContainsSubstring("summability"));
  cfg.impairments.drift.summability_check = false;
  REQUIRE_NOTHROW(run_simulation_full(cfg));
}

TEST_CASE("median convergence time degrades as loss increases") {
  // Randomness makes single runs non-monotone; the medians over ten seeds must be.
  const double losses[] = {0.0, 0.1, 0.3};
  std::vector<double> medians;
  for (const double loss : losses) {
    std::vector<double> ks;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      SimConfig cfg;
      cfg.quad = generate_quadratic_three_tier(seed, {});
      cfg.iterations = 2000;
      cfg.seed = seed;
      cfg.alpha = StepSchedule::constant(0.01);
      cfg.beta = StepSchedule::constant(0.05);
      cfg.init.kind = InitKind::Uniform;
      cfg.impairments.delay_coeff = 5.0;
      cfg.impairments.delay_exponent = 0.0;
      cfg.impairments.max_buffer = 5;
      cfg.impairments.loss_rate = loss;
      const auto res = run_simulation_full(cfg);
      const auto kstar = convergence_time(res.trace, 0.1, 0.05);
      ks.push_back(kstar ? double(*kstar) : 4000.0);
    }
    std::sort(ks.begin(), ks.end());
    medians.push_back(0.5 * (ks[4] + ks[5]));
  }
  REQUIRE(medians[0] <= medians[1]);
  REQUIRE(medians[1] <= medians[2]);
}

TEST_CASE("scheduled link outages drop exactly the windowed messages and age reads") {
  auto cfg = zero_impairment_config(generate_fig1(4), 300, 4);
  cfg.impairments.max_buffer = 8;
  LinkOutage out;
  out.price_side = true;  // retailer 0 goes dark
  out.index = 0;
  out.from_tick = 100;
  out.to_tick = 140;
  cfg.impairments.outages.push_back(out);
  const auto res = run_simulation_full(cfg);
  for (const auto& tick : res.trace.ticks) {
    if (out.covers(tick.k)) {
      REQUIRE(tick.dropped == 1);
    } else {
      REQUIRE(tick.dropped == 0);
    }
  }
  // the edge fed by retailer 0 keeps reading its last pre-outage price; the
  // realized age grows through the window (clamped by the buffer depth)
  long max_age = 0;
  for (const auto& tick : res.trace.ticks)
    if (tick.k >= 105 && tick.k < 140) max_age = std::max(max_age, tick.price_age_max);
  REQUIRE(max_age > 1);
  // recovery: fresh prices flow again right after the window
  REQUIRE(res.trace.ticks[150].price_age_max == 0);

  // conservation still holds and the run stays deterministic
  const auto res2 = run_simulation_full(cfg);
  TraceWriteOptions full;
  full.full_iterates = true;
  REQUIRE(trace_to_csv(res.trace, full) == trace_to_csv(res2.trace, full));
}

TEST_CASE("faster-growing delay exponents slow the median convergence") {
  const double gammas[] = {0.0, 0.45};
  std::vector<double> medians;
  for (const double gamma : gammas) {
    std::vector<double> ks;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      SimConfig cfg;
      cfg.quad = generate_quadratic_three_tier(seed, {});
      cfg.iterations = 2000;
      cfg.seed = seed;
      cfg.alpha = StepSchedule::constant(0.01);
      cfg.beta = StepSchedule::constant(0.05);
      cfg.init.kind = InitKind::Uniform;
      cfg.impairments.delay_coeff = 1.0;
      cfg.impairments.delay_exponent = gamma;
      cfg.impairments.max_buffer = 32;
      cfg.impairments.loss_rate = 0.1;
      const auto res = run_simulation_full(cfg);
      const auto kstar = convergence_time(res.trace, 0.1, 0.05);
      ks.push_back(kstar ? double(*kstar) : 4000.0);
    }
    std::sort(ks.begin(), ks.end());
    medians.push_back(0.5 * (ks[4] + ks[5]));
  }
  REQUIRE(medians[0] <= medians[1]);
}

TEST_CASE("saddle-point initialization is a fixed point of the impaired dynamics") {
  auto p = generate_three_tier(8, {.suppliers = 1, .warehouses = 2, .retailers = 3});
  const auto sp = exact_oracle_greedy(p);
  auto cfg = theory_config(std::move(p), 500, 8);
  cfg.init.kind = InitKind::Explicit;
  cfg.init.explicit_x = sp.x_star;
  cfg.init.explicit_lambda = sp.lambda_star;
  const auto res = run_simulation_full(cfg);
  for (const auto& tick : res.trace.ticks) {
    REQUIRE(std::abs(tick.delta_x) <= 1e-12);
    REQUIRE(std::abs(tick.delta_lambda) <= 1e-12);
    REQUIRE(tick.V_pre <= 1e-18);
  }
}
