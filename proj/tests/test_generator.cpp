#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dapdsco/generator.hpp"
#include "dapdsco/oracles.hpp"
#include "dapdsco/problem.hpp"

using namespace dapdsco;

TEST_CASE("three-tier generator produces the documented shape") {
  const auto p = generate_three_tier(42, {.suppliers = 2, .warehouses = 3, .retailers = 5});
  REQUIRE(p.num_nodes() == 10);
  REQUIRE(p.num_edges() == 2 * 3 + 3 * 5);
  REQUIRE(p.num_retailers() == 5);
}

TEST_CASE("three-tier generation is reproducible for a fixed seed") {
  const auto a = generate_three_tier(7, {});
  const auto b = generate_three_tier(7, {});
  REQUIRE(a.num_edges() == b.num_edges());
  for (int e = 0; e < a.num_edges(); ++e) {
    REQUIRE(a.cost(e) == b.cost(e));
    REQUIRE(a.capacity(e) == b.capacity(e));
  }
  for (int r = 0; r < a.num_retailers(); ++r) REQUIRE(a.demand(r) == b.demand(r));

  const auto c = generate_three_tier(8, {});
  bool any_diff = false;
  for (int e = 0; e < a.num_edges() && !any_diff; ++e) any_diff = a.cost(e) != c.cost(e);
  REQUIRE(any_diff);
}

TEST_CASE("every generated instance is strictly feasible") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto p = generate_three_tier(seed, {.suppliers = 2, .warehouses = 2, .retailers = 4});
    REQUIRE(slater_check(p).strictly_feasible);
  }
}

TEST_CASE("generated costs and demands respect their ranges") {
  const ThreeTierOptions opt{.suppliers = 2, .warehouses = 3, .retailers = 5};
  const auto p = generate_three_tier(11, opt);
  for (int e = 0; e < p.num_edges(); ++e) {
    REQUIRE(p.cost(e) >= opt.cost_range.first);
    REQUIRE(p.cost(e) <= opt.cost_range.second);
  }
  for (int r = 0; r < p.num_retailers(); ++r) {
    REQUIRE(p.demand(r) > 0.0);
    REQUIRE(p.demand(r) <= opt.demand_range.second);
    REQUIRE(p.inbound_capacity(r) == Catch::Approx(1.5 * p.demand(r)));
  }
}

TEST_CASE("generator rejects empty ranges and bad counts") {
  REQUIRE_THROWS(generate_three_tier(1, {.cost_range = {2.0, 2.0}}));
  REQUIRE_THROWS(generate_three_tier(1, {.demand_range = {1.0, 0.5}}));
  REQUIRE_THROWS(generate_three_tier(1, {.suppliers = 0}));
  REQUIRE_THROWS(generate_quadratic_three_tier(1, {.retailers = 0}));
}

TEST_CASE("fig1 layout has seven nodes and six edges") {
  const auto p = generate_fig1(5);
  REQUIRE(p.num_nodes() == 7);
  REQUIRE(p.num_edges() == 6);
  REQUIRE(p.num_retailers() == 4);
  REQUIRE(slater_check(p).strictly_feasible);
  // every retailer has exactly one inbound edge
  for (int r = 0; r < p.num_retailers(); ++r) REQUIRE(p.inbound_edges(r).size() == 1);
}

TEST_CASE("quadratic generator produces a solvable normalized system") {
  const auto q = generate_quadratic_three_tier(3, {});
  REQUIRE(q.n_agents() == 10);
  REQUIRE(q.n_constraints() == 8);
  for (const auto& row : q.constraint) {
    double nrm = 0.0;
    for (double v : row) nrm += v * v;
    REQUIRE(std::sqrt(nrm) == Catch::Approx(1.0));
  }
  REQUIRE_NOTHROW(exact_oracle_kkt(q));
}

TEST_CASE("quadratic generator is reproducible") {
  const auto a = generate_quadratic_three_tier(9, {});
  const auto b = generate_quadratic_three_tier(9, {});
  REQUIRE(a.quad_coeff == b.quad_coeff);
  REQUIRE(a.lin_coeff == b.lin_coeff);
  REQUIRE(a.rhs == b.rhs);
  REQUIRE(a.constraint == b.constraint);
}
