#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dapdsco/problem.hpp"
#include "dapdsco/rng.hpp"

using namespace dapdsco;

namespace {

// One retailer fed by parallel edges from distinct warehouses.
SupplyChainProblem single_retailer(std::vector<double> costs, std::vector<double> caps,
                                   double demand) {
  std::vector<NodeSpec> nodes{{"R", Tier::Retailer}};
  std::vector<EdgeSpec> edges;
  for (std::size_t i = 0; i < costs.size(); ++i) {
    nodes.push_back({"W" + std::to_string(i), Tier::Warehouse});
    edges.push_back({"W" + std::to_string(i), "R", costs[i], caps[i]});
  }
  return SupplyChainProblem(std::move(nodes), std::move(edges), {{"R", demand}});
}

}  // namespace

TEST_CASE("inbound flow sums the retailer's incoming edges") {
  auto p = single_retailer({1.0, 1.0}, {5.0, 5.0}, 2.0);
  FlowVector x{3.0, 4.0};
  REQUIRE(inbound_flow(p, x, "R") == 7.0);
}

TEST_CASE("retailer with no inbound edges has zero inbound flow") {
  std::vector<NodeSpec> nodes{{"R", Tier::Retailer}, {"Q", Tier::Retailer}, {"W", Tier::Warehouse}};
  std::vector<EdgeSpec> edges{{"W", "Q", 1.0, 5.0}};
  SupplyChainProblem p(std::move(nodes), std::move(edges), {{"R", 1.0}, {"Q", 1.0}});
  FlowVector x{2.0};
  REQUIRE(inbound_flow(p, x, "R") == 0.0);
}

TEST_CASE("two-warehouse layout routes a single inbound flow per retailer") {
  std::vector<NodeSpec> nodes{{"S", Tier::Supplier},  {"W1", Tier::Warehouse},
                              {"W2", Tier::Warehouse}, {"R1", Tier::Retailer},
                              {"R2", Tier::Retailer}};
  std::vector<EdgeSpec> edges{{"S", "W1", 1.0, 10.0},
                              {"S", "W2", 1.0, 10.0},
                              {"W1", "R1", 1.0, 5.0},
                              {"W2", "R2", 1.0, 5.0}};
  SupplyChainProblem p(std::move(nodes), std::move(edges), {{"R1", 2.0}, {"R2", 2.0}});
  FlowVector x{0.0, 0.0, 2.0, 0.0};
  REQUIRE(inbound_flow(p, x, "R1") == 2.0);
}

TEST_CASE("inbound flow rejects unknown and non-retailer nodes") {
  auto p = single_retailer({1.0}, {5.0}, 2.0);
  FlowVector x{1.0};
  REQUIRE_THROWS(inbound_flow(p, x, "nope"));
  REQUIRE_THROWS(inbound_flow(p, x, "W0"));
}

TEST_CASE("lagrangian reduces to pure cost at zero prices") {
  auto p = single_retailer({2.0, 3.0}, {5.0, 5.0}, 4.0);
  FlowVector x{1.0, 2.0};
  PriceVector lam{0.0};
  REQUIRE(lagrangian(p, x, lam) == Catch::Approx(2.0 + 6.0));
}

TEST_CASE("lagrangian at zero flow is the demand-weighted price sum") {
  auto p = single_retailer({2.0, 3.0}, {5.0, 5.0}, 4.0);
  FlowVector x{0.0, 0.0};
  PriceVector lam{1.5};
  REQUIRE(lagrangian(p, x, lam) == Catch::Approx(1.5 * 4.0));
}

TEST_CASE("lagrangian matches the hand-computed single-edge value") {
  auto p = single_retailer({2.0}, {5.0}, 3.0);
  FlowVector x{1.0};
  PriceVector lam{1.0};
  // 2*1 + 1*(3-1) = 4
  REQUIRE(lagrangian(p, x, lam) == Catch::Approx(4.0));
}

TEST_CASE("lagrangian rejects mismatched dimensions") {
  auto p = single_retailer({2.0}, {5.0}, 3.0);
  REQUIRE_THROWS(lagrangian(p, FlowVector{1.0, 2.0}, PriceVector{0.0}));
  REQUIRE_THROWS(lagrangian(p, FlowVector{1.0}, PriceVector{}));
}

TEST_CASE("slater check passes with slack capacity") {
  auto p = single_retailer({1.0, 1.0}, {5.0, 5.0}, 7.0);
  const auto res = slater_check(p);
  REQUIRE(res.strictly_feasible);
  REQUIRE(inbound_flow(p, res.witness, "R") == Catch::Approx(9.99));
}

TEST_CASE("slater check fails when strictness is lost at the boundary") {
  auto p = single_retailer({1.0}, {5.0}, 5.0);
  REQUIRE_FALSE(slater_check(p).strictly_feasible);
}

TEST_CASE("slater check is exact about the 1e-3 shrink") {
  REQUIRE(slater_check(single_retailer({1.0}, {5.0}, 4.994)).strictly_feasible);
  REQUIRE_FALSE(slater_check(single_retailer({1.0}, {5.0}, 4.996)).strictly_feasible);
}

TEST_CASE("quadratic cost value and gradient") {
  const auto f = CostFunction::quadratic_cost(2.0, -1.0);
  REQUIRE(f.value(1.0) == Catch::Approx(0.0));
  REQUIRE(f.gradient(1.0) == Catch::Approx(1.0));
}

TEST_CASE("linear cost has constant gradient") {
  const auto f = CostFunction::linear_cost(3.0);
  REQUIRE(f.gradient(0.0) == 3.0);
  REQUIRE(f.gradient(17.5) == 3.0);
  REQUIRE(f.value(2.0) == Catch::Approx(6.0));
}

TEST_CASE("quadratic gradient agrees with central differences") {
  RngStream st(5, StreamPurpose::Generate, 99);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = CostFunction::quadratic_cost(st.next_uniform(0.1, 3.0),
                                                st.next_uniform(-2.0, 2.0));
    const double x = st.next_uniform(-4.0, 4.0);
    const double fd = (cost_value(f, x + h) - cost_value(f, x - h)) / (2.0 * h);
    REQUIRE(std::abs(fd - cost_gradient(f, x)) <= 1e-6);
  }
}

TEST_CASE("non-positive curvature is rejected") {
  REQUIRE_THROWS(CostFunction::quadratic_cost(0.0, 1.0));
  REQUIRE_THROWS(CostFunction::quadratic_cost(-1.0, 1.0));
}

TEST_CASE("problem construction validates its inputs") {
  SECTION("cycle") {
    std::vector<NodeSpec> nodes{{"A", Tier::Warehouse}, {"B", Tier::Warehouse}};
    std::vector<EdgeSpec> edges{{"A", "B", 1.0, 1.0}, {"B", "A", 1.0, 1.0}};
    REQUIRE_THROWS(SupplyChainProblem(std::move(nodes), std::move(edges), {}));
  }
  SECTION("unknown endpoint") {
    std::vector<NodeSpec> nodes{{"A", Tier::Warehouse}};
    std::vector<EdgeSpec> edges{{"A", "Z", 1.0, 1.0}};
    REQUIRE_THROWS(SupplyChainProblem(std::move(nodes), std::move(edges), {}));
  }
  SECTION("non-positive parameters") {
    REQUIRE_THROWS(single_retailer({0.0}, {5.0}, 1.0));
    REQUIRE_THROWS(single_retailer({1.0}, {0.0}, 1.0));
    REQUIRE_THROWS(single_retailer({1.0}, {5.0}, 0.0));
  }
  SECTION("missing demand") {
    std::vector<NodeSpec> nodes{{"R", Tier::Retailer}};
    REQUIRE_THROWS(SupplyChainProblem(std::move(nodes), {}, {}));
  }
  SECTION("demand on a non-retailer") {
    std::vector<NodeSpec> nodes{{"W", Tier::Warehouse}};
    REQUIRE_THROWS(SupplyChainProblem(std::move(nodes), {}, {{"W", 1.0}}));
  }
}

TEST_CASE("quadratic problem validation") {
  QuadraticProblem q;
  q.quad_coeff = {1.0, 2.0};
  q.lin_coeff = {0.5, -0.5};
  q.constraint = {{1.0, 1.0}};
  q.rhs = {2.0};
  REQUIRE_NOTHROW(q.validate());

  SECTION("all-zero row") {
    q.constraint = {{0.0, 0.0}};
    REQUIRE_THROWS(q.validate());
  }
  SECTION("too many rows") {
    q.constraint = {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
    q.rhs = {1.0, 1.0, 1.0};
    REQUIRE_THROWS(q.validate());
  }
  SECTION("non-positive curvature") {
    q.quad_coeff = {1.0, 0.0};
    REQUIRE_THROWS(q.validate());
  }
}
