#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "dapdsco/agents.hpp"
#include "dapdsco/schedule.hpp"

using namespace dapdsco;

TEST_CASE("buffer reads are defined from tick zero via the pre-fill") {
  StalenessBuffer b(4, 1.25);
  const auto r = b.read(0, 3);
  REQUIRE(r.value == 1.25);
  REQUIRE(r.effective_age == 0);
}

TEST_CASE("buffer returns the newest entry no younger than the request") {
  StalenessBuffer b(4, 0.0);
  b.store(5, 1.0);
  b.store(6, 1.2);
  const auto r = b.read(8, 2);
  REQUIRE(r.value == 1.2);
  REQUIRE(r.effective_age == 2);
}

TEST_CASE("buffer clamps to the oldest retained entry and reports the real age") {
  StalenessBuffer b(10, 0.5);
  b.store(3, 0.7);
  // stamp 0 is still retained; request newer-than-3 minus 2 -> stamp 3 wins.
  const auto r = b.read(10, 2);
  REQUIRE(r.value == 0.7);
  REQUIRE(r.effective_age == 7);
}

TEST_CASE("buffer clamp falls back to the oldest entry when all are too new") {
  StalenessBuffer b(2, 0.0);
  b.store(7, 7.0);
  b.store(8, 8.0);
  b.store(9, 9.0);  // stamp 0 evicted; retained stamps {7,8,9}
  const auto r = b.read(9, 5);   // wants stamp <= 4, none left
  REQUIRE(r.value == 7.0);
  REQUIRE(r.effective_age == 2);
}

TEST_CASE("stale wrap-arounds never clobber fresher slots") {
  StalenessBuffer b(1, 0.0);  // two slots
  b.store(4, 4.0);
  b.store(3, 3.0);  // same slot as 5 would be... older stamp, must not overwrite
  REQUIRE(b.read(4, 0).value == 4.0);
}

TEST_CASE("edge update follows the projected gradient formula") {
  EdgeAgentState s(0, CostFunction::linear_cost(2.0), 5.0, 1.0, 4, 0.0);
  edge_update(s, 0.5, 0.1);
  REQUIRE(s.flow == Catch::Approx(0.85));
  REQUIRE(s.iteration == 1);
}

TEST_CASE("edge update is a fixed point at zero gradient") {
  EdgeAgentState s(0, CostFunction::linear_cost(2.0), 5.0, 3.3, 4, 0.0);
  edge_update(s, 2.0, 0.7);
  REQUIRE(s.flow == 3.3);
}

TEST_CASE("edge update projects onto the capacity bound") {
  EdgeAgentState s(0, CostFunction::linear_cost(1.0), 5.0, 4.9, 4, 0.0);
  edge_update(s, 100.0, 1.0);
  REQUIRE(s.flow == 5.0);
}

TEST_CASE("edge update respects the lower bound") {
  EdgeAgentState s(0, CostFunction::linear_cost(3.0), 5.0, 0.1, 4, 0.0);
  edge_update(s, 0.0, 1.0);
  REQUIRE(s.flow == 0.0);
}

TEST_CASE("retailer update follows the projected ascent formula") {
  RetailerAgentState s;
  s.demand = 3.0;
  s.price = 0.5;
  retailer_update(s, {1.0, 1.0}, 0.1);
  REQUIRE(s.price == Catch::Approx(0.6));
}

TEST_CASE("retailer price projects onto nonnegativity") {
  RetailerAgentState s;
  s.demand = 3.0;
  s.price = 0.1;
  retailer_update(s, {5.0}, 0.1);
  REQUIRE(s.price == 0.0);
}

TEST_CASE("exactly met demand leaves the price unchanged") {
  RetailerAgentState s;
  s.demand = 3.0;
  s.price = 1.7;
  retailer_update(s, {1.0, 2.0}, 0.5);
  REQUIRE(s.price == 1.7);
}

TEST_CASE("step schedules evaluate per the rule") {
  const auto dim = StepSchedule::diminishing();
  REQUIRE(step_value(dim, 0) == 1.0);
  REQUIRE(step_value(dim, 3) == 0.5);
  const auto con = StepSchedule::constant(0.05);
  REQUIRE(step_value(con, 0) == 0.05);
  REQUIRE(step_value(con, 123456) == 0.05);
  REQUIRE_THROWS(step_value(dim, -1));
  REQUIRE_THROWS(StepSchedule::constant(0.0));
  REQUIRE_THROWS(StepSchedule::diminishing(0.0, 0.5));
}

TEST_CASE("diminishing schedules are non-increasing") {
  const auto s = StepSchedule::diminishing(2.0, 0.7);
  double prev = s.at(0);
  for (long k = 1; k < 1000; ++k) {
    const double v = s.at(k);
    REQUIRE(v <= prev);
    REQUIRE(v > 0.0);
    prev = v;
  }
}

TEST_CASE("edge updates are non-expansive toward the linear fixed point") {
  // For linear cost the gradient is constant, so the clamped map contracts toward
  // its fixed point whenever it moves.
  RetailerAgentState dummy;
  for (int trial = 0; trial < 50; ++trial) {
    const double c = 0.5 + 0.1 * trial;
    const double lam = 1.7;
    const double cap = 5.0;
    const double xfix = c - lam < 0.0 ? cap : 0.0;
    EdgeAgentState s(0, CostFunction::linear_cost(c), cap, 0.3 + 0.07 * trial, 2, 0.0);
    const double before = std::abs(s.flow - xfix);
    edge_update(s, lam, 0.2 + 0.01 * trial);
    REQUIRE(std::abs(s.flow - xfix) <= before + 1e-15);
  }
}

TEST_CASE("replaying a recorded input trace reproduces the trajectory") {
  std::vector<std::pair<double, double>> inputs;  // (price, alpha)
  EdgeAgentState a(0, CostFunction::quadratic_cost(1.5, 0.2), 2.0, 0.4, 3, 0.0);
  for (int k = 0; k < 40; ++k)
    inputs.emplace_back(0.1 * ((k * 7) % 11), 1.0 / std::sqrt(k + 1.0));
  std::vector<double> first;
  for (auto [price, alpha] : inputs) first.push_back(edge_update(a, price, alpha));
  EdgeAgentState b(0, CostFunction::quadratic_cost(1.5, 0.2), 2.0, 0.4, 3, 0.0);
  for (std::size_t k = 0; k < inputs.size(); ++k)
    REQUIRE(edge_update(b, inputs[k].first, inputs[k].second) == first[k]);
}

TEST_CASE("drift schedules interpolate and clamp") {
  DriftSchedule d;
  REQUIRE(d.factor_at(123.0) == 1.0);
  d.knots = {{0.0, 1.0}, {100.0, 1.1}};
  REQUIRE(d.factor_at(0.0) == 1.0);
  REQUIRE(d.factor_at(50.0) == Catch::Approx(1.05));
  REQUIRE(d.factor_at(100.0) == Catch::Approx(1.1));
  REQUIRE(d.factor_at(500.0) == Catch::Approx(1.1));
  REQUIRE(d.total_variation() == Catch::Approx(0.1));
  DriftSchedule bad;
  bad.knots = {{10.0, 1.0}, {5.0, 1.1}};
  REQUIRE_THROWS(bad.validate());
}
