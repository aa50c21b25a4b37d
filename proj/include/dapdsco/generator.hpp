#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dapdsco/problem.hpp"
#include "dapdsco/rng.hpp"

namespace dapdsco {

inline void check_range(const std::pair<double, double>& r, const char* what) {
  if (!(r.first < r.second))
    throw std::invalid_argument(std::string(what) + " range is empty");
}

struct ThreeTierOptions {
  int suppliers = 2;
  int warehouses = 3;
  int retailers = 5;
  std::pair<double, double> cost_range{0.5, 2.0};
  std::pair<double, double> demand_range{0.25, 1.0};
};

namespace detail {

inline double draw_positive(RngStream& st, std::pair<double, double> range) {
  const double lo = std::max(range.first, 0.0);
  if (!(lo < range.second)) throw std::invalid_argument("demand range has no positive part");
  const double v = st.next_uniform(lo, range.second);
  return v > 0.0 ? v : range.second * 1e-12;
}

}  // namespace detail

// Complete-bipartite three-tier instance. Deterministic in the seed: demands are
// drawn first (one per retailer), then edge costs in insertion order. Inbound
// capacity per retailer totals 1.5x its demand, which guarantees a Slater point.
inline SupplyChainProblem generate_three_tier(std::uint64_t seed, const ThreeTierOptions& opt) {
  if (opt.suppliers < 1 || opt.warehouses < 1 || opt.retailers < 1)
    throw std::invalid_argument("tier counts must be >= 1");
  check_range(opt.cost_range, "cost");
  check_range(opt.demand_range, "demand");

  RngStream demand_stream(seed, StreamPurpose::Generate, 0, 0);
  RngStream cost_stream(seed, StreamPurpose::Generate, 0, 1);

  std::vector<NodeSpec> nodes;
  std::vector<EdgeSpec> edges;
  std::map<std::string, double> demands;

  for (int s = 0; s < opt.suppliers; ++s) nodes.push_back({"S" + std::to_string(s), Tier::Supplier});
  for (int w = 0; w < opt.warehouses; ++w) nodes.push_back({"W" + std::to_string(w), Tier::Warehouse});
  std::vector<double> d(static_cast<std::size_t>(opt.retailers));
  double total_demand = 0.0;
  for (int r = 0; r < opt.retailers; ++r) {
    nodes.push_back({"R" + std::to_string(r), Tier::Retailer});
    d[static_cast<std::size_t>(r)] = detail::draw_positive(demand_stream, opt.demand_range);
    demands["R" + std::to_string(r)] = d[static_cast<std::size_t>(r)];
    total_demand += d[static_cast<std::size_t>(r)];
  }

  const double upstream_cap =
      1.5 * total_demand / (static_cast<double>(opt.suppliers) * opt.warehouses);
  for (int s = 0; s < opt.suppliers; ++s)
    for (int w = 0; w < opt.warehouses; ++w)
      edges.push_back({"S" + std::to_string(s), "W" + std::to_string(w),
                       cost_stream.next_uniform(opt.cost_range.first, opt.cost_range.second),
                       upstream_cap});
  for (int w = 0; w < opt.warehouses; ++w)
    for (int r = 0; r < opt.retailers; ++r)
      edges.push_back({"W" + std::to_string(w), "R" + std::to_string(r),
                       cost_stream.next_uniform(opt.cost_range.first, opt.cost_range.second),
                       1.5 * d[static_cast<std::size_t>(r)] / opt.warehouses});

  return SupplyChainProblem(std::move(nodes), std::move(edges), std::move(demands));
}

// The two-warehouse, four-retailer layout: one supplier feeding both warehouses,
// each warehouse exclusively serving two retailers. 7 nodes, 6 edges.
inline SupplyChainProblem generate_fig1(std::uint64_t seed,
                                        std::pair<double, double> cost_range = {0.5, 2.0},
                                        std::pair<double, double> demand_range = {0.25, 1.0}) {
  check_range(cost_range, "cost");
  check_range(demand_range, "demand");
  RngStream demand_stream(seed, StreamPurpose::Generate, 1, 0);
  RngStream cost_stream(seed, StreamPurpose::Generate, 1, 1);

  std::vector<NodeSpec> nodes{{"S", Tier::Supplier},  {"W1", Tier::Warehouse},
                              {"W2", Tier::Warehouse}, {"R1", Tier::Retailer},
                              {"R2", Tier::Retailer},  {"R3", Tier::Retailer},
                              {"R4", Tier::Retailer}};
  std::map<std::string, double> demands;
  std::vector<double> d(4);
  double total = 0.0;
  for (int r = 0; r < 4; ++r) {
    d[static_cast<std::size_t>(r)] = detail::draw_positive(demand_stream, demand_range);
    demands["R" + std::to_string(r + 1)] = d[static_cast<std::size_t>(r)];
    total += d[static_cast<std::size_t>(r)];
  }
  auto cost = [&] { return cost_stream.next_uniform(cost_range.first, cost_range.second); };
  std::vector<EdgeSpec> edges{
      {"S", "W1", cost(), 1.5 * total / 2.0},
      {"S", "W2", cost(), 1.5 * total / 2.0},
      {"W1", "R1", cost(), 1.5 * d[0]},
      {"W1", "R2", cost(), 1.5 * d[1]},
      {"W2", "R3", cost(), 1.5 * d[2]},
      {"W2", "R4", cost(), 1.5 * d[3]},
  };
  return SupplyChainProblem(std::move(nodes), std::move(edges), std::move(demands));
}

struct QuadraticOptions {
  int suppliers = 2;
  int warehouses = 3;
  int retailers = 5;
  std::pair<double, double> curvature_range{0.5, 2.0};
  std::pair<double, double> linear_range{-1.0, 1.0};
  std::pair<double, double> demand_range{0.25, 0.75};
};

// Scalar-per-agent quadratic instance with per-warehouse balance rows and
// per-retailer demand rows:
//   warehouse w:  (1/N_s) sum_s x_s - x_w = 0
//   retailer  r:  (1/kappa_w) x_{w(r)} + x_r = -demand_r,  w(r) = r mod N_w
// Rows are l2-normalized; without normalization the delayed dual iteration is
// unstable on a sizable fraction of seeds at the reference step sizes.
inline QuadraticProblem generate_quadratic_three_tier(std::uint64_t seed,
                                                      const QuadraticOptions& opt) {
  if (opt.suppliers < 1 || opt.warehouses < 1 || opt.retailers < 1)
    throw std::invalid_argument("tier counts must be >= 1");
  check_range(opt.curvature_range, "curvature");
  check_range(opt.linear_range, "linear coefficient");
  check_range(opt.demand_range, "demand");

  const int ns = opt.suppliers, nw = opt.warehouses, nr = opt.retailers;
  const int n = ns + nw + nr;
  const int m = nw + nr;

  RngStream curv_stream(seed, StreamPurpose::Generate, 2, 0);
  RngStream lin_stream(seed, StreamPurpose::Generate, 2, 1);
  RngStream demand_stream(seed, StreamPurpose::Generate, 2, 2);

  QuadraticProblem q;
  q.quad_coeff.resize(static_cast<std::size_t>(n));
  q.lin_coeff.resize(static_cast<std::size_t>(n));
  q.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    q.quad_coeff[static_cast<std::size_t>(i)] =
        curv_stream.next_uniform(opt.curvature_range.first, opt.curvature_range.second);
    q.lin_coeff[static_cast<std::size_t>(i)] =
        lin_stream.next_uniform(opt.linear_range.first, opt.linear_range.second);
  }
  for (int s = 0; s < ns; ++s) q.labels[static_cast<std::size_t>(s)] = "S" + std::to_string(s);
  for (int w = 0; w < nw; ++w) q.labels[static_cast<std::size_t>(ns + w)] = "W" + std::to_string(w);
  for (int r = 0; r < nr; ++r)
    q.labels[static_cast<std::size_t>(ns + nw + r)] = "R" + std::to_string(r);

  q.constraint.assign(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  q.rhs.assign(static_cast<std::size_t>(m), 0.0);

  for (int w = 0; w < nw; ++w) {
    auto& row = q.constraint[static_cast<std::size_t>(w)];
    for (int s = 0; s < ns; ++s) row[static_cast<std::size_t>(s)] = 1.0 / ns;
    row[static_cast<std::size_t>(ns + w)] = -1.0;
  }
  std::vector<int> fanout(static_cast<std::size_t>(nw), 0);
  for (int r = 0; r < nr; ++r) ++fanout[static_cast<std::size_t>(r % nw)];
  for (int r = 0; r < nr; ++r) {
    const int w = r % nw;
    auto& row = q.constraint[static_cast<std::size_t>(nw + r)];
    row[static_cast<std::size_t>(ns + w)] = 1.0 / fanout[static_cast<std::size_t>(w)];
    row[static_cast<std::size_t>(ns + nw + r)] = 1.0;
    q.rhs[static_cast<std::size_t>(nw + r)] =
        -detail::draw_positive(demand_stream, opt.demand_range);
  }

  for (int row = 0; row < m; ++row) {
    double nrm = 0.0;
    for (double v : q.constraint[static_cast<std::size_t>(row)]) nrm += v * v;
    nrm = std::sqrt(nrm);
    for (double& v : q.constraint[static_cast<std::size_t>(row)]) v /= nrm;
    q.rhs[static_cast<std::size_t>(row)] /= nrm;
  }

  q.validate();
  return q;
}

}  // namespace dapdsco
