#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace dapdsco {

enum class Tier { Supplier, Warehouse, Retailer };

inline const char* tier_name(Tier t) {
  switch (t) {
    case Tier::Supplier: return "supplier";
    case Tier::Warehouse: return "warehouse";
    default: return "retailer";
  }
}

inline Tier tier_from_name(const std::string& s) {
  if (s == "supplier") return Tier::Supplier;
  if (s == "warehouse") return Tier::Warehouse;
  if (s == "retailer") return Tier::Retailer;
  throw std::invalid_argument("unknown tier: " + s);
}

struct NodeSpec {
  std::string id;
  Tier tier = Tier::Supplier;
};

struct EdgeSpec {
  std::string from;
  std::string to;
  double cost = 0.0;            // linear cost coefficient, > 0
  double capacity = 0.0;        // box upper bound, > 0
  double cost_quadratic = 0.0;  // optional curvature for separable convex edge costs, >= 0
};

// Per-edge flows and per-retailer prices, in problem index order.
using FlowVector = std::vector<double>;
using PriceVector = std::vector<double>;

// Separable scalar cost term: linear c*x or quadratic (curvature/2)*x^2 + linear*x.
enum class CostKind { Linear, Quadratic };

struct CostFunction {
  CostKind kind = CostKind::Linear;
  double linear = 0.0;
  double curvature = 0.0;

  static CostFunction linear_cost(double c) {
    CostFunction f;
    f.kind = CostKind::Linear;
    f.linear = c;
    return f;
  }

  static CostFunction quadratic_cost(double curvature, double linear) {
    if (curvature <= 0.0)
      throw std::invalid_argument("quadratic cost requires curvature > 0");
    CostFunction f;
    f.kind = CostKind::Quadratic;
    f.curvature = curvature;
    f.linear = linear;
    return f;
  }

  double value(double x) const {
    if (kind == CostKind::Linear) return linear * x;
    return 0.5 * curvature * x * x + linear * x;
  }

  double gradient(double x) const {
    if (kind == CostKind::Linear) return linear;
    return curvature * x + linear;
  }
};

inline double cost_value(const CostFunction& f, double x) { return f.value(x); }
inline double cost_gradient(const CostFunction& f, double x) { return f.gradient(x); }

// Directed acyclic flow-allocation instance: edges carry positive unit costs and
// capacities, retailers carry strictly positive demands. The feasible set is the
// capacity box; the only coupling constraints are per-retailer inbound floors
// h_i(x) >= d_i.
class SupplyChainProblem {
 public:
  SupplyChainProblem(std::vector<NodeSpec> nodes, std::vector<EdgeSpec> edges,
                     std::map<std::string, double> demands)
      : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].id.empty()) throw std::invalid_argument("node id must be non-empty");
      if (!node_index_.emplace(nodes_[i].id, static_cast<int>(i)).second)
        throw std::invalid_argument("duplicate node id: " + nodes_[i].id);
    }
    for (const auto& e : edges_) {
      if (!node_index_.count(e.from))
        throw std::invalid_argument("edge references unknown node: " + e.from);
      if (!node_index_.count(e.to))
        throw std::invalid_argument("edge references unknown node: " + e.to);
      if (e.cost <= 0.0)
        throw std::invalid_argument("edge cost must be > 0 (" + e.from + "->" + e.to + ")");
      if (e.capacity <= 0.0)
        throw std::invalid_argument("edge capacity must be > 0 (" + e.from + "->" + e.to + ")");
      if (e.cost_quadratic < 0.0)
        throw std::invalid_argument("edge quadratic cost must be >= 0");
    }
    check_acyclic();

    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].tier != Tier::Retailer) continue;
      auto it = demands.find(nodes_[i].id);
      if (it == demands.end())
        throw std::invalid_argument("retailer has no demand: " + nodes_[i].id);
      if (it->second <= 0.0)
        throw std::invalid_argument("demand must be > 0 for retailer " + nodes_[i].id);
      retailer_index_.emplace(nodes_[i].id, static_cast<int>(retailer_nodes_.size()));
      retailer_nodes_.push_back(static_cast<int>(i));
      demand_.push_back(it->second);
    }
    for (const auto& [id, d] : demands) {
      auto it = node_index_.find(id);
      if (it == node_index_.end()) throw std::invalid_argument("demand for unknown node: " + id);
      if (nodes_[static_cast<std::size_t>(it->second)].tier != Tier::Retailer)
        throw std::invalid_argument("demand attached to non-retailer node: " + id);
    }

    inbound_.assign(retailer_nodes_.size(), {});
    edge_retailer_.assign(edges_.size(), -1);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      auto it = retailer_index_.find(edges_[e].to);
      if (it != retailer_index_.end()) {
        edge_retailer_[e] = it->second;
        inbound_[static_cast<std::size_t>(it->second)].push_back(static_cast<int>(e));
      }
    }
  }

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  int num_retailers() const { return static_cast<int>(retailer_nodes_.size()); }

  const std::vector<NodeSpec>& nodes() const { return nodes_; }
  const std::vector<EdgeSpec>& edges() const { return edges_; }
  const EdgeSpec& edge(int e) const { return edges_.at(static_cast<std::size_t>(e)); }

  double cost(int e) const { return edge(e).cost; }
  double capacity(int e) const { return edge(e).capacity; }
  bool has_quadratic_costs() const {
    return std::any_of(edges_.begin(), edges_.end(),
                       [](const EdgeSpec& e) { return e.cost_quadratic > 0.0; });
  }
  CostFunction edge_cost_fn(int e) const {
    const auto& spec = edge(e);
    if (spec.cost_quadratic > 0.0)
      return CostFunction::quadratic_cost(spec.cost_quadratic, spec.cost);
    return CostFunction::linear_cost(spec.cost);
  }

  double demand(int r) const { return demand_.at(static_cast<std::size_t>(r)); }
  const std::vector<double>& demands() const { return demand_; }
  const std::string& retailer_id(int r) const {
    return nodes_[static_cast<std::size_t>(retailer_nodes_.at(static_cast<std::size_t>(r)))].id;
  }
  const std::vector<int>& inbound_edges(int r) const {
    return inbound_.at(static_cast<std::size_t>(r));
  }
  // Retailer position for the edge's head node, or -1 when the head is not a retailer.
  int edge_retailer(int e) const { return edge_retailer_.at(static_cast<std::size_t>(e)); }

  int node_index(const std::string& id) const {
    auto it = node_index_.find(id);
    if (it == node_index_.end()) throw std::invalid_argument("unknown node id: " + id);
    return it->second;
  }

  int retailer_position(const std::string& id) const {
    auto it = retailer_index_.find(id);
    if (it == retailer_index_.end())
      throw std::invalid_argument("node is not a retailer: " + id);
    return it->second;
  }

  // Max inbound capacity sum over retailers; the residual range bound per retailer.
  double inbound_capacity(int r) const {
    double s = 0.0;
    for (int e : inbound_edges(r)) s += capacity(e);
    return s;
  }

 private:
  void check_acyclic() const {
    const std::size_t n = nodes_.size();
    std::vector<int> indegree(n, 0);
    std::vector<std::vector<int>> out(n);
    for (const auto& e : edges_) {
      const int u = node_index_.at(e.from);
      const int v = node_index_.at(e.to);
      out[static_cast<std::size_t>(u)].push_back(v);
      ++indegree[static_cast<std::size_t>(v)];
    }
    std::vector<int> queue;
    for (std::size_t i = 0; i < n; ++i)
      if (indegree[i] == 0) queue.push_back(static_cast<int>(i));
    std::size_t seen = 0;
    while (!queue.empty()) {
      const int u = queue.back();
      queue.pop_back();
      ++seen;
      for (int v : out[static_cast<std::size_t>(u)])
        if (--indegree[static_cast<std::size_t>(v)] == 0) queue.push_back(v);
    }
    if (seen != n) throw std::invalid_argument("graph has a directed cycle");
  }

  std::vector<NodeSpec> nodes_;
  std::vector<EdgeSpec> edges_;
  std::map<std::string, int> node_index_;
  std::map<std::string, int> retailer_index_;
  std::vector<int> retailer_nodes_;   // node index per retailer position
  std::vector<double> demand_;        // per retailer position
  std::vector<std::vector<int>> inbound_;
  std::vector<int> edge_retailer_;
};

// h_i(x): sum of flows on edges into the retailer.
inline double inbound_flow(const SupplyChainProblem& p, const FlowVector& x,
                           const std::string& retailer) {
  if (x.size() != static_cast<std::size_t>(p.num_edges()))
    throw std::invalid_argument("flow vector has wrong dimension");
  const int r = p.retailer_position(retailer);
  double h = 0.0;
  for (int e : p.inbound_edges(r)) h += x[static_cast<std::size_t>(e)];
  return h;
}

inline double inbound_flow(const SupplyChainProblem& p, const FlowVector& x, int r) {
  double h = 0.0;
  for (int e : p.inbound_edges(r)) h += x[static_cast<std::size_t>(e)];
  return h;
}

inline double total_cost(const SupplyChainProblem& p, const FlowVector& x) {
  double c = 0.0;
  for (int e = 0; e < p.num_edges(); ++e)
    c += p.edge_cost_fn(e).value(x[static_cast<std::size_t>(e)]);
  return c;
}

// L(x, lambda) = C(x) + sum_i lambda_i (d_i - h_i(x)).
inline double lagrangian(const SupplyChainProblem& p, const FlowVector& x,
                         const PriceVector& lambda) {
  if (x.size() != static_cast<std::size_t>(p.num_edges()) ||
      lambda.size() != static_cast<std::size_t>(p.num_retailers()))
    throw std::invalid_argument("lagrangian: dimension mismatch");
  double value = total_cost(p, x);
  for (int r = 0; r < p.num_retailers(); ++r)
    value += lambda[static_cast<std::size_t>(r)] * (p.demand(r) - inbound_flow(p, x, r));
  return value;
}

struct SlaterResult {
  bool strictly_feasible = false;
  FlowVector witness;            // (1 - eps) * capacity on every edge
  std::vector<double> margins;   // h_i(witness) - d_i per retailer
};

// Checks Slater's condition with the fixed interior witness x = (1 - 1e-3) u.
inline SlaterResult slater_check(const SupplyChainProblem& p) {
  constexpr double kEps = 1e-3;
  SlaterResult res;
  res.witness.resize(static_cast<std::size_t>(p.num_edges()));
  for (int e = 0; e < p.num_edges(); ++e)
    res.witness[static_cast<std::size_t>(e)] = (1.0 - kEps) * p.capacity(e);
  res.strictly_feasible = true;
  res.margins.resize(static_cast<std::size_t>(p.num_retailers()));
  for (int r = 0; r < p.num_retailers(); ++r) {
    const double margin = inbound_flow(p, res.witness, r) - p.demand(r);
    res.margins[static_cast<std::size_t>(r)] = margin;
    if (!(margin > 0.0)) res.strictly_feasible = false;
  }
  return res;
}

// Equality-constrained separable quadratic instance: minimize
// sum_i (quad_coeff_i/2) x_i^2 + lin_coeff_i x_i subject to A x = b.
struct QuadraticProblem {
  std::vector<double> quad_coeff;
  std::vector<double> lin_coeff;
  std::vector<std::vector<double>> constraint;  // m rows of length N
  std::vector<double> rhs;                      // length m
  std::vector<std::string> labels;              // optional agent names

  int n_agents() const { return static_cast<int>(quad_coeff.size()); }
  int n_constraints() const { return static_cast<int>(rhs.size()); }

  void validate() const {
    const std::size_t n = quad_coeff.size();
    if (n == 0) throw std::invalid_argument("quadratic problem has no agents");
    if (lin_coeff.size() != n)
      throw std::invalid_argument("linear coefficient count mismatch");
    for (double c : quad_coeff)
      if (c <= 0.0) throw std::invalid_argument("quadratic coefficients must be > 0");
    if (constraint.size() != rhs.size())
      throw std::invalid_argument("constraint row count mismatch");
    if (rhs.size() > n)
      throw std::invalid_argument("more constraints than agents (m must be <= N)");
    for (const auto& row : constraint) {
      if (row.size() != n) throw std::invalid_argument("constraint row length mismatch");
      if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; }))
        throw std::invalid_argument("constraint matrix has an all-zero row");
    }
    if (!labels.empty() && labels.size() != n)
      throw std::invalid_argument("label count mismatch");
  }

  double objective(const std::vector<double>& x) const {
    double v = 0.0;
    for (std::size_t i = 0; i < quad_coeff.size(); ++i)
      v += 0.5 * quad_coeff[i] * x[i] * x[i] + lin_coeff[i] * x[i];
    return v;
  }

  std::vector<double> residual(const std::vector<double>& x) const {
    std::vector<double> r(rhs.size());
    for (std::size_t row = 0; row < constraint.size(); ++row) {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += constraint[row][i] * x[i];
      r[row] = s - rhs[row];
    }
    return r;
  }

  double lagrangian(const std::vector<double>& x, const std::vector<double>& lambda) const {
    if (x.size() != quad_coeff.size() || lambda.size() != rhs.size())
      throw std::invalid_argument("lagrangian: dimension mismatch");
    double v = objective(x);
    const auto r = residual(x);
    for (std::size_t row = 0; row < r.size(); ++row) v += lambda[row] * r[row];
    return v;
  }
};

// Saddle point returned by the exact oracles. `notes` records tie-breaking and
// residual details so ground truth stays auditable.
struct SaddlePoint {
  std::vector<double> x_star;
  std::vector<double> lambda_star;
  double optimal_value = 0.0;
  std::string notes;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace dapdsco
