#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dapdsco/problem.hpp"

namespace dapdsco {

// Dense LU with partial pivoting. Small systems only (KKT blocks, ADMM projections);
// throws naming the deficient pivot column so callers can report which constraint
// direction collapsed.
class DenseLU {
 public:
  explicit DenseLU(std::vector<std::vector<double>> m) : lu_(std::move(m)) {
    n_ = lu_.size();
    for (const auto& row : lu_)
      if (row.size() != n_) throw std::invalid_argument("DenseLU: matrix not square");
    perm_.resize(n_);
    std::iota(perm_.begin(), perm_.end(), 0);
    for (std::size_t col = 0; col < n_; ++col) {
      std::size_t pivot = col;
      double best = std::abs(lu_[perm_[col]][col]);
      for (std::size_t r = col + 1; r < n_; ++r) {
        const double v = std::abs(lu_[perm_[r]][col]);
        if (v > best) {
          best = v;
          pivot = r;
        }
      }
      if (!(best > kPivotFloor))
        throw std::runtime_error("singular matrix: pivot " + std::to_string(col) +
                                 " below " + std::to_string(kPivotFloor));
      std::swap(perm_[col], perm_[pivot]);
      const double diag = lu_[perm_[col]][col];
      for (std::size_t r = col + 1; r < n_; ++r) {
        auto& row = lu_[perm_[r]];
        const double f = row[col] / diag;
        row[col] = f;
        if (f == 0.0) continue;
        const auto& prow = lu_[perm_[col]];
        for (std::size_t c = col + 1; c < n_; ++c) row[c] -= f * prow[c];
      }
    }
  }

  std::vector<double> solve(const std::vector<double>& b) const {
    if (b.size() != n_) throw std::invalid_argument("DenseLU: rhs dimension mismatch");
    std::vector<double> y(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double s = b[perm_[i]];
      const auto& row = lu_[perm_[i]];
      for (std::size_t j = 0; j < i; ++j) s -= row[j] * y[j];
      y[i] = s;
    }
    for (std::size_t ii = n_; ii-- > 0;) {
      double s = y[ii];
      const auto& row = lu_[perm_[ii]];
      for (std::size_t j = ii + 1; j < n_; ++j) s -= row[j] * y[j];
      y[ii] = s / row[ii];
    }
    return y;
  }

 private:
  static constexpr double kPivotFloor = 1e-14;
  std::vector<std::vector<double>> lu_;
  std::vector<std::size_t> perm_;
  std::size_t n_ = 0;
};

inline std::vector<double> solve_dense(std::vector<std::vector<double>> m,
                                       const std::vector<double>& b) {
  return DenseLU(std::move(m)).solve(b);
}

// Exact minimizer of the flow LP. Constraints couple only the inbound edges of each
// retailer, and every cost is positive, so each retailer independently fills its
// cheapest inbound edges until the demand is tight; everything else stays at zero.
// The optimal price is the marginal (last used) edge cost. Cost ties break toward
// the lower edge index.
inline SaddlePoint exact_oracle_greedy(const SupplyChainProblem& p) {
  if (p.has_quadratic_costs())
    throw std::invalid_argument("greedy oracle handles linear edge costs only");

  SaddlePoint sp;
  sp.x_star.assign(static_cast<std::size_t>(p.num_edges()), 0.0);
  sp.lambda_star.assign(static_cast<std::size_t>(p.num_retailers()), 0.0);

  for (int r = 0; r < p.num_retailers(); ++r) {
    std::vector<int> order = p.inbound_edges(r);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (p.cost(a) != p.cost(b)) return p.cost(a) < p.cost(b);
      return a < b;
    });
    double need = p.demand(r);
    double marginal = 0.0;
    for (int e : order) {
      if (need <= 0.0) break;
      const double take = std::min(p.capacity(e), need);
      sp.x_star[static_cast<std::size_t>(e)] = take;
      need -= take;
      marginal = p.cost(e);
    }
    if (need > 1e-12)
      throw std::runtime_error("infeasible instance: inbound capacity short of demand at " +
                               p.retailer_id(r));
    sp.lambda_star[static_cast<std::size_t>(r)] = marginal;
  }

  sp.optimal_value = total_cost(p, sp.x_star);
  sp.notes = "ties broken by ascending edge index";

  // KKT audit: feasibility, complementary slackness, and per-edge stationarity.
  constexpr double kTol = 1e-12;
  for (int r = 0; r < p.num_retailers(); ++r) {
    const double h = inbound_flow(p, sp.x_star, r);
    if (p.demand(r) - h > kTol) throw std::runtime_error("oracle lost primal feasibility");
    if (sp.lambda_star[static_cast<std::size_t>(r)] * (h - p.demand(r)) > kTol)
      throw std::runtime_error("oracle violates complementary slackness");
  }
  for (int e = 0; e < p.num_edges(); ++e) {
    const int r = p.edge_retailer(e);
    const double price = r >= 0 ? sp.lambda_star[static_cast<std::size_t>(r)] : 0.0;
    const double reduced = p.cost(e) - price;
    const double x = sp.x_star[static_cast<std::size_t>(e)];
    if (x <= kTol && reduced < -kTol) throw std::runtime_error("oracle stationarity failed");
    if (x >= p.capacity(e) - kTol && reduced > kTol)
      throw std::runtime_error("oracle stationarity failed");
    if (x > kTol && x < p.capacity(e) - kTol && std::abs(reduced) > kTol)
      throw std::runtime_error("oracle stationarity failed");
  }
  return sp;
}

// Ground truth for the quadratic variant: solve the stationarity system
//   [diag(c) A^T; A 0] [x; lambda] = [-d; b]
// by dense elimination with partial pivoting and verify both residuals.
inline SaddlePoint exact_oracle_kkt(const QuadraticProblem& q) {
  q.validate();
  const int n = q.n_agents();
  const int m = q.n_constraints();
  const std::size_t dim = static_cast<std::size_t>(n + m);
  std::vector<std::vector<double>> kkt(dim, std::vector<double>(dim, 0.0));
  std::vector<double> rhs(dim, 0.0);
  for (int i = 0; i < n; ++i) {
    kkt[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] =
        q.quad_coeff[static_cast<std::size_t>(i)];
    rhs[static_cast<std::size_t>(i)] = -q.lin_coeff[static_cast<std::size_t>(i)];
  }
  for (int row = 0; row < m; ++row) {
    for (int i = 0; i < n; ++i) {
      const double a = q.constraint[static_cast<std::size_t>(row)][static_cast<std::size_t>(i)];
      kkt[static_cast<std::size_t>(i)][static_cast<std::size_t>(n + row)] = a;
      kkt[static_cast<std::size_t>(n + row)][static_cast<std::size_t>(i)] = a;
    }
    rhs[static_cast<std::size_t>(n + row)] = q.rhs[static_cast<std::size_t>(row)];
  }

  const auto sol = solve_dense(std::move(kkt), rhs);
  SaddlePoint sp;
  sp.x_star.assign(sol.begin(), sol.begin() + n);
  sp.lambda_star.assign(sol.begin() + n, sol.end());
  sp.optimal_value = q.objective(sp.x_star);

  double stat = 0.0;
  for (int i = 0; i < n; ++i) {
    double g = q.quad_coeff[static_cast<std::size_t>(i)] * sp.x_star[static_cast<std::size_t>(i)] +
               q.lin_coeff[static_cast<std::size_t>(i)];
    for (int row = 0; row < m; ++row)
      g += q.constraint[static_cast<std::size_t>(row)][static_cast<std::size_t>(i)] *
           sp.lambda_star[static_cast<std::size_t>(row)];
    stat += g * g;
  }
  const double feas = norm2(q.residual(sp.x_star));
  if (std::sqrt(stat) > 1e-10 || feas > 1e-10)
    throw std::runtime_error("KKT oracle residuals exceed 1e-10");
  sp.notes = "stationarity residual " + std::to_string(std::sqrt(stat)) +
             ", feasibility residual " + std::to_string(feas);
  return sp;
}

}  // namespace dapdsco
