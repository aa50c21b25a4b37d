#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "dapdsco/analysis.hpp"
#include "dapdsco/oracles.hpp"
#include "dapdsco/problem.hpp"
#include "dapdsco/simnet.hpp"
#include "dapdsco/trace.hpp"

namespace dapdsco {

namespace detail {

inline void annotate_dag_result(SimResult& result, const SupplyChainProblem& p,
                                double lambda_max_override) {
  if (!p.has_quadratic_costs()) {
    result.saddle = exact_oracle_greedy(p);
    result.constants = TheoryConstants::compute(p, *result.saddle, lambda_max_override);
    result.lambda_max = result.constants->lambda_max;
  } else {
    result.lambda_max = lambda_max_override;
  }
  AnnotationInputs ann;
  ann.dag = &p;
  ann.saddle = result.saddle ? &*result.saddle : nullptr;
  ann.constants = result.constants ? &*result.constants : nullptr;
  ann.lambda_max = result.lambda_max;
  annotate_trace(result.trace, ann);
}

inline void annotate_quad_result(SimResult& result, const QuadraticProblem& q,
                                 double lambda_max_override) {
  result.saddle = exact_oracle_kkt(q);
  result.lambda_max = lambda_max_override > 0.0
                          ? lambda_max_override
                          : 2.0 * std::max(1.0, norm2(result.saddle->lambda_star));
  AnnotationInputs ann;
  ann.quad = &q;
  ann.saddle = &*result.saddle;
  ann.lambda_max = result.lambda_max;
  annotate_trace(result.trace, ann);
}

}  // namespace detail

// Reference synchronous Arrow-Hurwicz iteration on the flow problem: every primal
// coordinate uses lambda^k, every dual coordinate uses x^k. Written independently
// of the agent machinery; the asynchronous engine under zero impairments must
// reproduce this trajectory bit for bit.
inline SimResult sync_pd_run_full(const SupplyChainProblem& p, const StepSchedule& alpha,
                                  const StepSchedule& beta, long K, std::uint64_t seed,
                                  const InitSpec& init = {}, double lambda_max_override = 0.0) {
  if (K < 1) throw std::invalid_argument("iterations must be >= 1");
  const int ne = p.num_edges();
  const int nr = p.num_retailers();

  std::vector<double> x = initial_flows(p, init, seed);
  std::vector<double> lam = initial_prices(p, init);

  SimResult result;
  RunTrace& t = result.trace;
  t.algorithm = algorithm_name(Algorithm::SyncPd);
  t.variant = "supply_chain";
  t.seed = seed;
  t.iterations = K;
  t.x0 = x;
  t.lambda0 = lam;

  std::vector<double> newx(static_cast<std::size_t>(ne));
  std::vector<double> newlam(static_cast<std::size_t>(nr));
  for (long k = 0; k < K; ++k) {
    const double ak = alpha.at(k);
    const double bk = beta.at(k);
    for (int e = 0; e < ne; ++e) {
      const auto ei = static_cast<std::size_t>(e);
      const int r = p.edge_retailer(e);
      const double price = r >= 0 ? lam[static_cast<std::size_t>(r)] : 0.0;
      const double g = p.edge_cost_fn(e).gradient(x[ei]) - price;
      newx[ei] = std::clamp(x[ei] - ak * g, 0.0, p.capacity(e));
    }
    for (int r = 0; r < nr; ++r) {
      const auto ri = static_cast<std::size_t>(r);
      double h = 0.0;
      for (int e : p.inbound_edges(r)) h += x[static_cast<std::size_t>(e)];
      const double res = p.demand(r) - h;
      newlam[ri] = std::max(0.0, lam[ri] + bk * res);
    }
    x = newx;
    lam = newlam;

    TickRecord rec;
    rec.k = k;
    rec.alpha = ak;
    rec.beta = bk;
    rec.sent = ne + nr;  // one scalar per edge agent and per retailer agent
    t.total_sent += rec.sent;
    t.ticks.push_back(rec);
    t.x.push_back(x);
    t.lambda.push_back(lam);
  }
  detail::annotate_dag_result(result, p, lambda_max_override);
  return result;
}

inline SimResult sync_pd_run_full(const QuadraticProblem& q, const StepSchedule& alpha,
                                  const StepSchedule& beta, long K, std::uint64_t seed,
                                  const InitSpec& init = {}, double lambda_max_override = 0.0) {
  if (K < 1) throw std::invalid_argument("iterations must be >= 1");
  q.validate();
  const int n = q.n_agents();
  const int m = q.n_constraints();

  std::vector<double> x = initial_primal(q, init, seed);
  std::vector<double> lam = initial_duals(q, init);

  SimResult result;
  RunTrace& t = result.trace;
  t.algorithm = algorithm_name(Algorithm::SyncPd);
  t.variant = "quadratic";
  t.seed = seed;
  t.iterations = K;
  t.x0 = x;
  t.lambda0 = lam;

  std::vector<double> newx(static_cast<std::size_t>(n));
  std::vector<double> newlam(static_cast<std::size_t>(m));
  for (long k = 0; k < K; ++k) {
    const double ak = alpha.at(k);
    const double bk = beta.at(k);
    for (int i = 0; i < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      double g = q.quad_coeff[ii] * x[ii] + q.lin_coeff[ii];
      for (int r = 0; r < m; ++r) {
        const double a = q.constraint[static_cast<std::size_t>(r)][ii];
        if (a != 0.0) g += a * lam[static_cast<std::size_t>(r)];
      }
      newx[ii] = x[ii] - ak * g;
    }
    for (int r = 0; r < m; ++r) {
      const auto ri = static_cast<std::size_t>(r);
      double res = -q.rhs[ri];
      for (int i = 0; i < n; ++i) {
        const double a = q.constraint[ri][static_cast<std::size_t>(i)];
        if (a != 0.0) res += a * x[static_cast<std::size_t>(i)];
      }
      newlam[ri] = lam[ri] + bk * res;
    }
    x = newx;
    lam = newlam;

    TickRecord rec;
    rec.k = k;
    rec.alpha = ak;
    rec.beta = bk;
    rec.sent = n + m;
    t.total_sent += rec.sent;
    t.ticks.push_back(rec);
    t.x.push_back(x);
    t.lambda.push_back(lam);
  }
  detail::annotate_quad_result(result, q, lambda_max_override);
  return result;
}

inline RunTrace sync_pd_run(const SupplyChainProblem& p, const StepSchedule& alpha,
                            const StepSchedule& beta, long K, std::uint64_t seed,
                            const InitSpec& init = {}) {
  return sync_pd_run_full(p, alpha, beta, K, seed, init).trace;
}

inline RunTrace sync_pd_run(const QuadraticProblem& q, const StepSchedule& alpha,
                            const StepSchedule& beta, long K, std::uint64_t seed,
                            const InitSpec& init = {}) {
  return sync_pd_run_full(q, alpha, beta, K, seed, init).trace;
}

// Two-block consensus-form ADMM on min f(x) s.t. Ax = b via the splitting x = z.
// The x-step is the closed-form separable prox, the z-step projects onto the
// affine constraint set with a cached AA^T factorization, so z is feasible from
// the first iteration onward. The reported iterate is z with multiplier rho * w.
inline SimResult admm_run_full(const QuadraticProblem& q, double rho, long K, std::uint64_t seed,
                               const InitSpec& init = {}, double lambda_max_override = 0.0) {
  if (K < 1) throw std::invalid_argument("iterations must be >= 1");
  if (rho <= 0.0) throw std::invalid_argument("admm rho must be > 0");
  q.validate();
  const int n = q.n_agents();
  const int m = q.n_constraints();

  std::vector<std::vector<double>> aat(static_cast<std::size_t>(m),
                                       std::vector<double>(static_cast<std::size_t>(m), 0.0));
  for (int r = 0; r < m; ++r)
    for (int s = 0; s < m; ++s) {
      double v = 0.0;
      for (int i = 0; i < n; ++i)
        v += q.constraint[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] *
             q.constraint[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)];
      aat[static_cast<std::size_t>(r)][static_cast<std::size_t>(s)] = v;
    }
  std::unique_ptr<DenseLU> aat_lu;
  try {
    aat_lu = std::make_unique<DenseLU>(std::move(aat));
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("admm setup: constraint matrix is rank-deficient (") +
                             e.what() + ")");
  }

  auto project = [&](const std::vector<double>& v) {
    std::vector<double> av(static_cast<std::size_t>(m), 0.0);
    for (int r = 0; r < m; ++r) {
      double s = -q.rhs[static_cast<std::size_t>(r)];
      for (int i = 0; i < n; ++i)
        s += q.constraint[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] *
             v[static_cast<std::size_t>(i)];
      av[static_cast<std::size_t>(r)] = s;
    }
    const auto y = aat_lu->solve(av);
    std::vector<double> z = v;
    for (int i = 0; i < n; ++i)
      for (int r = 0; r < m; ++r)
        z[static_cast<std::size_t>(i)] -=
            q.constraint[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] *
            y[static_cast<std::size_t>(r)];
    return z;
  };

  std::vector<double> z = initial_primal(q, init, seed);
  std::vector<double> w(static_cast<std::size_t>(n), 0.0);
  std::vector<double> xstep(static_cast<std::size_t>(n), 0.0);

  SimResult result;
  RunTrace& t = result.trace;
  t.algorithm = algorithm_name(Algorithm::Admm);
  t.variant = "quadratic";
  t.seed = seed;
  t.iterations = K;
  t.x0 = z;
  t.lambda0.assign(static_cast<std::size_t>(m), 0.0);

  for (long k = 0; k < K; ++k) {
    for (int i = 0; i < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      xstep[ii] = (rho * (z[ii] - w[ii]) - q.lin_coeff[ii]) / (q.quad_coeff[ii] + rho);
    }
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      v[static_cast<std::size_t>(i)] = xstep[static_cast<std::size_t>(i)] + w[static_cast<std::size_t>(i)];
    z = project(v);
    for (int i = 0; i < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      w[ii] += xstep[ii] - z[ii];
    }

    TickRecord rec;
    rec.k = k;
    rec.alpha = rho;
    rec.beta = rho;
    rec.sent = 2L * n;  // x up to the z-coordinator, z back down
    t.total_sent += rec.sent;
    t.ticks.push_back(rec);
    t.x.push_back(z);
    // Multiplier recovery: at optimality rho * w = A^T lambda, so
    // lambda = (A A^T)^{-1} A (rho w), reusing the cached factorization.
    std::vector<double> aw(static_cast<std::size_t>(m), 0.0);
    for (int r = 0; r < m; ++r) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        s += q.constraint[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] *
             w[static_cast<std::size_t>(i)];
      aw[static_cast<std::size_t>(r)] = rho * s;
    }
    t.lambda.push_back(aat_lu->solve(aw));
  }
  detail::annotate_quad_result(result, q, lambda_max_override);
  return result;
}

inline RunTrace admm_run(const QuadraticProblem& q, double rho, long K, std::uint64_t seed,
                         const InitSpec& init = {}) {
  return admm_run_full(q, rho, K, seed, init).trace;
}

// Column-stochastic mixing weights. Ring topology: keep half, push half forward.
inline std::vector<std::vector<double>> make_ring_mixing(int n) {
  if (n < 1) throw std::invalid_argument("mixing needs at least one node");
  std::vector<std::vector<double>> P(static_cast<std::size_t>(n),
                                     std::vector<double>(static_cast<std::size_t>(n), 0.0));
  if (n == 1) {
    P[0][0] = 1.0;
    return P;
  }
  for (int i = 0; i < n; ++i) {
    P[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 0.5;
    P[static_cast<std::size_t>((i + 1) % n)][static_cast<std::size_t>(i)] = 0.5;
  }
  return P;
}

inline void validate_mixing(const std::vector<std::vector<double>>& P) {
  const std::size_t n = P.size();
  if (n == 0) throw std::invalid_argument("mixing matrix is empty");
  for (const auto& row : P)
    if (row.size() != n) throw std::invalid_argument("mixing matrix is not square");
  for (std::size_t j = 0; j < n; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (P[i][j] < 0.0) throw std::invalid_argument("mixing weights must be >= 0");
      col += P[i][j];
    }
    if (std::abs(col - 1.0) > 1e-12)
      throw std::invalid_argument("mixing matrix must be column-stochastic");
    if (P[j][j] <= 0.0) throw std::invalid_argument("mixing diagonal must be positive");
  }
  // Strong connectivity of the support graph, in both directions.
  auto reaches_all = [&](bool transpose) {
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v = 0; v < n; ++v) {
        const double w = transpose ? P[u][v] : P[v][u];
        if (w > 0.0 && !seen[v]) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == n;
  };
  if (!reaches_all(false) || !reaches_all(true))
    throw std::invalid_argument("mixing graph is not strongly connected");
}

// Push-sum subgradient descent on the penalized objective
//   sum_i f_i(x_i) + (penalty/2) ||Ax - b||^2,
// each agent carrying a value/weight pair over the full decision vector. The
// reported iterate takes each agent's own coordinate from its ratio estimate
// z_i = value_i / weight_i; the multiplier estimate is penalty * (A x - b).
inline SimResult gradient_push_run_full(const QuadraticProblem& q,
                                        const std::vector<std::vector<double>>& mixing,
                                        const StepSchedule& step, double penalty, long K,
                                        std::uint64_t seed, const InitSpec& init = {},
                                        double lambda_max_override = 0.0,
                                        const std::vector<std::vector<double>>* initial_estimates =
                                            nullptr) {
  if (K < 1) throw std::invalid_argument("iterations must be >= 1");
  if (penalty <= 0.0) throw std::invalid_argument("gradient-push penalty must be > 0");
  q.validate();
  validate_mixing(mixing);
  const int n = q.n_agents();
  const int m = q.n_constraints();
  if (mixing.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("mixing dimension does not match agent count");

  const auto x0 = initial_primal(q, init, seed);
  std::vector<std::vector<double>> value(static_cast<std::size_t>(n), x0);
  if (initial_estimates != nullptr) {
    if (initial_estimates->size() != static_cast<std::size_t>(n))
      throw std::invalid_argument("initial estimates must give one vector per agent");
    value = *initial_estimates;
  }
  std::vector<double> weight(static_cast<std::size_t>(n), 1.0);

  long scalars_per_tick = 0;  // each out-neighbor (excluding self) gets the vector + weight
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (j != i && mixing[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] > 0.0)
        scalars_per_tick += n + 1;

  SimResult result;
  RunTrace& t = result.trace;
  t.algorithm = algorithm_name(Algorithm::GradientPush);
  t.variant = "quadratic";
  t.seed = seed;
  t.iterations = K;
  t.x0 = x0;
  t.lambda0.assign(static_cast<std::size_t>(m), 0.0);

  std::vector<std::vector<double>> mixed(static_cast<std::size_t>(n),
                                         std::vector<double>(static_cast<std::size_t>(n), 0.0));
  std::vector<double> wmix(static_cast<std::size_t>(n), 0.0);
  std::vector<double> grad(static_cast<std::size_t>(n), 0.0);

  for (long k = 0; k < K; ++k) {
    const double ak = step.at(k);
    for (int i = 0; i < n; ++i) {
      auto& acc = mixed[static_cast<std::size_t>(i)];
      std::fill(acc.begin(), acc.end(), 0.0);
      double wa = 0.0;
      for (int j = 0; j < n; ++j) {
        const double pij = mixing[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (pij == 0.0) continue;
        const auto& vj = value[static_cast<std::size_t>(j)];
        for (int c = 0; c < n; ++c) acc[static_cast<std::size_t>(c)] += pij * vj[static_cast<std::size_t>(c)];
        wa += pij * weight[static_cast<std::size_t>(j)];
      }
      wmix[static_cast<std::size_t>(i)] = wa;
    }
    // Ratio estimate, then local penalized gradient step on the mixed value.
    std::vector<double> self_coord(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const double wi = wmix[ii];
      std::vector<double> z(static_cast<std::size_t>(n));
      for (int c = 0; c < n; ++c) z[static_cast<std::size_t>(c)] = mixed[ii][static_cast<std::size_t>(c)] / wi;
      self_coord[ii] = z[ii];
      // grad phi_i(z) = e_i (c_i z_i + d_i) + (penalty/n) A^T (A z - b)
      std::vector<double> res(static_cast<std::size_t>(m), 0.0);
      for (int r = 0; r < m; ++r) {
        double s = -q.rhs[static_cast<std::size_t>(r)];
        for (int c = 0; c < n; ++c)
          s += q.constraint[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] *
               z[static_cast<std::size_t>(c)];
        res[static_cast<std::size_t>(r)] = s;
      }
      for (int c = 0; c < n; ++c) {
        double g = 0.0;
        for (int r = 0; r < m; ++r)
          g += q.constraint[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] *
               res[static_cast<std::size_t>(r)];
        grad[static_cast<std::size_t>(c)] = (penalty / n) * g;
      }
      grad[ii] += q.quad_coeff[ii] * z[ii] + q.lin_coeff[ii];
      for (int c = 0; c < n; ++c)
        mixed[ii][static_cast<std::size_t>(c)] -= ak * grad[static_cast<std::size_t>(c)];
    }
    value = mixed;
    weight = wmix;

    TickRecord rec;
    rec.k = k;
    rec.alpha = ak;
    rec.beta = ak;
    rec.sent = scalars_per_tick;
    t.total_sent += rec.sent;
    t.ticks.push_back(rec);
    t.x.push_back(self_coord);
    std::vector<double> lam(static_cast<std::size_t>(m), 0.0);
    for (int r = 0; r < m; ++r) {
      double s = -q.rhs[static_cast<std::size_t>(r)];
      for (int c = 0; c < n; ++c)
        s += q.constraint[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] *
             self_coord[static_cast<std::size_t>(c)];
      lam[static_cast<std::size_t>(r)] = penalty * s;
    }
    t.lambda.push_back(std::move(lam));
  }
  // Final per-agent ratio estimates of the whole vector, for consensus diagnostics.
  result.agent_estimates.assign(static_cast<std::size_t>(n),
                                std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < n; ++c)
      result.agent_estimates[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] =
          value[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] /
          weight[static_cast<std::size_t>(i)];
  detail::annotate_quad_result(result, q, lambda_max_override);
  return result;
}

inline RunTrace gradient_push_run(const QuadraticProblem& q,
                                  const std::vector<std::vector<double>>& mixing,
                                  const StepSchedule& step, double penalty, long K,
                                  std::uint64_t seed, const InitSpec& init = {}) {
  return gradient_push_run_full(q, mixing, step, penalty, K, seed, init).trace;
}

}  // namespace dapdsco
