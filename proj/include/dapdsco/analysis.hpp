#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dapdsco/problem.hpp"
#include "dapdsco/schedule.hpp"
#include "dapdsco/trace.hpp"

namespace dapdsco {

// Instance-derived bounds for the descent checkers, kept explicit (no renamed or
// absorbed constants) so the per-tick inequality stays falsifiable:
//   G   >= ||primal gradient|| anywhere in box x dual box, l2-aggregated per edge
//   D   >= ||dual residual|| over the flow box, l2-aggregated per retailer
//   U   =  sqrt(|E|) * u_max, diameter bound of the flow box
//   lambda_max: dual box radius, default 2*max(1, max_i lambda*_i)
struct TheoryConstants {
  double G = 0.0;
  double D = 0.0;
  double U = 0.0;
  double lambda_max = 0.0;

  static TheoryConstants compute(const SupplyChainProblem& p, const SaddlePoint& saddle,
                                 double lambda_max_override = 0.0) {
    if (p.has_quadratic_costs())
      throw std::invalid_argument("theory constants are defined for linear edge costs");
    TheoryConstants c;
    double peak_price = 0.0;
    for (double v : saddle.lambda_star) peak_price = std::max(peak_price, v);
    c.lambda_max = lambda_max_override > 0.0 ? lambda_max_override
                                             : 2.0 * std::max(1.0, peak_price);
    double g_coord = 0.0, u_max = 0.0;
    for (int e = 0; e < p.num_edges(); ++e) {
      g_coord = std::max(g_coord, std::max(p.cost(e), c.lambda_max - p.cost(e)));
      u_max = std::max(u_max, p.capacity(e));
    }
    double d_coord = 0.0;
    for (int r = 0; r < p.num_retailers(); ++r)
      d_coord = std::max(d_coord,
                         std::max(p.demand(r), p.inbound_capacity(r) - p.demand(r)));
    const double root_e = std::sqrt(static_cast<double>(p.num_edges()));
    const double root_r = std::sqrt(static_cast<double>(std::max(1, p.num_retailers())));
    c.G = root_e * g_coord;
    c.D = root_r * d_coord;
    c.U = root_e * u_max;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Gap and violation
// ---------------------------------------------------------------------------

// max over lambda in [0, lambda_max]^R of L(x, lambda): each coordinate pushes to
// the box corner indicated by the sign of its residual (ties contribute zero).
inline double gap_max_part(const SupplyChainProblem& p, const FlowVector& x, double lambda_max) {
  double v = total_cost(p, x);
  for (int r = 0; r < p.num_retailers(); ++r) {
    const double residual = p.demand(r) - inbound_flow(p, x, r);
    if (residual > 0.0) v += lambda_max * residual;
  }
  return v;
}

// min over x in the capacity box of L(x, lambda), separable per edge. Linear
// edges: capacity when the reduced cost is negative, zero otherwise (ties to 0);
// quadratic edges: the clamped stationary point.
inline double gap_min_part(const SupplyChainProblem& p, const PriceVector& lambda) {
  double v = 0.0;
  for (int e = 0; e < p.num_edges(); ++e) {
    const int r = p.edge_retailer(e);
    const double price = r >= 0 ? lambda[static_cast<std::size_t>(r)] : 0.0;
    const CostFunction f = p.edge_cost_fn(e);
    double x = 0.0;
    if (f.kind == CostKind::Linear) {
      x = (f.linear - price < 0.0) ? p.capacity(e) : 0.0;
    } else {
      x = std::clamp((price - f.linear) / f.curvature, 0.0, p.capacity(e));
    }
    v += f.value(x) - price * x;
  }
  for (int r = 0; r < p.num_retailers(); ++r)
    v += lambda[static_cast<std::size_t>(r)] * p.demand(r);
  return v;
}

inline double duality_gap(const SupplyChainProblem& p, const FlowVector& x,
                          const PriceVector& lambda, double lambda_max) {
  if (lambda_max < 0.0) throw std::invalid_argument("lambda_max must be >= 0");
  return gap_max_part(p, x, lambda_max) - gap_min_part(p, lambda);
}

// Quadratic variant: the max is over the l2 ball ||lambda|| <= lambda_max (duals of
// equality constraints are sign-free), the min is the unconstrained per-agent
// quadratic minimizer.
inline double duality_gap(const QuadraticProblem& q, const std::vector<double>& x,
                          const std::vector<double>& lambda, double lambda_max) {
  if (lambda_max < 0.0) throw std::invalid_argument("lambda_max must be >= 0");
  const double maxpart = q.objective(x) + lambda_max * norm2(q.residual(x));
  std::vector<double> xhat(static_cast<std::size_t>(q.n_agents()));
  for (int i = 0; i < q.n_agents(); ++i) {
    double at_lambda = 0.0;
    for (int row = 0; row < q.n_constraints(); ++row)
      at_lambda += q.constraint[static_cast<std::size_t>(row)][static_cast<std::size_t>(i)] *
                   lambda[static_cast<std::size_t>(row)];
    xhat[static_cast<std::size_t>(i)] =
        -(q.lin_coeff[static_cast<std::size_t>(i)] + at_lambda) /
        q.quad_coeff[static_cast<std::size_t>(i)];
  }
  const double minpart = q.lagrangian(xhat, lambda);
  return maxpart - minpart;
}

// Norm of the violated part only: unmet demand for the flow problem (oversupply is
// feasible), full equality residual for the quadratic variant.
inline double constraint_violation(const SupplyChainProblem& p, const FlowVector& x) {
  double s = 0.0;
  for (int r = 0; r < p.num_retailers(); ++r) {
    const double short_fall = std::max(0.0, p.demand(r) - inbound_flow(p, x, r));
    s += short_fall * short_fall;
  }
  return std::sqrt(s);
}

inline double constraint_violation(const QuadraticProblem& q, const std::vector<double>& x) {
  return norm2(q.residual(x));
}

// ---------------------------------------------------------------------------
// Ergodic averages
// ---------------------------------------------------------------------------

inline std::pair<std::vector<double>, std::vector<double>> ergodic_average(const RunTrace& t,
                                                                           long K) {
  if (K <= 0) throw std::invalid_argument("ergodic average requires K >= 1");
  if (K > t.record_count()) throw std::invalid_argument("trace has fewer than K records");
  std::vector<double> xbar(t.x0.size(), 0.0), lbar(t.lambda0.size(), 0.0);
  for (long k = 0; k < K; ++k) {
    const auto& xk = t.x[static_cast<std::size_t>(k)];
    const auto& lk = t.lambda[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < xbar.size(); ++i) xbar[i] += xk[i];
    for (std::size_t i = 0; i < lbar.size(); ++i) lbar[i] += lk[i];
  }
  for (double& v : xbar) v /= static_cast<double>(K);
  for (double& v : lbar) v /= static_cast<double>(K);
  return {std::move(xbar), std::move(lbar)};
}

// ---------------------------------------------------------------------------
// Lyapunov descent check
// ---------------------------------------------------------------------------

struct LyapunovReport {
  long checked = 0;
  long violations = 0;
  double worst_slack = -std::numeric_limits<double>::infinity();  // max lhs-rhs, <= 0 is clean
  long first_violation = -1;
  // Rearranged supermartingale trend: max single-step increase of
  // V^k + sum_{s<k}(u_s - E_s); equals worst_slack by construction.
  double supermartingale_max_increase = -std::numeric_limits<double>::infinity();
  bool passed(double tol = 1e-9) const { return violations == 0 && checked > 0 && tol >= 0; }
};

// Verifies V^{k+1} - V^k <= -2 alpha_k dx_k - 2 beta_k dl_k + E_k per tick, from the
// annotated columns. Tolerance absorbs double-precision accumulation only.
inline LyapunovReport lyapunov_descent_check_columns(
    const std::vector<double>& V_pre, const std::vector<double>& V_post,
    const std::vector<double>& alpha, const std::vector<double>& beta,
    const std::vector<double>& delta_x, const std::vector<double>& delta_lambda,
    const std::vector<double>& E, double tol = 1e-9) {
  LyapunovReport rep;
  const std::size_t n = V_pre.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (std::isnan(V_pre[k]) || std::isnan(E[k])) continue;
    const double lhs = V_post[k] - V_pre[k];
    const double rhs = -2.0 * alpha[k] * delta_x[k] - 2.0 * beta[k] * delta_lambda[k] + E[k];
    const double slack = lhs - rhs;
    rep.worst_slack = std::max(rep.worst_slack, slack);
    ++rep.checked;
    if (slack > tol) {
      ++rep.violations;
      if (rep.first_violation < 0) rep.first_violation = static_cast<long>(k);
    }
  }
  rep.supermartingale_max_increase = rep.worst_slack;
  return rep;
}

struct AnnotationInputs {
  const SupplyChainProblem* dag = nullptr;
  const QuadraticProblem* quad = nullptr;
  const SaddlePoint* saddle = nullptr;
  const TheoryConstants* constants = nullptr;  // DAG only
  double lambda_max = 0.0;
};

// Fills the metric columns of a trace from its stored iterates: gap/violation and
// running ergodic gap at the post-update iterate, Lyapunov quantities against the
// oracle saddle point, and the error envelope E_k when constants are available.
inline void annotate_trace(RunTrace& t, const AnnotationInputs& in) {
  const bool dag = in.dag != nullptr;
  if (dag == (in.quad != nullptr))
    throw std::invalid_argument("annotate_trace: exactly one problem variant required");
  const double lmax =
      in.lambda_max > 0.0
          ? in.lambda_max
          : (in.constants != nullptr ? in.constants->lambda_max : 0.0);

  double saddle_value = 0.0;
  if (in.saddle != nullptr)
    saddle_value = dag ? lagrangian(*in.dag, in.saddle->x_star, in.saddle->lambda_star)
                       : in.quad->lagrangian(in.saddle->x_star, in.saddle->lambda_star);

  std::vector<double> x_sum(t.x0.size(), 0.0), l_sum(t.lambda0.size(), 0.0);
  std::vector<double> x_bar(t.x0.size()), l_bar(t.lambda0.size());

  for (std::size_t k = 0; k < t.ticks.size(); ++k) {
    TickRecord& r = t.ticks[k];
    const auto& x_post = t.x[k];
    const auto& l_post = t.lambda[k];
    const auto& x_pre = t.iterate_x(static_cast<long>(k));
    const auto& l_pre = t.iterate_lambda(static_cast<long>(k));

    r.violation = dag ? constraint_violation(*in.dag, x_post)
                      : constraint_violation(*in.quad, x_post);
    if (lmax > 0.0) {
      r.gap = dag ? duality_gap(*in.dag, x_post, l_post, lmax)
                  : duality_gap(*in.quad, x_post, l_post, lmax);
      for (std::size_t i = 0; i < x_sum.size(); ++i) {
        x_sum[i] += x_post[i];
        x_bar[i] = x_sum[i] / static_cast<double>(k + 1);
      }
      for (std::size_t i = 0; i < l_sum.size(); ++i) {
        l_sum[i] += l_post[i];
        l_bar[i] = l_sum[i] / static_cast<double>(k + 1);
      }
      r.ergodic_gap = dag ? duality_gap(*in.dag, x_bar, l_bar, lmax)
                          : duality_gap(*in.quad, x_bar, l_bar, lmax);
    }

    if (in.saddle != nullptr) {
      r.V_pre = squared_distance(x_pre, in.saddle->x_star) +
                squared_distance(l_pre, in.saddle->lambda_star);
      r.V_post = squared_distance(x_post, in.saddle->x_star) +
                 squared_distance(l_post, in.saddle->lambda_star);
      if (dag) {
        r.delta_x = lagrangian(*in.dag, x_pre, in.saddle->lambda_star) - saddle_value;
        r.delta_lambda = saddle_value - lagrangian(*in.dag, in.saddle->x_star, l_pre);
      } else {
        r.delta_x = in.quad->lagrangian(x_pre, in.saddle->lambda_star) - saddle_value;
        r.delta_lambda = saddle_value - in.quad->lagrangian(in.saddle->x_star, l_pre);
      }
      if (in.constants != nullptr) {
        const TheoryConstants& c = *in.constants;
        r.E = r.alpha * r.alpha * c.G * c.G + r.beta * r.beta * c.D * c.D +
              2.0 * c.G * c.U * r.alpha * r.S + 2.0 * c.D * c.lambda_max * r.beta * r.T;
      }
    }
  }
}

inline LyapunovReport lyapunov_descent_check(const RunTrace& t, double tol = 1e-9) {
  std::vector<double> vp, vq, a, b, dx, dl, e;
  vp.reserve(t.ticks.size());
  for (const auto& r : t.ticks) {
    vp.push_back(r.V_pre);
    vq.push_back(r.V_post);
    a.push_back(r.alpha);
    b.push_back(r.beta);
    dx.push_back(r.delta_x);
    dl.push_back(r.delta_lambda);
    e.push_back(r.E);
  }
  return lyapunov_descent_check_columns(vp, vq, a, b, dx, dl, e, tol);
}

// ---------------------------------------------------------------------------
// Error-series summability
// ---------------------------------------------------------------------------

struct ErrorSeriesReport {
  double sum_half = 0.0;
  double sum_full = 0.0;
  double tail_increment = 0.0;
  double tail_ratio = 1.0;
  bool diminishing = false;
  bool summable = false;  // diminishing schedule and tail below 5% of the total
  // Empirical max of S_k * sqrt(k+1) over the two halves; the proof's o(k^{-1/2})
  // claim would need the late max to shrink.
  double s_scaled_early_max = 0.0;
  double s_scaled_late_max = 0.0;
};

inline ErrorSeriesReport error_series_check(const std::vector<double>& E,
                                            const std::vector<double>& S,
                                            bool diminishing_schedule) {
  ErrorSeriesReport rep;
  rep.diminishing = diminishing_schedule;
  const std::size_t n = E.size();
  const std::size_t half = n / 2;
  for (std::size_t k = 0; k < n; ++k) {
    const double e = std::isnan(E[k]) ? 0.0 : E[k];
    rep.sum_full += e;
    if (k < half) rep.sum_half += e;
    const double scaled = S[k] * std::sqrt(static_cast<double>(k) + 1.0);
    if (k < half)
      rep.s_scaled_early_max = std::max(rep.s_scaled_early_max, scaled);
    else
      rep.s_scaled_late_max = std::max(rep.s_scaled_late_max, scaled);
  }
  rep.tail_increment = rep.sum_full - rep.sum_half;
  rep.tail_ratio = rep.sum_full > 0.0 ? rep.tail_increment / rep.sum_full : 0.0;
  rep.summable = rep.diminishing && rep.tail_ratio < 0.05;
  return rep;
}

inline ErrorSeriesReport error_series_check(const RunTrace& t, bool diminishing_schedule) {
  std::vector<double> e, s;
  e.reserve(t.ticks.size());
  for (const auto& r : t.ticks) {
    e.push_back(r.E);
    s.push_back(r.S);
  }
  return error_series_check(e, s, diminishing_schedule);
}

// Drift summability probe: partial sums of alpha_k * |factor(k) - 1| * magnitude.
struct DriftSeriesReport {
  double sum_half = 0.0;
  double sum_full = 0.0;
  double tail_increment = 0.0;
  bool summable = false;
};

inline DriftSeriesReport drift_series_check(const StepSchedule& alpha, const DriftSchedule& drift,
                                            double magnitude, long K) {
  DriftSeriesReport rep;
  const long half = K / 2;
  for (long k = 0; k < K; ++k) {
    const double term =
        alpha.at(k) * std::abs(drift.factor_at(static_cast<double>(k)) - 1.0) * magnitude;
    rep.sum_full += term;
    if (k < half) rep.sum_half += term;
  }
  rep.tail_increment = rep.sum_full - rep.sum_half;
  rep.summable = rep.tail_increment < std::max(1e-3, 0.05 * rep.sum_full);
  return rep;
}

// ---------------------------------------------------------------------------
// Rate-slope fit and convergence time
// ---------------------------------------------------------------------------

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // rms of log-space fit residuals
  long points = 0;
  bool clipped = false;  // some gaps sat at the numeric floor
};

inline SlopeFit fit_log_slope(const std::vector<std::pair<double, double>>& k_gap) {
  if (k_gap.size() < 2) throw std::invalid_argument("slope fit needs at least two points");
  SlopeFit fit;
  fit.points = static_cast<long>(k_gap.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<std::pair<double, double>> logs;
  for (auto [k, gap] : k_gap) {
    if (gap < 1e-12) {
      gap = 1e-12;
      fit.clipped = true;
    }
    const double lx = std::log(k), ly = std::log(gap);
    logs.emplace_back(lx, ly);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(k_gap.size());
  const double denom = n * sxx - sx * sx;
  if (denom <= 0.0) throw std::invalid_argument("slope fit: degenerate abscissae");
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double rss = 0.0;
  for (auto [lx, ly] : logs) {
    const double r = ly - (fit.intercept + fit.slope * lx);
    rss += r * r;
  }
  fit.residual = std::sqrt(rss / n);
  return fit;
}

// Slope of log(ergodic gap) against log k, sampled one point per decade starting
// at k = 100. Requires at least three decades of iterations.
inline SlopeFit rate_slope(const RunTrace& t) {
  std::vector<std::pair<double, double>> pts;
  for (long k = 100; k <= t.record_count(); k *= 10) {
    const double g = t.ticks[static_cast<std::size_t>(k - 1)].ergodic_gap;
    if (std::isnan(g)) throw std::invalid_argument("rate_slope: trace lacks ergodic gap values");
    pts.emplace_back(static_cast<double>(k), g);
  }
  if (pts.size() < 3)
    throw std::invalid_argument("rate_slope needs at least three decades of iterations");
  return fit_log_slope(pts);
}

// Smallest 1-based iterate index whose gap and violation both clear the thresholds.
inline std::optional<long> convergence_time(const RunTrace& t, double gap_thresh,
                                            double viol_thresh) {
  if (gap_thresh <= 0.0 || viol_thresh <= 0.0)
    throw std::invalid_argument("convergence thresholds must be > 0");
  for (const auto& r : t.ticks)
    if (!std::isnan(r.gap) && r.gap < gap_thresh && r.violation < viol_thresh)
      return r.k + 1;
  return std::nullopt;
}

inline std::optional<long> convergence_time(const std::vector<double>& gap,
                                            const std::vector<double>& violation,
                                            double gap_thresh, double viol_thresh) {
  if (gap_thresh <= 0.0 || viol_thresh <= 0.0)
    throw std::invalid_argument("convergence thresholds must be > 0");
  for (std::size_t k = 0; k < gap.size(); ++k)
    if (!std::isnan(gap[k]) && gap[k] < gap_thresh && violation[k] < viol_thresh)
      return static_cast<long>(k) + 1;
  return std::nullopt;
}

// K = ceil((C / eps)^2) with C = V0 + G^2 + D^2 + delay_constant.
inline long iteration_budget_for(double eps, const TheoryConstants& c, double V0,
                                 double delay_constant = 0.0) {
  if (eps <= 0.0) throw std::invalid_argument("target accuracy must be > 0");
  const double C = V0 + c.G * c.G + c.D * c.D + delay_constant;
  return static_cast<long>(std::ceil((C / eps) * (C / eps)));
}

// Total of the delay-driven envelope terms over a recorded run; the constant the
// iteration budget adds on top of V0 + G^2 + D^2.
inline double delay_error_constant(const RunTrace& t, const TheoryConstants& c) {
  double s = 0.0;
  for (const auto& r : t.ticks)
    s += 2.0 * c.G * c.U * r.alpha * r.S + 2.0 * c.D * c.lambda_max * r.beta * r.T;
  return s;
}

}  // namespace dapdsco
