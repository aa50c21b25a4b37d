#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dapdsco {

// Step-size rule for the projected gradient steps. Diminishing schedules follow
// a/(k+1)^p; the default a = 1, p = 0.5 gives 1/sqrt(k+1).
struct StepSchedule {
  enum class Kind { Diminishing, Constant };

  Kind kind = Kind::Diminishing;
  double scale = 1.0;
  double exponent = 0.5;
  double value = 0.0;

  static StepSchedule diminishing(double scale = 1.0, double exponent = 0.5) {
    if (scale <= 0.0 || exponent <= 0.0)
      throw std::invalid_argument("diminishing schedule requires scale > 0 and exponent > 0");
    StepSchedule s;
    s.kind = Kind::Diminishing;
    s.scale = scale;
    s.exponent = exponent;
    return s;
  }

  static StepSchedule constant(double v) {
    if (v <= 0.0) throw std::invalid_argument("constant step must be > 0");
    StepSchedule s;
    s.kind = Kind::Constant;
    s.value = v;
    return s;
  }

  double at(long k) const {
    if (kind == Kind::Constant) return value;
    return scale / std::pow(static_cast<double>(k) + 1.0, exponent);
  }

  bool is_diminishing() const { return kind == Kind::Diminishing; }
};

inline double step_value(const StepSchedule& schedule, long k) {
  if (k < 0) throw std::invalid_argument("step_value: k must be >= 0");
  return schedule.at(k);
}

// Piecewise-linear multiplicative drift for one parameter class. Knots are
// (tick, scale) pairs with ascending ticks; values clamp at both ends and an
// empty knot list means no drift.
struct DriftSchedule {
  std::vector<std::pair<double, double>> knots;

  bool is_identity() const { return knots.empty(); }

  void validate() const {
    for (std::size_t i = 0; i < knots.size(); ++i) {
      if (!std::isfinite(knots[i].first) || !std::isfinite(knots[i].second))
        throw std::invalid_argument("drift schedule knot is not finite");
      if (i > 0 && knots[i].first <= knots[i - 1].first)
        throw std::invalid_argument("drift schedule knots must have strictly ascending ticks");
    }
  }

  double factor_at(double k) const {
    if (knots.empty()) return 1.0;
    if (k <= knots.front().first) return knots.front().second;
    if (k >= knots.back().first) return knots.back().second;
    for (std::size_t i = 1; i < knots.size(); ++i) {
      if (k <= knots[i].first) {
        const auto& [t0, v0] = knots[i - 1];
        const auto& [t1, v1] = knots[i];
        const double w = (k - t0) / (t1 - t0);
        return v0 + w * (v1 - v0);
      }
    }
    return knots.back().second;
  }

  double total_variation() const {
    double tv = 0.0;
    for (std::size_t i = 1; i < knots.size(); ++i)
      tv += std::abs(knots[i].second - knots[i - 1].second);
    return tv;
  }
};

struct DriftConfig {
  DriftSchedule cost;
  DriftSchedule demand;
  DriftSchedule capacity;
  // When set, the run refuses schedules whose weighted deviation series
  // sum_k alpha_k |factor(k) - 1| fails the numerical summability probe.
  bool summability_check = false;

  bool any_active() const {
    return !cost.is_identity() || !demand.is_identity() || !capacity.is_identity();
  }

  void validate() const {
    cost.validate();
    demand.validate();
    capacity.validate();
  }
};

}  // namespace dapdsco
