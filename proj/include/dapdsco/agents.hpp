#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "dapdsco/problem.hpp"
#include "dapdsco/schedule.hpp"

namespace dapdsco {

// Ring buffer of the tau+1 most recent (stamp, value) pairs received from one peer.
// A read of nominal age a at tick k returns the entry with the largest stamp
// <= k - a. If loss left nothing that old... everything retained is newer, the
// oldest retained entry is returned and the realized age reflects that. The buffer
// is seeded with the peer's initial value at stamp 0, so reads are defined from
// the first tick.
class StalenessBuffer {
 public:
  StalenessBuffer(int max_delay, double initial_value) {
    if (max_delay < 0) throw std::invalid_argument("buffer depth must be >= 0");
    slots_.assign(static_cast<std::size_t>(max_delay) + 1, Slot{});
    slots_[0] = Slot{0, initial_value};
  }

  // Store at index stamp mod (tau+1); never let an old stamp clobber a fresher one.
  void store(long stamp, double value) {
    Slot& s = slots_[static_cast<std::size_t>(stamp) % slots_.size()];
    if (stamp >= s.stamp) s = Slot{stamp, value};
  }

  struct Read {
    double value = 0.0;
    long effective_age = 0;
  };

  Read read(long now, long nominal_age) const {
    const long target = now - nominal_age;
    const Slot* best = nullptr;
    const Slot* oldest = nullptr;
    for (const Slot& s : slots_) {
      if (s.stamp < 0) continue;
      if (oldest == nullptr || s.stamp < oldest->stamp) oldest = &s;
      if (s.stamp <= target && (best == nullptr || s.stamp > best->stamp)) best = &s;
    }
    const Slot* pick = best != nullptr ? best : oldest;
    return Read{pick->value, now - pick->stamp};
  }

  int depth() const { return static_cast<int>(slots_.size()) - 1; }

 private:
  struct Slot {
    long stamp = -1;
    double value = 0.0;
  };
  std::vector<Slot> slots_;
};

// Owner of one flow variable. The price buffer tracks the downstream retailer's
// broadcasts; edges whose head is not a retailer keep the buffer at zero.
struct EdgeAgentState {
  int edge = -1;
  CostFunction cost;
  double capacity = 0.0;
  double flow = 0.0;
  StalenessBuffer price_buffer;
  long iteration = 0;

  EdgeAgentState(int edge_index, CostFunction c, double cap, double initial_flow,
                 int max_delay, double initial_price)
      : edge(edge_index),
        cost(c),
        capacity(cap),
        flow(initial_flow),
        price_buffer(max_delay, initial_price) {}
};

// Owner of one price variable, with one flow buffer per inbound edge.
struct RetailerAgentState {
  int retailer = -1;
  double demand = 0.0;
  double price = 0.0;
  std::vector<StalenessBuffer> flow_buffers;  // parallel to the inbound edge list
  long iteration = 0;
};

inline StalenessBuffer::Read edge_read_delayed_price(const EdgeAgentState& s, long nominal_age) {
  if (nominal_age < 0) throw std::invalid_argument("nominal age must be >= 0");
  return s.price_buffer.read(s.iteration, nominal_age);
}

// One projected-descent tick: g = f'(x) - lambda_tilde, then clamp to [0, u].
// Callers pass the cost/capacity view already adjusted for drift and observation
// noise; the update itself is pure in (state, inputs).
inline double edge_update(EdgeAgentState& s, double delayed_price, double alpha) {
  const double g = s.cost.gradient(s.flow) - delayed_price;
  s.flow = std::clamp(s.flow - alpha * g, 0.0, s.capacity);
  ++s.iteration;
  return s.flow;
}

// One projected-ascent tick: residual r = d - sum of delayed inbound flows,
// then lambda = max(0, lambda + beta r).
inline double retailer_update(RetailerAgentState& s, const std::vector<double>& delayed_flows,
                              double beta) {
  double h = 0.0;
  for (double f : delayed_flows) h += f;
  const double r = s.demand - h;
  s.price = std::max(0.0, s.price + beta * r);
  ++s.iteration;
  return s.price;
}

}  // namespace dapdsco
