#pragma once

#include <cmath>
#include <cstdint>

#include "chainshort/errors.hpp"

namespace chainshort {

/// Time/token consumption of one step, one shortcut, or one whole run.
struct ResourceDelta {
  double time_seconds = 0.0;
  std::int64_t tokens = 0;

  bool operator==(const ResourceDelta&) const = default;

  ResourceDelta& operator+=(const ResourceDelta& other) {
    time_seconds += other.time_seconds;
    tokens += other.tokens;
    return *this;
  }
  friend ResourceDelta operator+(ResourceDelta lhs, const ResourceDelta& rhs) {
    lhs += rhs;
    return lhs;
  }

  bool nonnegative() const {
    return std::isfinite(time_seconds) && time_seconds >= 0.0 && tokens >= 0;
  }
};

/// Allocated vs consumed time/tokens for a single run. Allocations are fixed
/// at construction; consumption only grows. Wall clock is never read here,
/// deltas come from the caller.
class Budget {
 public:
  Budget(double time_allocated, std::int64_t tokens_allocated)
      : time_allocated_(time_allocated), tokens_allocated_(tokens_allocated) {
    if (!(std::isfinite(time_allocated) && time_allocated > 0.0) ||
        tokens_allocated <= 0) {
      raise(Errc::invalid_budget, "allocations must be positive");
    }
  }

  void record(const ResourceDelta& delta) {
    if (!delta.nonnegative()) {
      raise(Errc::invalid_argument, "usage delta must be non-negative");
    }
    used_ += delta;
  }

  // Strict comparison against the remaining allowance: an estimate equal to
  // what is left is already infeasible.
  bool feasible(const ResourceDelta& estimate) const {
    return estimate.time_seconds < time_remaining() &&
           estimate.tokens < tokens_remaining();
  }

  // Inclusive at the boundary: landing exactly on the allocation counts as
  // over budget.
  bool exhausted() const {
    return used_.time_seconds >= time_allocated_ ||
           used_.tokens >= tokens_allocated_;
  }

  double time_allocated() const { return time_allocated_; }
  std::int64_t tokens_allocated() const { return tokens_allocated_; }
  double time_used() const { return used_.time_seconds; }
  std::int64_t tokens_used() const { return used_.tokens; }
  double time_remaining() const { return time_allocated_ - used_.time_seconds; }
  std::int64_t tokens_remaining() const { return tokens_allocated_ - used_.tokens; }
  const ResourceDelta& used() const { return used_; }

 private:
  double time_allocated_;
  std::int64_t tokens_allocated_;
  ResourceDelta used_;
};

}  // namespace chainshort
