#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "chainshort/embedding.hpp"
#include "chainshort/errors.hpp"
#include "chainshort/graph.hpp"
#include "chainshort/resources.hpp"
#include "chainshort/stats.hpp"

namespace chainshort {

/// weight = sim(node, task) * sim(node, final) * compilable.
/// Negative cosines are kept as-is; a failed compile zeroes the weight.
struct NodeWeight {
  std::size_t node_index = 0;
  double sim_task = 0.0;
  double sim_final = 0.0;
  int compilable = 0;
  double weight = 0.0;
};

/// cost = harmonic mean of the two strict percentile ranks.
struct CostBreakdown {
  double alpha = 0.0;
  double beta = 0.0;
  double cost = 0.0;
};

/// gamma = harmonic mean of fractional time and token consumption; grows
/// from 0 (fresh budget) toward (and possibly past) 1.
struct EmergencyFactor {
  double gamma_t = 0.0;
  double gamma_tau = 0.0;
  double gamma = 0.0;
};

/// 2ab/(a+b), defined as 0 when both arguments are 0.
inline double harmonic_mean(double a, double b) {
  if (a < 0.0 || b < 0.0) {
    raise(Errc::invalid_argument, "harmonic_mean requires non-negative inputs");
  }
  const double sum = a + b;
  if (sum == 0.0) return 0.0;
  return 2.0 * a * b / sum;
}

inline NodeWeight node_weight(const SolutionState& solution,
                              const EmbeddingVector& task_embedding,
                              const EmbeddingVector& final_embedding) {
  if (!solution.embedding.has_value()) {
    raise(Errc::missing_annotation,
          "node " + std::to_string(solution.index) + " has no embedding");
  }
  if (!solution.compilable.has_value()) {
    raise(Errc::missing_annotation,
          "node " + std::to_string(solution.index) + " has no compile flag");
  }
  NodeWeight w;
  w.node_index = solution.index;
  w.sim_task = cosine(*solution.embedding, task_embedding);
  w.sim_final = cosine(*solution.embedding, final_embedding);
  w.compilable = *solution.compilable ? 1 : 0;
  w.weight = w.sim_task * w.sim_final * static_cast<double>(w.compilable);
  return w;
}

/// Incremental benefit of jumping from the source node to the target node.
inline double shortcut_value(const NodeWeight& target, const NodeWeight& source) {
  return target.weight - source.weight;
}

/// Strict-rank percentiles of (t0, tau0) within the corpus: the fraction of
/// recorded values strictly below the query, per dimension.
inline CostBreakdown percentile_ranks(const StatsCorpus& corpus, double t0,
                                      std::int64_t tau0) {
  if (corpus.empty()) {
    raise(Errc::empty_corpus, "percentile query against an empty corpus");
  }
  CostBreakdown out;
  const double denom = static_cast<double>(corpus.size);
  out.alpha = static_cast<double>(
                  std::lower_bound(corpus.times.begin(), corpus.times.end(), t0) -
                  corpus.times.begin()) /
              denom;
  out.beta = static_cast<double>(std::lower_bound(corpus.tokens.begin(),
                                                  corpus.tokens.end(), tau0) -
                                 corpus.tokens.begin()) /
             denom;
  out.cost = harmonic_mean(out.alpha, out.beta);
  return out;
}

inline CostBreakdown shortcut_cost(const StatsCorpus& corpus,
                                   const ResourceDelta& consumption) {
  return percentile_ranks(corpus, consumption.time_seconds, consumption.tokens);
}

/// Fractional budget consumption, harmonically combined. May exceed 1 when
/// consumption overshoots the allocation.
inline EmergencyFactor emergency_factor(const Budget& budget) {
  EmergencyFactor e;
  e.gamma_t = budget.time_used() / budget.time_allocated();
  e.gamma_tau = static_cast<double>(budget.tokens_used()) /
                static_cast<double>(budget.tokens_allocated());
  e.gamma = harmonic_mean(e.gamma_t, e.gamma_tau);
  return e;
}

/// Selection utility: U = (1 - gamma) * value - gamma * cost, with gamma
/// clamped to [0, 1]. Value dominates while resources are abundant, cost
/// dominates as they run out.
inline double utility(double value, double cost, double gamma) {
  const double g = std::clamp(gamma, 0.0, 1.0);
  return (1.0 - g) * value - g * cost;
}

}  // namespace chainshort
