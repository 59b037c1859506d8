#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "chainshort/errors.hpp"
#include "chainshort/graph.hpp"

namespace chainshort {

/// Sorted multiset of every mined shortcut's time and token consumption.
/// Backs the strict-rank percentile queries; duplicates are kept.
struct StatsCorpus {
  std::vector<double> times;         // ascending
  std::vector<std::int64_t> tokens;  // ascending
  std::size_t size = 0;

  bool operator==(const StatsCorpus&) const = default;
  bool empty() const { return size == 0; }
};

inline StatsCorpus build_stats_corpus(const std::vector<Shortcut>& shortcuts) {
  if (shortcuts.empty()) {
    raise(Errc::empty_corpus, "cannot build a stats corpus from zero shortcuts");
  }
  StatsCorpus corpus;
  corpus.times.reserve(shortcuts.size());
  corpus.tokens.reserve(shortcuts.size());
  for (const Shortcut& s : shortcuts) {
    corpus.times.push_back(s.consumption.time_seconds);
    corpus.tokens.push_back(s.consumption.tokens);
  }
  std::sort(corpus.times.begin(), corpus.times.end());
  std::sort(corpus.tokens.begin(), corpus.tokens.end());
  corpus.size = shortcuts.size();
  return corpus;
}

}  // namespace chainshort
