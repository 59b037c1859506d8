#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "chainshort/embedding.hpp"
#include "chainshort/errors.hpp"
#include "chainshort/graph.hpp"
#include "chainshort/mining.hpp"

namespace chainshort {

struct ReferenceEntry {
  std::string task_id;
  std::string task_text;
  EmbeddingVector embedding;
};

/// Immutable lookup table of training-task texts; queries are linear scans,
/// which is exact and plenty fast at library scale.
struct ReferenceIndex {
  std::vector<ReferenceEntry> entries;
  std::size_t dimension = 0;
};

struct RetrievalHit {
  std::string task_id;
  double similarity = 0.0;
};

namespace detail {

inline ReferenceIndex build_index(
    const std::vector<std::pair<std::string, std::string>>& tasks,
    const Embedder& embedder) {
  if (tasks.empty()) {
    raise(Errc::index_error, "cannot index an empty task list");
  }
  ReferenceIndex index;
  std::set<std::string> seen;
  for (const auto& [task_id, task_text] : tasks) {
    if (!seen.insert(task_id).second) {
      raise(Errc::index_error, "duplicate task_id '" + task_id + "'");
    }
    ReferenceEntry entry;
    entry.task_id = task_id;
    entry.task_text = task_text;
    entry.embedding = embedder.embed(task_text);
    if (index.entries.empty()) {
      index.dimension = entry.embedding.components.size();
    } else if (entry.embedding.components.size() != index.dimension) {
      raise(Errc::index_error, "inconsistent embedding dimensions in index");
    }
    index.entries.push_back(std::move(entry));
  }
  return index;
}

}  // namespace detail

/// One index entry per training graph. The library rides along so a mismatch
/// between mined entries and the graphs they came from fails the build.
inline ReferenceIndex index_tasks(const ShortcutLibrary& library,
                                  const std::vector<TaskGraph>& graphs,
                                  const Embedder& embedder) {
  if (graphs.empty()) {
    raise(Errc::index_error, "cannot index an empty graph list");
  }
  std::set<std::string> graph_ids;
  std::vector<std::pair<std::string, std::string>> tasks;
  for (const TaskGraph& graph : graphs) {
    graph_ids.insert(graph.task_id);
    tasks.emplace_back(graph.task_id, graph.task_text);
  }
  for (const Shortcut& entry : library.entries) {
    if (!graph_ids.count(entry.origin_task_id)) {
      raise(Errc::index_error, "library entry cites unknown task '" +
                                   entry.origin_task_id + "'");
    }
  }
  return detail::build_index(tasks, embedder);
}

/// Rebuilds the index straight from a persisted library: the entries carry
/// their origin task texts, so no separate index file exists.
inline ReferenceIndex index_from_library(const ShortcutLibrary& library,
                                         const Embedder& embedder) {
  std::vector<std::pair<std::string, std::string>> tasks;
  std::set<std::string> seen;
  for (const Shortcut& entry : library.entries) {
    if (seen.insert(entry.origin_task_id).second) {
      tasks.emplace_back(entry.origin_task_id, entry.origin_task_text);
    }
  }
  if (tasks.empty()) {
    raise(Errc::index_error, "cannot index an empty library");
  }
  return detail::build_index(tasks, embedder);
}

/// Top-k training tasks by cosine similarity to the query, descending;
/// similarity ties are broken by ascending task_id so ordering is total.
inline std::vector<RetrievalHit> retrieve_reference(const ReferenceIndex& index,
                                                    const std::string& task_text,
                                                    std::size_t k,
                                                    const Embedder& embedder) {
  if (k == 0) {
    raise(Errc::invalid_argument, "retrieval needs k >= 1");
  }
  if (index.entries.empty()) {
    raise(Errc::invalid_argument, "retrieval over an empty index");
  }
  const EmbeddingVector query = embedder.embed(task_text);
  std::vector<RetrievalHit> hits;
  hits.reserve(index.entries.size());
  for (const ReferenceEntry& entry : index.entries) {
    hits.push_back({entry.task_id, cosine(query, entry.embedding)});
  }
  std::sort(hits.begin(), hits.end(),
            [](const RetrievalHit& a, const RetrievalHit& b) {
              if (a.similarity != b.similarity) {
                return a.similarity > b.similarity;
              }
              return a.task_id < b.task_id;
            });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

/// Every library entry mined from one task, in library order.
inline std::vector<Shortcut> shortcuts_for_task(const ShortcutLibrary& library,
                                                const std::string& task_id) {
  std::vector<Shortcut> shortcuts;
  for (const Shortcut& entry : library.entries) {
    if (entry.origin_task_id == task_id) shortcuts.push_back(entry);
  }
  return shortcuts;
}

}  // namespace chainshort
