#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chainshort/embedding.hpp"
#include "chainshort/errors.hpp"
#include "chainshort/resources.hpp"

namespace chainshort {

struct FileEntry {
  std::string path;  // relative, no ".." segments
  std::string body;

  bool operator==(const FileEntry&) const = default;
};

/// One node of the chain: the full solution text at that point, its file
/// decomposition, and the annotations (embedding, compile flag) computed
/// lazily by the mining/run pipelines. Embeddings are derived state and are
/// never persisted; equality covers persisted fields only.
struct SolutionState {
  std::size_t index = 0;
  std::string content;            // flat blob; empty for the initial node
  std::vector<FileEntry> files;   // metrics and the sandbox operate on these
  std::optional<EmbeddingVector> embedding;
  std::optional<bool> compilable;

  bool operator==(const SolutionState& other) const {
    return index == other.index && content == other.content &&
           files == other.files && compilable == other.compilable;
  }
};

/// Where an applied shortcut came from; attached to the inference edge that
/// realized it.
struct ShortcutOrigin {
  std::string task_id;
  std::size_t from_index = 0;
  std::size_t to_index = 0;

  bool operator==(const ShortcutOrigin&) const = default;
};

/// Ordinary edge: connects adjacent nodes only.
struct InstructionEdge {
  std::size_t from_index = 0;
  std::size_t to_index = 0;
  std::string instruction;
  ResourceDelta consumption;
  std::optional<ShortcutOrigin> shortcut_origin;

  bool operator==(const InstructionEdge&) const = default;
};

/// Forward jump mined from a historical trajectory. consumption holds the
/// measured synthesis cost, which doubles as the runtime feasibility
/// estimate; value is filled by precompute_values.
struct Shortcut {
  std::size_t from_index = 0;
  std::size_t to_index = 0;
  std::string instruction;
  ResourceDelta consumption;
  std::optional<double> value;
  std::string origin_task_id;
  std::string origin_task_text;
  std::size_t origin_edge_count = 0;

  bool operator==(const Shortcut&) const = default;
};

/// The directed chain of solution states for one task, plus any shortcut
/// metadata mined over it. Nodes are dense: nodes[k].index == k.
struct TaskGraph {
  std::string task_id;
  std::string task_text;
  std::vector<SolutionState> nodes;
  std::vector<InstructionEdge> edges;
  std::vector<Shortcut> shortcuts;

  bool operator==(const TaskGraph&) const = default;
};

/// Fresh graph holding only the empty initial node.
inline TaskGraph new_graph(const std::string& task_id,
                           const std::string& task_text) {
  if (task_text.empty()) {
    raise(Errc::invalid_argument, "task_text must be non-empty");
  }
  TaskGraph graph;
  graph.task_id = task_id;
  graph.task_text = task_text;
  graph.nodes.push_back(SolutionState{});
  return graph;
}

/// Appends one node and the adjacent edge leading to it; returns the new
/// node's index.
inline std::size_t append_step(TaskGraph& graph, const std::string& instruction,
                               SolutionState solution,
                               const ResourceDelta& usage,
                               std::optional<ShortcutOrigin> origin = {}) {
  const std::size_t new_index = graph.nodes.size();
  solution.index = new_index;
  InstructionEdge edge;
  edge.from_index = new_index - 1;
  edge.to_index = new_index;
  edge.instruction = instruction;
  edge.consumption = usage;
  edge.shortcut_origin = std::move(origin);
  graph.nodes.push_back(std::move(solution));
  graph.edges.push_back(std::move(edge));
  return new_index;
}

/// Records shortcut metadata between two existing nodes; must point forward.
inline Shortcut& add_shortcut(TaskGraph& graph, std::size_t i, std::size_t j,
                              const std::string& instruction,
                              const ResourceDelta& consumption) {
  if (i >= j) {
    raise(Errc::forward_violation,
          "shortcut must point forward (got " + std::to_string(i) + " -> " +
              std::to_string(j) + ")");
  }
  if (j >= graph.nodes.size()) {
    raise(Errc::unknown_node, "node " + std::to_string(j) + " does not exist");
  }
  if (!consumption.nonnegative()) {
    raise(Errc::invalid_argument, "shortcut consumption must be non-negative");
  }
  Shortcut shortcut;
  shortcut.from_index = i;
  shortcut.to_index = j;
  shortcut.instruction = instruction;
  shortcut.consumption = consumption;
  shortcut.origin_task_id = graph.task_id;
  shortcut.origin_task_text = graph.task_text;
  shortcut.origin_edge_count = graph.edges.size();
  graph.shortcuts.push_back(std::move(shortcut));
  return graph.shortcuts.back();
}

/// Interaction rounds performed so far. Shortcut metadata never counts;
/// applied shortcuts show up as ordinary appended edges.
inline std::size_t edge_count(const TaskGraph& graph) {
  return graph.edges.size();
}

inline const SolutionState& final_node(const TaskGraph& graph) {
  return graph.nodes.back();
}

namespace detail {

inline bool line_starts_fence(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() &&
         (line[i] == ' ' || line[i] == '\t')) ++i;
  return line.substr(i).rfind("```", 0) == 0;
}

}  // namespace detail

/// Splits agent-produced solution text into files. Blocks open with a line
/// "FILE: <relative path>"; an optional ``` fence directly around a block
/// body is stripped. Text without any FILE marker becomes a single file
/// under default_filename. Empty text yields no files.
inline std::vector<FileEntry> extract_files(const std::string& content,
                                            const std::string& default_filename) {
  std::vector<FileEntry> files;
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string::npos) {
      lines.push_back(content.substr(pos));
      break;
    }
    lines.push_back(content.substr(pos, end - pos));
    pos = end + 1;
  }

  constexpr std::string_view kMarker = "FILE:";
  std::optional<std::string> current_path;
  std::vector<std::string> body;

  auto flush = [&]() {
    if (!current_path) return;
    // Trim a fence pair hugging the body.
    std::size_t first = 0, last = body.size();
    while (first < last && body[first].empty()) ++first;
    while (last > first && body[last - 1].empty()) --last;
    if (last - first >= 2 && detail::line_starts_fence(body[first]) &&
        detail::line_starts_fence(body[last - 1])) {
      ++first;
      --last;
    }
    std::string text;
    for (std::size_t i = first; i < last; ++i) {
      text += body[i];
      text += '\n';
    }
    files.push_back(FileEntry{*current_path, std::move(text)});
    current_path.reset();
    body.clear();
  };

  for (const std::string& line : lines) {
    if (line.rfind(kMarker, 0) == 0) {
      flush();
      std::string path = line.substr(kMarker.size());
      std::size_t b = path.find_first_not_of(" \t");
      std::size_t e = path.find_last_not_of(" \t\r");
      current_path = (b == std::string::npos)
                         ? std::string()
                         : path.substr(b, e - b + 1);
      if (current_path->empty()) current_path = default_filename;
      continue;
    }
    if (current_path) body.push_back(line);
  }
  flush();

  if (files.empty()) {
    bool blank = true;
    for (char c : content) {
      if (!std::isspace(static_cast<unsigned char>(c))) {
        blank = false;
        break;
      }
    }
    if (!blank) files.push_back(FileEntry{default_filename, content});
  }
  return files;
}

/// Builds a solution node (index assigned on append) from raw agent output.
inline SolutionState solution_from_content(const std::string& content,
                                           const std::string& default_filename) {
  SolutionState state;
  state.content = content;
  state.files = extract_files(content, default_filename);
  return state;
}

}  // namespace chainshort
