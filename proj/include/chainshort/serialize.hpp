#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainshort/backend.hpp"
#include "chainshort/errors.hpp"
#include "chainshort/graph.hpp"
#include "chainshort/stats.hpp"

namespace chainshort {

using Json = nlohmann::json;

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& source, std::size_t line,
                                    const std::string& what) {
  raise(Errc::parse_error,
        source + ":" + std::to_string(line) + ": " + what);
}

inline const Json& need(const Json& obj, const char* key,
                        const std::string& source, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    parse_fail(source, line, std::string("missing field '") + key + "'");
  }
  return *it;
}

inline std::string need_string(const Json& obj, const char* key,
                               const std::string& source, std::size_t line) {
  const Json& v = need(obj, key, source, line);
  if (!v.is_string()) {
    parse_fail(source, line, std::string("field '") + key + "' must be a string");
  }
  return v.get<std::string>();
}

inline std::int64_t need_integer(const Json& obj, const char* key,
                                 const std::string& source, std::size_t line) {
  const Json& v = need(obj, key, source, line);
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    parse_fail(source, line,
               std::string("field '") + key + "' must be an integer");
  }
  return v.get<std::int64_t>();
}

inline double need_number(const Json& obj, const char* key,
                          const std::string& source, std::size_t line) {
  const Json& v = need(obj, key, source, line);
  if (!v.is_number()) {
    parse_fail(source, line, std::string("field '") + key + "' must be a number");
  }
  return v.get<double>();
}

inline ResourceDelta usage_from_fields(const Json& obj, const char* time_key,
                                       const char* tokens_key,
                                       const std::string& source,
                                       std::size_t line) {
  ResourceDelta delta;
  delta.time_seconds = need_number(obj, time_key, source, line);
  delta.tokens = need_integer(obj, tokens_key, source, line);
  if (!delta.nonnegative()) {
    parse_fail(source, line, "resource usage must be non-negative and finite");
  }
  return delta;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Shortcut records (shortcuts.json entries)

inline Json shortcut_to_json(const Shortcut& shortcut) {
  Json record;
  record["from_index"] = shortcut.from_index;
  record["to_index"] = shortcut.to_index;
  record["instruction"] = shortcut.instruction;
  record["consumption"] = {{"time_seconds", shortcut.consumption.time_seconds},
                           {"tokens", shortcut.consumption.tokens}};
  if (shortcut.value) {
    record["value"] = *shortcut.value;
  } else {
    record["value"] = nullptr;
  }
  record["origin_task_id"] = shortcut.origin_task_id;
  record["origin_task_text"] = shortcut.origin_task_text;
  record["origin_edge_count"] = shortcut.origin_edge_count;
  return record;
}

inline Shortcut shortcut_from_json(const Json& record, const std::string& source,
                                   std::size_t position) {
  if (!record.is_object()) {
    detail::parse_fail(source, position, "shortcut record must be an object");
  }
  Shortcut shortcut;
  const std::int64_t from =
      detail::need_integer(record, "from_index", source, position);
  const std::int64_t to = detail::need_integer(record, "to_index", source, position);
  if (from < 0 || to < 0 || from >= to) {
    detail::parse_fail(source, position, "shortcut indices must satisfy 0 <= from < to");
  }
  shortcut.from_index = static_cast<std::size_t>(from);
  shortcut.to_index = static_cast<std::size_t>(to);
  shortcut.instruction = detail::need_string(record, "instruction", source, position);
  const Json& consumption = detail::need(record, "consumption", source, position);
  if (!consumption.is_object()) {
    detail::parse_fail(source, position, "field 'consumption' must be an object");
  }
  shortcut.consumption = detail::usage_from_fields(consumption, "time_seconds",
                                                   "tokens", source, position);
  const Json& value = detail::need(record, "value", source, position);
  if (value.is_null()) {
    shortcut.value.reset();
  } else if (value.is_number()) {
    shortcut.value = value.get<double>();
  } else {
    detail::parse_fail(source, position, "field 'value' must be a number or null");
  }
  shortcut.origin_task_id =
      detail::need_string(record, "origin_task_id", source, position);
  shortcut.origin_task_text =
      detail::need_string(record, "origin_task_text", source, position);
  const std::int64_t edges =
      detail::need_integer(record, "origin_edge_count", source, position);
  if (edges < 0) {
    detail::parse_fail(source, position, "origin_edge_count must be non-negative");
  }
  shortcut.origin_edge_count = static_cast<std::size_t>(edges);
  return shortcut;
}

inline void write_shortcuts(std::ostream& out,
                            const std::vector<Shortcut>& shortcuts) {
  Json array = Json::array();
  for (const Shortcut& shortcut : shortcuts) {
    array.push_back(shortcut_to_json(shortcut));
  }
  out << array.dump(2) << "\n";
}

inline void write_shortcuts_file(const std::filesystem::path& path,
                                 const std::vector<Shortcut>& shortcuts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::io_error, "cannot write " + path.string());
  write_shortcuts(out, shortcuts);
}

inline std::vector<Shortcut> read_shortcuts(std::istream& in,
                                            const std::string& source) {
  Json array = Json::parse(in, nullptr, false);
  if (array.is_discarded()) detail::parse_fail(source, 1, "invalid JSON");
  if (!array.is_array()) {
    detail::parse_fail(source, 1, "shortcut library must be a JSON array");
  }
  std::vector<Shortcut> shortcuts;
  shortcuts.reserve(array.size());
  std::size_t position = 0;
  for (const Json& record : array) {
    ++position;
    shortcuts.push_back(shortcut_from_json(record, source, position));
  }
  return shortcuts;
}

inline std::vector<Shortcut> read_shortcuts_file(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot read " + path.string());
  return read_shortcuts(in, path.string());
}

// ---------------------------------------------------------------------------
// Trajectory files (JSONL: header, then nodes, then edges)

inline void write_trajectory(std::ostream& out, const TaskGraph& graph) {
  Json header;
  header["task_id"] = graph.task_id;
  header["task_text"] = graph.task_text;
  out << header.dump() << "\n";
  for (const SolutionState& node : graph.nodes) {
    Json record;
    record["index"] = node.index;
    record["content"] = node.content;
    Json files = Json::array();
    for (const FileEntry& file : node.files) {
      files.push_back({{"path", file.path}, {"body", file.body}});
    }
    record["files"] = std::move(files);
    if (node.compilable) {
      record["compilable"] = *node.compilable ? 1 : 0;
    } else {
      record["compilable"] = nullptr;
    }
    out << record.dump() << "\n";
  }
  for (const InstructionEdge& edge : graph.edges) {
    Json record;
    record["from"] = edge.from_index;
    record["to"] = edge.to_index;
    record["instruction"] = edge.instruction;
    record["time_seconds"] = edge.consumption.time_seconds;
    record["tokens"] = edge.consumption.tokens;
    if (edge.shortcut_origin) {
      record["shortcut_origin"] = {
          {"task_id", edge.shortcut_origin->task_id},
          {"from_index", edge.shortcut_origin->from_index},
          {"to_index", edge.shortcut_origin->to_index}};
    }
    out << record.dump() << "\n";
  }
}

inline void write_trajectory_file(const std::filesystem::path& path,
                                  const TaskGraph& graph) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::io_error, "cannot write " + path.string());
  write_trajectory(out, graph);
}

/// Parses and validates one trajectory: header first, node indices dense from
/// 0, edges adjacent and covering the whole chain. Embeddings are never read
/// from disk; compilable may be null, to be recomputed downstream.
inline TaskGraph parse_trajectory(std::istream& in, const std::string& source) {
  struct PendingNode {
    SolutionState state;
    std::size_t line;
  };
  struct PendingEdge {
    InstructionEdge edge;
    std::size_t line;
  };

  std::optional<TaskGraph> graph;
  std::vector<PendingNode> nodes;
  std::vector<PendingEdge> edges;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json record = Json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      detail::parse_fail(source, line_no, "invalid JSON object");
    }

    if (record.contains("task_id")) {
      if (graph) detail::parse_fail(source, line_no, "duplicate header line");
      if (!nodes.empty() || !edges.empty()) {
        detail::parse_fail(source, line_no, "header must be the first record");
      }
      const std::string task_id =
          detail::need_string(record, "task_id", source, line_no);
      const std::string task_text =
          detail::need_string(record, "task_text", source, line_no);
      if (task_id.empty()) detail::parse_fail(source, line_no, "empty task_id");
      if (task_text.empty()) {
        detail::parse_fail(source, line_no, "empty task_text");
      }
      graph = TaskGraph{};
      graph->task_id = task_id;
      graph->task_text = task_text;
      continue;
    }

    if (!graph) {
      detail::parse_fail(source, line_no, "record before header line");
    }

    if (record.contains("index")) {
      PendingNode pending;
      pending.line = line_no;
      const std::int64_t index =
          detail::need_integer(record, "index", source, line_no);
      if (index < 0) detail::parse_fail(source, line_no, "negative node index");
      pending.state.index = static_cast<std::size_t>(index);
      pending.state.content =
          detail::need_string(record, "content", source, line_no);
      const Json& files = detail::need(record, "files", source, line_no);
      if (!files.is_array()) {
        detail::parse_fail(source, line_no, "field 'files' must be an array");
      }
      for (const Json& file : files) {
        if (!file.is_object()) {
          detail::parse_fail(source, line_no, "file entry must be an object");
        }
        FileEntry entry;
        entry.path = detail::need_string(file, "path", source, line_no);
        entry.body = detail::need_string(file, "body", source, line_no);
        if (entry.path.empty()) {
          detail::parse_fail(source, line_no, "empty file path");
        }
        pending.state.files.push_back(std::move(entry));
      }
      if (record.contains("compilable") && !record["compilable"].is_null()) {
        const Json& flag = record["compilable"];
        if (flag.is_boolean()) {
          pending.state.compilable = flag.get<bool>();
        } else if (flag.is_number_integer() || flag.is_number_unsigned()) {
          const std::int64_t value = flag.get<std::int64_t>();
          if (value != 0 && value != 1) {
            detail::parse_fail(source, line_no, "compilable must be 0, 1, or null");
          }
          pending.state.compilable = (value == 1);
        } else {
          detail::parse_fail(source, line_no, "compilable must be 0, 1, or null");
        }
      }
      if (pending.state.index == 0 &&
          (!pending.state.content.empty() || !pending.state.files.empty())) {
        detail::parse_fail(source, line_no, "initial node must be empty");
      }
      nodes.push_back(std::move(pending));
      continue;
    }

    if (record.contains("from")) {
      PendingEdge pending;
      pending.line = line_no;
      const std::int64_t from = detail::need_integer(record, "from", source, line_no);
      const std::int64_t to = detail::need_integer(record, "to", source, line_no);
      if (from < 0 || to < 0) {
        detail::parse_fail(source, line_no, "negative edge endpoint");
      }
      if (to != from + 1) {
        detail::parse_fail(source, line_no,
                           "ordinary edges must connect adjacent nodes (got " +
                               std::to_string(from) + " -> " +
                               std::to_string(to) + ")");
      }
      pending.edge.from_index = static_cast<std::size_t>(from);
      pending.edge.to_index = static_cast<std::size_t>(to);
      pending.edge.instruction =
          detail::need_string(record, "instruction", source, line_no);
      pending.edge.consumption = detail::usage_from_fields(
          record, "time_seconds", "tokens", source, line_no);
      if (record.contains("shortcut_origin") &&
          !record["shortcut_origin"].is_null()) {
        const Json& origin = record["shortcut_origin"];
        if (!origin.is_object()) {
          detail::parse_fail(source, line_no, "shortcut_origin must be an object");
        }
        ShortcutOrigin parsed;
        parsed.task_id = detail::need_string(origin, "task_id", source, line_no);
        const std::int64_t oi =
            detail::need_integer(origin, "from_index", source, line_no);
        const std::int64_t oj =
            detail::need_integer(origin, "to_index", source, line_no);
        if (oi < 0 || oj < 0 || oi >= oj) {
          detail::parse_fail(source, line_no, "invalid shortcut_origin indices");
        }
        parsed.from_index = static_cast<std::size_t>(oi);
        parsed.to_index = static_cast<std::size_t>(oj);
        pending.edge.shortcut_origin = std::move(parsed);
      }
      edges.push_back(std::move(pending));
      continue;
    }

    detail::parse_fail(source, line_no,
                       "unrecognized record (expected header, node, or edge)");
  }

  if (!graph) detail::parse_fail(source, line_no ? line_no : 1, "missing header line");
  if (nodes.empty()) detail::parse_fail(source, line_no, "trajectory has no nodes");

  std::sort(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) {
    return a.state.index < b.state.index;
  });
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k].state.index != k) {
      detail::parse_fail(source, nodes[k].line,
                         k < nodes[k].state.index
                             ? "node indices must be dense from 0 (missing node " +
                                   std::to_string(k) + ")"
                             : "duplicate node index " +
                                   std::to_string(nodes[k].state.index));
    }
  }
  if (edges.size() != nodes.size() - 1) {
    detail::parse_fail(source, line_no,
                       "expected " + std::to_string(nodes.size() - 1) +
                           " edges for " + std::to_string(nodes.size()) +
                           " nodes, got " + std::to_string(edges.size()));
  }
  std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
    return a.edge.from_index < b.edge.from_index;
  });
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (edges[k].edge.from_index != k) {
      detail::parse_fail(source, edges[k].line,
                         "edges must cover the chain exactly once");
    }
  }

  for (auto& pending : nodes) graph->nodes.push_back(std::move(pending.state));
  for (auto& pending : edges) graph->edges.push_back(std::move(pending.edge));
  return std::move(*graph);
}

inline TaskGraph read_trajectory_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot read " + path.string());
  return parse_trajectory(in, path.string());
}

// ---------------------------------------------------------------------------
// Stats corpus (stats.json)

inline void write_stats(std::ostream& out, const StatsCorpus& corpus) {
  Json record;
  record["times"] = corpus.times;
  record["tokens"] = corpus.tokens;
  record["size"] = corpus.size;
  out << record.dump(2) << "\n";
}

inline void write_stats_file(const std::filesystem::path& path,
                             const StatsCorpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::io_error, "cannot write " + path.string());
  write_stats(out, corpus);
}

inline StatsCorpus read_stats(std::istream& in, const std::string& source) {
  Json record = Json::parse(in, nullptr, false);
  if (record.is_discarded() || !record.is_object()) {
    detail::parse_fail(source, 1, "invalid JSON object");
  }
  StatsCorpus corpus;
  const Json& times = detail::need(record, "times", source, 1);
  const Json& tokens = detail::need(record, "tokens", source, 1);
  if (!times.is_array() || !tokens.is_array()) {
    detail::parse_fail(source, 1, "'times' and 'tokens' must be arrays");
  }
  for (const Json& v : times) {
    if (!v.is_number()) detail::parse_fail(source, 1, "non-numeric time entry");
    corpus.times.push_back(v.get<double>());
  }
  for (const Json& v : tokens) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
      detail::parse_fail(source, 1, "non-integer token entry");
    }
    corpus.tokens.push_back(v.get<std::int64_t>());
  }
  const std::int64_t size = detail::need_integer(record, "size", source, 1);
  corpus.size = static_cast<std::size_t>(size);
  if (corpus.size != corpus.times.size() || corpus.size != corpus.tokens.size()) {
    detail::parse_fail(source, 1, "size must match both list lengths");
  }
  if (!std::is_sorted(corpus.times.begin(), corpus.times.end()) ||
      !std::is_sorted(corpus.tokens.begin(), corpus.tokens.end())) {
    detail::parse_fail(source, 1, "stats lists must be sorted ascending");
  }
  return corpus;
}

inline StatsCorpus read_stats_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot read " + path.string());
  return read_stats(in, path.string());
}

// ---------------------------------------------------------------------------
// Backend script files (JSON list of {role_profile, text, time_seconds, tokens})

inline std::map<std::string, std::vector<ScriptEntry>> load_script(
    std::istream& in, const std::string& source) {
  Json array = Json::parse(in, nullptr, false);
  if (array.is_discarded()) detail::parse_fail(source, 1, "invalid JSON");
  if (!array.is_array()) {
    detail::parse_fail(source, 1, "script file must be a JSON array");
  }
  std::map<std::string, std::vector<ScriptEntry>> scripts;
  std::size_t position = 0;
  for (const Json& record : array) {
    ++position;
    if (!record.is_object()) {
      detail::parse_fail(source, position, "script entry must be an object");
    }
    const std::string role =
        detail::need_string(record, "role_profile", source, position);
    ScriptEntry entry;
    entry.text = detail::need_string(record, "text", source, position);
    entry.usage = detail::usage_from_fields(record, "time_seconds", "tokens",
                                            source, position);
    scripts[role].push_back(std::move(entry));
  }
  return scripts;
}

inline std::map<std::string, std::vector<ScriptEntry>> load_script_file(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot read " + path.string());
  return load_script(in, path.string());
}

}  // namespace chainshort
