#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "chainshort/backend.hpp"
#include "chainshort/embedding.hpp"
#include "chainshort/errors.hpp"
#include "chainshort/graph.hpp"
#include "chainshort/sandbox.hpp"
#include "chainshort/scoring.hpp"
#include "chainshort/serialize.hpp"
#include "chainshort/stats.hpp"

namespace chainshort {

/// The persisted experiential knowledge: every mined shortcut plus the
/// consumption corpus that percentile ranks are computed against.
struct ShortcutLibrary {
  std::vector<Shortcut> entries;  // grouped by origin task, pairs in (i,j) order
  StatsCorpus corpus;
};

struct MiningReport {
  std::size_t trajectories = 0;
  std::size_t shortcuts = 0;
  std::vector<std::string> skipped;  // human-readable skip reasons
};

inline constexpr const char* kNoChangeSentinel = "no change required";
inline constexpr const char* kPairMarker = "PAIR";

inline constexpr const char* kSynthesizerSystemPrompt =
    "You compress a multi-step code evolution into one self-contained "
    "instruction. Given a source solution state, a target solution state, and "
    "the intermediate instructions between them, write a single instruction "
    "that takes a programmer from the source directly to the target. Describe "
    "the full transition, not a merge of the intermediate steps.";

namespace detail {

inline void normalize_to_unit(EmbeddingVector& vector) {
  const double norm = vector.norm();
  if (norm <= 0.0) return;
  for (double& component : vector.components) component /= norm;
}

}  // namespace detail

/// Fills in the derived per-node annotations (embedding, compile flag) that
/// trajectories on disk may lack. Present flags are trusted, not recomputed.
inline void annotate_graph(TaskGraph& graph, const Embedder& embedder,
                           const LanguageProfile& profile) {
  for (SolutionState& node : graph.nodes) {
    if (!node.embedding) {
      EmbeddingVector vector = embedder.embed(node.content);
      detail::normalize_to_unit(vector);
      node.embedding = std::move(vector);
    }
    if (!node.compilable) {
      node.compilable = (check_compilable(node, profile).compilable == 1);
    }
  }
}

/// Reads one trajectory and returns it fully annotated.
inline TaskGraph ingest_trajectory(std::istream& in, const std::string& source,
                                   const Embedder& embedder,
                                   const LanguageProfile& profile) {
  TaskGraph graph = parse_trajectory(in, source);
  annotate_graph(graph, embedder, profile);
  return graph;
}

inline TaskGraph ingest_trajectory_file(const std::filesystem::path& path,
                                        const Embedder& embedder,
                                        const LanguageProfile& profile) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot read " + path.string());
  return ingest_trajectory(in, path.string(), embedder, profile);
}

/// All forward pairs (i, j) with i < j, lexicographically ordered; optionally
/// only the pairs that land on the final node.
inline std::vector<std::pair<std::size_t, std::size_t>> enumerate_pairs(
    const TaskGraph& graph, bool final_node_only = false) {
  if (graph.nodes.size() < 2) {
    raise(Errc::invalid_argument,
          "pair enumeration needs at least two nodes, got " +
              std::to_string(graph.nodes.size()));
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const std::size_t last = graph.nodes.size() - 1;
  for (std::size_t i = 0; i < last; ++i) {
    for (std::size_t j = i + 1; j <= last; ++j) {
      if (final_node_only && j != last) continue;
      pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

/// Asks the synthesizer to describe the i -> j transition holistically and
/// records the call's measured usage as the shortcut's consumption estimate.
/// Identical source/target content short-circuits to a free sentinel.
inline Shortcut synthesize_shortcut(const TaskGraph& graph, std::size_t i,
                                    std::size_t j, AgentBackend& synthesizer) {
  if (i >= j) {
    raise(Errc::forward_violation,
          "shortcut must point forward (got " + std::to_string(i) + " -> " +
              std::to_string(j) + ")");
  }
  if (j >= graph.nodes.size()) {
    raise(Errc::unknown_node, "node " + std::to_string(j) + " does not exist");
  }

  Shortcut shortcut;
  shortcut.from_index = i;
  shortcut.to_index = j;
  shortcut.origin_task_id = graph.task_id;
  shortcut.origin_task_text = graph.task_text;
  shortcut.origin_edge_count = edge_count(graph);

  const SolutionState& source = graph.nodes[i];
  const SolutionState& target = graph.nodes[j];
  if (source.content == target.content) {
    shortcut.instruction = kNoChangeSentinel;
    shortcut.consumption = ResourceDelta{0.0, 0};
    return shortcut;
  }

  std::string prompt;
  prompt += std::string(kPairMarker) + " " + std::to_string(i) + " -> " +
            std::to_string(j) + "\n";
  prompt += "TASK:\n" + graph.task_text + "\n";
  prompt += "SOURCE STATE:\n" + source.content + "\n";
  prompt += "TARGET STATE:\n" + target.content + "\n";
  prompt += "INTERMEDIATE INSTRUCTIONS:\n";
  for (const InstructionEdge& edge : graph.edges) {
    if (edge.from_index >= i && edge.to_index <= j) {
      prompt += "- " + edge.instruction + "\n";
    }
  }
  prompt +=
      "Write one instruction that produces the target state directly from the "
      "source state.";

  AgentRequest request;
  request.role_profile = "synthesizer";
  request.system_prompt = kSynthesizerSystemPrompt;
  request.messages.push_back({"user", std::move(prompt)});

  try {
    AgentReply reply = synthesizer.complete(request);
    shortcut.instruction = std::move(reply.text);
    shortcut.consumption = reply.usage;
  } catch (const Error& error) {
    if (error.code() != Errc::provider_error) throw;  // underflow = test bug
    raise(Errc::synthesis_error,
          "synthesis failed for pair (" + std::to_string(i) + ", " +
              std::to_string(j) + "): " + error.what());
  }
  return shortcut;
}

/// Sets every shortcut's value to the node-weight difference w(n_j) - w(n_i)
/// against this graph's own task text and final node.
inline void precompute_values(const TaskGraph& graph,
                              std::vector<Shortcut>& shortcuts,
                              const Embedder& embedder) {
  const EmbeddingVector task_embedding = embedder.embed(graph.task_text);
  const SolutionState& final_state = final_node(graph);
  if (!final_state.embedding) {
    raise(Errc::missing_annotation, "final node has no embedding");
  }
  const EmbeddingVector& final_embedding = *final_state.embedding;
  for (Shortcut& shortcut : shortcuts) {
    if (shortcut.to_index >= graph.nodes.size()) {
      raise(Errc::unknown_node,
            "node " + std::to_string(shortcut.to_index) + " does not exist");
    }
    const double target = node_weight(graph.nodes[shortcut.to_index],
                                      task_embedding, final_embedding)
                              .weight;
    const double source = node_weight(graph.nodes[shortcut.from_index],
                                      task_embedding, final_embedding)
                              .weight;
    shortcut.value = target - source;
  }
}

/// Mines one annotated graph: enumerate, synthesize, value. Synthesis
/// failures skip the pair and land in the report.
inline std::vector<Shortcut> mine_graph(TaskGraph& graph,
                                        AgentBackend& synthesizer,
                                        const Embedder& embedder,
                                        MiningReport& report,
                                        bool final_node_only = false) {
  std::vector<Shortcut> mined;
  for (const auto& [i, j] : enumerate_pairs(graph, final_node_only)) {
    try {
      mined.push_back(synthesize_shortcut(graph, i, j, synthesizer));
    } catch (const Error& error) {
      if (error.code() != Errc::synthesis_error) throw;
      report.skipped.push_back(graph.task_id + ": " + error.what());
    }
  }
  precompute_values(graph, mined, embedder);
  for (const Shortcut& shortcut : mined) {
    add_shortcut(graph, shortcut.from_index, shortcut.to_index,
                 shortcut.instruction, shortcut.consumption)
        .value = shortcut.value;
  }
  report.shortcuts += mined.size();
  return mined;
}

struct MiningOutput {
  ShortcutLibrary library;
  std::vector<TaskGraph> graphs;
  MiningReport report;
};

/// Mines every *.jsonl trajectory under a directory in filename order.
/// Unreadable trajectories are skipped with a reason; an empty yield is an
/// error because a library with no entries can drive nothing.
inline MiningOutput mine_directory(const std::filesystem::path& directory,
                                   const Embedder& embedder,
                                   AgentBackend& synthesizer,
                                   const LanguageProfile& profile,
                                   bool final_node_only = false) {
  if (!std::filesystem::is_directory(directory)) {
    raise(Errc::io_error, "not a directory: " + directory.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(directory)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  MiningOutput output;
  std::set<std::string> seen_ids;
  for (const auto& file : files) {
    TaskGraph graph;
    try {
      graph = ingest_trajectory_file(file, embedder, profile);
    } catch (const Error& error) {
      output.report.skipped.push_back(error.what());
      continue;
    }
    if (!seen_ids.insert(graph.task_id).second) {
      raise(Errc::index_error, "duplicate task_id '" + graph.task_id +
                                   "' in " + file.string());
    }
    if (graph.nodes.size() < 2) {
      output.report.skipped.push_back(file.string() +
                                      ": trajectory has no edges");
      continue;
    }
    ++output.report.trajectories;
    auto mined = mine_graph(graph, synthesizer, embedder, output.report,
                            final_node_only);
    output.library.entries.insert(output.library.entries.end(), mined.begin(),
                                  mined.end());
    output.graphs.push_back(std::move(graph));
  }
  if (output.library.entries.empty()) {
    raise(Errc::empty_corpus,
          "no shortcuts mined from " + directory.string() +
              (output.report.skipped.empty()
                   ? ""
                   : " (" + std::to_string(output.report.skipped.size()) +
                         " trajectories skipped)"));
  }
  output.library.corpus = build_stats_corpus(output.library.entries);
  return output;
}

/// Template-driven synthesizer for offline mining: a pure function of the
/// prompt's pair marker, so mining stays byte-identical across runs.
class DeterministicSynthesizer : public AgentBackend {
 public:
  explicit DeterministicSynthesizer(
      std::string instruction_template =
          "Skip the intermediate refinements: transform the solution from "
          "state {i} directly to state {j}, implementing the target revision "
          "in full.")
      : template_(std::move(instruction_template)) {}

  AgentReply complete(const AgentRequest& request) override {
    if (request.messages.empty()) {
      raise(Errc::invalid_argument, "synthesis request without messages");
    }
    std::size_t i = 0;
    std::size_t j = 1;
    const std::string& prompt = request.messages.back().text;
    const std::string marker = std::string(kPairMarker) + " ";
    if (prompt.rfind(marker, 0) == 0) {
      unsigned long long a = 0;
      unsigned long long b = 0;
      if (std::sscanf(prompt.c_str() + marker.size(), "%llu -> %llu", &a, &b) == 2) {
        i = static_cast<std::size_t>(a);
        j = static_cast<std::size_t>(b);
      }
    }

    std::string text = template_;
    replace_all(text, "{i}", std::to_string(i));
    replace_all(text, "{j}", std::to_string(j));

    AgentReply reply;
    reply.text = std::move(text);
    const std::size_t span = j > i ? j - i : 1;
    reply.usage.time_seconds = 0.5 * static_cast<double>(span);
    reply.usage.tokens =
        count_tokens_fallback(reply.text) + 20 * static_cast<std::int64_t>(span);
    return reply;
  }

 private:
  static void replace_all(std::string& text, const std::string& what,
                          const std::string& with) {
    std::size_t at = 0;
    while ((at = text.find(what, at)) != std::string::npos) {
      text.replace(at, what.size(), with);
      at += with.size();
    }
  }

  std::string template_;
};

}  // namespace chainshort
