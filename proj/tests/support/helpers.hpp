#pragma once

// Shared fixtures: deterministic scripted scenarios, reply builders, and a
// harness that drives the installed CLI binary as a subprocess.

#include <chainshort/chainshort.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testsupport {

using namespace chainshort;

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline std::string file_block(const std::string& path,
                              const std::string& body) {
  return "FILE: " + path + "\n" + body;
}

/// A valid single-file python reply whose content varies with `tag`.
inline std::string python_reply(const std::string& tag, int lines = 1) {
  std::string body;
  for (int i = 0; i < lines; ++i) {
    body += "print(\"" + tag + "-" + std::to_string(i) + "\")\n";
  }
  return file_block("main.py", body);
}

inline ScriptEntry entry(std::string text, double time_seconds,
                         std::int64_t tokens) {
  ScriptEntry e;
  e.text = std::move(text);
  e.usage = ResourceDelta{time_seconds, tokens};
  return e;
}

inline Shortcut make_shortcut(std::size_t i, std::size_t j, double value,
                              double time_seconds, std::int64_t tokens,
                              const std::string& origin_id,
                              const std::string& origin_text,
                              std::size_t origin_edges) {
  Shortcut s;
  s.from_index = i;
  s.to_index = j;
  s.instruction = "jump " + std::to_string(i) + "->" + std::to_string(j);
  s.consumption = ResourceDelta{time_seconds, tokens};
  s.value = value;
  s.origin_task_id = origin_id;
  s.origin_task_text = origin_text;
  s.origin_edge_count = origin_edges;
  return s;
}

/// Compile checker that never spawns a process: compilable iff the content
/// length is not divisible by three. Deterministic across runs.
inline CompileChecker parity_checker() {
  return [](const SolutionState& solution) {
    return solution.content.size() % 3 != 0;
  };
}

inline CompileChecker always_compiles() {
  return [](const SolutionState&) { return true; };
}

// ---------------------------------------------------------------------------
// Frozen scenario: one reference task of three edges, six shortcuts, budget
// (600 s, 20000 tokens). With the scripted usages below the run must select
// (0,2) then (2,3), stop at the three-edge reference length, and book the
// ledger [(5,400), (7,600), (5,520)].

struct FrozenScenario {
  ShortcutLibrary library;
  ReferenceIndex index;
  std::map<std::string, std::vector<ScriptEntry>> scripts;
  RunConfig config;
  std::string task_text = "portrait background blur tool";
};

inline FrozenScenario frozen_scenario() {
  FrozenScenario s;
  const std::string id = "ref-blur";
  const std::string text = "background blur editor";
  s.library.entries = {
      make_shortcut(0, 1, 0.30, 2.0, 300, id, text, 3),
      make_shortcut(0, 2, 0.55, 2.0, 300, id, text, 3),
      make_shortcut(0, 3, 0.50, 9.0, 2000, id, text, 3),
      make_shortcut(1, 2, 0.20, 1.0, 150, id, text, 3),
      make_shortcut(1, 3, 0.25, 3.0, 500, id, text, 3),
      make_shortcut(2, 3, 0.35, 1.5, 200, id, text, 3),
  };
  s.library.corpus = build_stats_corpus(s.library.entries);
  OfflineEmbedder embedder;
  s.index = index_from_library(s.library, embedder);
  s.scripts["programmer"] = {
      entry(python_reply("draft"), 5.0, 400),
      entry(python_reply("blur-core", 2), 4.0, 350),
      entry(python_reply("blur-final", 3), 3.0, 300),
  };
  s.scripts["reviewer"] = {
      entry("Add a blur radius control.", 3.0, 250),
      entry("Sharpen the edge handling.", 2.0, 220),
  };
  s.config.budget_time_seconds = 600.0;
  s.config.budget_tokens = 20000;
  return s;
}

// ---------------------------------------------------------------------------
// Randomized scripted scenario: one reference task whose edge count is drawn
// from 1..8, a random forward-pair library, and scripts sized so no role can
// underflow before the forced-termination bound.

struct RandomScenario {
  ShortcutLibrary library;
  ReferenceIndex index;
  std::map<std::string, std::vector<ScriptEntry>> scripts;
  RunConfig config;
  std::string task_text;
  std::size_t reference_edges = 0;
};

inline RandomScenario random_scenario(std::mt19937_64& rng) {
  RandomScenario s;
  std::uniform_int_distribution<std::size_t> len_dist(1, 8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t edges = len_dist(rng);
  s.reference_edges = edges;
  const std::string id = "ref-" + std::to_string(rng() % 100000);
  const std::string text = "reference task " + std::to_string(rng() % 1000);
  s.task_text = "query task " + std::to_string(rng() % 1000);

  std::uniform_real_distribution<double> value_dist(-0.3, 0.9);
  std::uniform_real_distribution<double> time_dist(0.05, 30.0);
  std::uniform_int_distribution<std::int64_t> token_dist(5, 3000);
  for (std::size_t i = 0; i < edges; ++i) {
    for (std::size_t j = i + 1; j <= edges; ++j) {
      if (!s.library.entries.empty() && unit(rng) > 0.6) continue;
      s.library.entries.push_back(make_shortcut(i, j, value_dist(rng),
                                                time_dist(rng),
                                                token_dist(rng), id, text,
                                                edges));
    }
  }
  if (s.library.entries.empty()) {
    s.library.entries.push_back(
        make_shortcut(0, edges, value_dist(rng), time_dist(rng),
                      token_dist(rng), id, text, edges));
  }
  s.library.corpus = build_stats_corpus(s.library.entries);
  OfflineEmbedder embedder;
  s.index = index_from_library(s.library, embedder);

  std::uniform_real_distribution<double> call_time(0.1, 6.0);
  std::uniform_int_distribution<std::int64_t> call_tokens(20, 800);
  for (std::size_t k = 0; k < edges + 2; ++k) {
    s.scripts["programmer"].push_back(
        entry(python_reply("p" + std::to_string(k), 1 + int(rng() % 4)),
              call_time(rng), call_tokens(rng)));
    const bool done = k + 1 >= edges && unit(rng) < 0.25;
    s.scripts["reviewer"].push_back(
        entry(done ? std::string("Looks complete. <DONE>")
                   : "Revise detail " + std::to_string(k) + ".",
              call_time(rng), call_tokens(rng)));
  }

  std::uniform_real_distribution<double> budget_time(5.0, 60.0);
  std::uniform_int_distribution<std::int64_t> budget_tokens(200, 5000);
  s.config.budget_time_seconds = budget_time(rng);
  s.config.budget_tokens = budget_tokens(rng);
  return s;
}

/// Reference implementation of shortcut selection, written as filter plus
/// stable sort so input-order ties fall out of stability rather than an
/// explicit argmax sweep.
inline std::optional<Selection> oracle_select(
    const std::vector<Shortcut>& candidates, const StatsCorpus& corpus,
    const Budget& budget, const RunConfig& config) {
  const double gamma =
      config.disable_gamma ? 0.0 : emergency_factor(budget).gamma;
  std::vector<Selection> scored;
  for (const Shortcut& candidate : candidates) {
    if (!config.disable_selection && !budget.feasible(candidate.consumption)) {
      continue;
    }
    Selection s;
    s.shortcut = candidate;
    s.value = candidate.value.value();
    s.cost = config.disable_cost ? 0.0
                                 : shortcut_cost(corpus, candidate.consumption).cost;
    s.gamma = gamma;
    s.utility = utility(s.value, s.cost, gamma);
    if (s.utility < config.utility_floor) continue;
    scored.push_back(std::move(s));
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Selection& a, const Selection& b) {
                     if (a.utility != b.utility) return a.utility > b.utility;
                     const auto span_a = a.shortcut.to_index - a.shortcut.from_index;
                     const auto span_b = b.shortcut.to_index - b.shortcut.from_index;
                     if (span_a != span_b) return span_a > span_b;
                     if (a.cost != b.cost) return a.cost < b.cost;
                     return a.shortcut.from_index < b.shortcut.from_index;
                   });
  if (scored.empty()) return std::nullopt;
  return scored.front();
}

/// Library consumption estimate for an applied shortcut, for ledger replays.
inline const Shortcut& library_entry(const ShortcutLibrary& library,
                                     const ShortcutOrigin& origin) {
  for (const Shortcut& s : library.entries) {
    if (s.origin_task_id == origin.task_id &&
        s.from_index == origin.from_index && s.to_index == origin.to_index) {
      return s;
    }
  }
  throw std::runtime_error("applied shortcut missing from library");
}

// ---------------------------------------------------------------------------
// CLI subprocess harness.

inline std::string cli_path() {
  const char* path = std::getenv("CHAINSHORT_CLI");
  if (path == nullptr || *path == '\0') {
    throw std::runtime_error("CHAINSHORT_CLI is not set");
  }
  return path;
}

struct CliResult {
  int exit_code = -1;
  std::string output;
  bool timed_out = false;
};

inline CliResult run_cli(const std::vector<std::string>& args,
                         const std::filesystem::path& workdir,
                         double timeout_seconds = 120.0) {
  std::vector<std::string> argv{cli_path()};
  argv.insert(argv.end(), args.begin(), args.end());
  auto outcome = proc::run_command(argv, workdir, timeout_seconds);
  CliResult result;
  result.exit_code = outcome.exit_code.value_or(-1);
  result.output = outcome.output;
  result.timed_out = outcome.timed_out;
  return result;
}

/// Serializes a per-role script map into the scripted-backend file format.
inline std::string script_json(
    const std::map<std::string, std::vector<ScriptEntry>>& scripts) {
  nlohmann::json array = nlohmann::json::array();
  for (const auto& [role, entries] : scripts) {
    for (const ScriptEntry& e : entries) {
      array.push_back({{"role_profile", role},
                       {"text", e.text},
                       {"time_seconds", e.usage.time_seconds},
                       {"tokens", e.usage.tokens}});
    }
  }
  return array.dump(2) + "\n";
}

}  // namespace testsupport
