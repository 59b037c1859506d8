#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chainshort/backend.hpp"
#include "chainshort/embedding.hpp"
#include "chainshort/errors.hpp"
#include "chainshort/graph.hpp"
#include "chainshort/mining.hpp"
#include "chainshort/resources.hpp"
#include "chainshort/retrieval.hpp"
#include "chainshort/sandbox.hpp"
#include "chainshort/scoring.hpp"
#include "chainshort/serialize.hpp"
#include "chainshort/stats.hpp"

namespace chainshort {

struct RunConfig {
  double budget_time_seconds = 0.0;
  std::int64_t budget_tokens = 0;
  bool disable_selection = false;  // skip the feasibility filter
  bool disable_cost = false;       // utility scores value only
  bool disable_gamma = false;      // emergency factor pinned to 0
  double utility_floor = 0.0;      // inclusive: U == floor still qualifies
  LanguageProfile language_profile;
  std::size_t reference_k = 1;
  double min_reference_sim = 0.0;  // <= 0 means always use the top reference
};

inline void validate_config(const RunConfig& config) {
  if (!(config.budget_time_seconds > 0.0) ||
      !std::isfinite(config.budget_time_seconds) || config.budget_tokens <= 0) {
    raise(Errc::invalid_budget, "budgets must be positive and finite");
  }
  if (!std::isfinite(config.utility_floor)) {
    raise(Errc::configuration_error, "utility floor must be finite");
  }
  if (config.reference_k == 0) {
    raise(Errc::configuration_error, "reference_k must be positive");
  }
  if (!config.language_profile.valid()) {
    raise(Errc::configuration_error, "invalid language profile");
  }
}

/// The chosen shortcut plus every number that went into choosing it.
struct Selection {
  Shortcut shortcut;
  double value = 0.0;
  double cost = 0.0;
  double gamma = 0.0;
  double utility = 0.0;
};

struct AppliedShortcut {
  ShortcutOrigin origin;
  std::size_t step_index = 0;  // index of the inference edge that realized it

  bool operator==(const AppliedShortcut&) const = default;
};

struct RunResult {
  TaskGraph inference_graph;
  SolutionState final_solution;
  std::vector<ResourceDelta> ledger;  // one entry per charged step
  std::string terminated_by;          // reference-length | budget-exhausted | natural-completion
  bool within_budget = false;
  std::vector<AppliedShortcut> applied_shortcuts;
  std::string reference_task_id;  // empty when no reference was adopted
  double reference_similarity = 0.0;
  std::vector<double> gamma_trace;  // emergency factor at each selection round
  double time_allocated = 0.0;
  std::int64_t tokens_allocated = 0;
  double time_used = 0.0;
  std::int64_t tokens_used = 0;
};

inline constexpr const char* kTerminatedReferenceLength = "reference-length";
inline constexpr const char* kTerminatedBudgetExhausted = "budget-exhausted";
inline constexpr const char* kTerminatedNaturalCompletion = "natural-completion";

inline constexpr const char* kDoneMarker = "<DONE>";

// Placeholder personas: the published system never fixes exact prompt wording,
// so these only need to carry the protocol (FILE blocks, the done marker).
inline constexpr const char* kProgrammerSystemPrompt =
    "You are the programmer agent. Reply with the complete current solution "
    "as one or more blocks of the form 'FILE: <relative path>' followed by "
    "the full file body. Output nothing outside those blocks.";

inline constexpr const char* kReviewerSystemPrompt =
    "You are the code reviewer agent. Given the task, the current solution, "
    "and an improvement instruction, reply with concrete revision guidance "
    "for the programmer. If the solution already fulfils the task, reply "
    "with <DONE>.";

// Demand analysis and language selection collapse into this fixed preamble;
// only code-generation rounds are orchestrated as real agent exchanges.
inline constexpr const char* kPhasePreamble =
    "Requirements are settled and the implementation language is fixed. "
    "Produce code for the following task.\n";

inline constexpr const char* kInitialInstruction =
    "Produce an initial complete solution for the task.";

/// True when the checker says the solution compiles; shared by mining and
/// inference. Injectable so bulk simulations can swap the real sandbox out.
using CompileChecker = std::function<bool(const SolutionState&)>;

inline CompileChecker sandbox_checker(const LanguageProfile& profile) {
  return [profile](const SolutionState& solution) {
    return check_compilable(solution, profile).compilable == 1;
  };
}

/// Scores feasible candidates with U = (1 - gamma) * value - gamma * cost and
/// returns the argmax at or above the utility floor. Ties fall to the larger
/// span, then the lower cost, then the lower from_index, then input order.
inline std::optional<Selection> select_shortcut(
    const std::vector<Shortcut>& candidates, const StatsCorpus& corpus,
    const Budget& budget, const RunConfig& config) {
  if (candidates.empty()) return std::nullopt;
  if (!config.disable_cost && corpus.size == 0) {
    raise(Errc::empty_corpus, "cost scoring needs a non-empty stats corpus");
  }

  const double gamma =
      config.disable_gamma ? 0.0 : emergency_factor(budget).gamma;

  std::optional<Selection> best;
  for (const Shortcut& candidate : candidates) {
    if (!config.disable_selection && !budget.feasible(candidate.consumption)) {
      continue;
    }
    if (!candidate.value) {
      raise(Errc::missing_annotation,
            "candidate shortcut (" + std::to_string(candidate.from_index) +
                ", " + std::to_string(candidate.to_index) + ") has no value");
    }
    Selection scored;
    scored.shortcut = candidate;
    scored.value = *candidate.value;
    scored.cost = config.disable_cost
                      ? 0.0
                      : shortcut_cost(corpus, candidate.consumption).cost;
    scored.gamma = gamma;
    scored.utility = utility(scored.value, scored.cost, gamma);
    if (scored.utility < config.utility_floor) continue;

    if (!best) {
      best = std::move(scored);
      continue;
    }
    const std::size_t span = scored.shortcut.to_index - scored.shortcut.from_index;
    const std::size_t best_span =
        best->shortcut.to_index - best->shortcut.from_index;
    const bool wins =
        scored.utility > best->utility ||
        (scored.utility == best->utility &&
         (span > best_span ||
          (span == best_span &&
           (scored.cost < best->cost ||
            (scored.cost == best->cost &&
             scored.shortcut.from_index < best->shortcut.from_index)))));
    if (wins) best = std::move(scored);
  }
  return best;
}

namespace detail {

struct StepCharge {
  ResourceDelta total;
  bool exhausted = false;
};

inline AgentReply call_agent(AgentBackend& agents, const std::string& role,
                             const std::string& system_prompt,
                             const std::string& user_text, Budget& budget,
                             StepCharge& charge) {
  AgentRequest request;
  request.role_profile = role;
  request.system_prompt = system_prompt;
  request.messages.push_back({"user", user_text});
  AgentReply reply = agents.complete(request);
  budget.record(reply.usage);
  charge.total += reply.usage;
  charge.exhausted = budget.exhausted();
  return reply;
}

inline std::string render_solution(const SolutionState& solution) {
  return solution.content.empty() ? "(no solution yet)" : solution.content;
}

inline SolutionState best_so_far(const TaskGraph& graph,
                                 const EmbeddingVector& task_embedding) {
  const SolutionState& final_state = final_node(graph);
  EmbeddingVector final_embedding =
      final_state.embedding ? *final_state.embedding : EmbeddingVector{};
  const SolutionState* best = &graph.nodes.front();
  double best_weight = -std::numeric_limits<double>::infinity();
  for (const SolutionState& node : graph.nodes) {
    if (!node.embedding || !node.compilable.has_value()) continue;
    const double weight =
        node_weight(node, task_embedding, final_embedding).weight;
    if (weight >= best_weight) {  // ties favor the later node
      best_weight = weight;
      best = &node;
    }
  }
  return *best;
}

}  // namespace detail

/// Executes one task as a budget-tracked chain: retrieve a reference, draft an
/// initial solution, then per round either apply the best-scoring reference
/// shortcut through a reviewer -> programmer exchange or fall back to a plain
/// review round, stopping at the reference's edge count, on budget
/// exhaustion, or on a reviewer completion signal.
inline RunResult run_task(const std::string& task_id,
                          const std::string& task_text, const RunConfig& config,
                          const ShortcutLibrary& library,
                          const ReferenceIndex& index, AgentBackend& agents,
                          const Embedder& embedder,
                          CompileChecker checker = nullptr) {
  validate_config(config);
  if (library.entries.empty()) {
    raise(Errc::configuration_error, "shortcut library is empty");
  }
  if (index.entries.empty()) {
    raise(Errc::configuration_error, "reference index is empty");
  }
  if (!checker) checker = sandbox_checker(config.language_profile);

  Budget budget(config.budget_time_seconds, config.budget_tokens);
  RunResult result;
  result.time_allocated = config.budget_time_seconds;
  result.tokens_allocated = config.budget_tokens;
  result.inference_graph = new_graph(task_id, task_text);
  TaskGraph& graph = result.inference_graph;

  EmbeddingVector task_embedding = embedder.embed(task_text);
  detail::normalize_to_unit(task_embedding);
  graph.nodes.front().embedding = EmbeddingVector{
      std::vector<double>(task_embedding.components.size(), 0.0)};
  graph.nodes.front().compilable = false;

  // Reference adoption: top-1 by similarity, unless below the optional floor.
  std::vector<Shortcut> reference_shortcuts;
  std::size_t reference_edges = 0;
  bool have_reference = false;
  {
    const auto hits = retrieve_reference(index, task_text, config.reference_k,
                                         embedder);
    if (!hits.empty() && (config.min_reference_sim <= 0.0 ||
                          hits.front().similarity >= config.min_reference_sim)) {
      have_reference = true;
      result.reference_task_id = hits.front().task_id;
      result.reference_similarity = hits.front().similarity;
      reference_shortcuts =
          shortcuts_for_task(library, result.reference_task_id);
      if (!reference_shortcuts.empty()) {
        reference_edges = reference_shortcuts.front().origin_edge_count;
      }
    }
  }

  const auto annotate = [&](SolutionState& solution) {
    EmbeddingVector vector = embedder.embed(solution.content);
    detail::normalize_to_unit(vector);
    solution.embedding = std::move(vector);
    solution.compilable = checker(solution);
  };

  const auto finalize = [&](const char* terminated_by) {
    result.terminated_by = terminated_by;
    result.within_budget = !budget.exhausted();
    result.final_solution = budget.exhausted()
                                ? detail::best_so_far(graph, task_embedding)
                                : final_node(graph);
    result.time_used = budget.time_used();
    result.tokens_used = budget.tokens_used();
    return result;
  };

  // Initial step: n_0 -> n_1 straight from the programmer.
  {
    detail::StepCharge charge;
    AgentReply reply = detail::call_agent(
        agents, "programmer", kProgrammerSystemPrompt,
        std::string(kPhasePreamble) + "TASK:\n" + task_text, budget, charge);
    result.ledger.push_back(charge.total);
    SolutionState solution = solution_from_content(
        reply.text, config.language_profile.default_filename);
    annotate(solution);
    append_step(graph, kInitialInstruction, std::move(solution), charge.total);
    if (charge.exhausted) return finalize(kTerminatedBudgetExhausted);
  }

  while (true) {
    const std::size_t edges = edge_count(graph);
    if (have_reference && reference_edges > 0 && edges >= reference_edges) {
      return finalize(kTerminatedReferenceLength);
    }
    if (budget.exhausted()) return finalize(kTerminatedBudgetExhausted);

    // Step k aligns to reference node k; step count is edges, the next step
    // departs from position edges - 1.
    const std::size_t position = edges - 1;
    std::vector<Shortcut> candidates;
    for (const Shortcut& shortcut : reference_shortcuts) {
      if (shortcut.from_index >= position) candidates.push_back(shortcut);
    }

    auto selection = select_shortcut(candidates, library.corpus, budget, config);
    result.gamma_trace.push_back(
        config.disable_gamma ? 0.0 : emergency_factor(budget).gamma);

    detail::StepCharge charge;
    const SolutionState& current = final_node(graph);

    if (selection) {
      const std::string review_prompt =
          "TASK:\n" + task_text + "\n\nCURRENT SOLUTION:\n" +
          detail::render_solution(current) + "\n\nIMPROVEMENT INSTRUCTION:\n" +
          selection->shortcut.instruction +
          "\n\nTurn this instruction into concrete revision guidance.";
      AgentReply review = detail::call_agent(agents, "reviewer",
                                             kReviewerSystemPrompt,
                                             review_prompt, budget, charge);
      if (charge.exhausted) {
        result.ledger.push_back(charge.total);
        return finalize(kTerminatedBudgetExhausted);
      }

      const std::string program_prompt =
          std::string(kPhasePreamble) + "TASK:\n" + task_text +
          "\n\nCURRENT SOLUTION:\n" + detail::render_solution(current) +
          "\n\nREVISION GUIDANCE:\n" + review.text;
      AgentReply revision = detail::call_agent(agents, "programmer",
                                               kProgrammerSystemPrompt,
                                               program_prompt, budget, charge);
      result.ledger.push_back(charge.total);
      SolutionState solution = solution_from_content(
          revision.text, config.language_profile.default_filename);
      annotate(solution);
      ShortcutOrigin origin;
      origin.task_id = selection->shortcut.origin_task_id;
      origin.from_index = selection->shortcut.from_index;
      origin.to_index = selection->shortcut.to_index;
      const std::size_t step_index = edge_count(graph);
      append_step(graph, selection->shortcut.instruction, std::move(solution),
                  charge.total, origin);
      result.applied_shortcuts.push_back(AppliedShortcut{origin, step_index});
      if (charge.exhausted) return finalize(kTerminatedBudgetExhausted);
      continue;
    }

    // No shortcut cleared the floor: plain review round, which is also the
    // only path to a natural completion.
    const std::string review_prompt =
        "TASK:\n" + task_text + "\n\nCURRENT SOLUTION:\n" +
        detail::render_solution(current) +
        "\n\nReview the solution and give revision guidance, or reply with " +
        kDoneMarker + " if it fulfils the task.";
    AgentReply review = detail::call_agent(agents, "reviewer",
                                           kReviewerSystemPrompt, review_prompt,
                                           budget, charge);
    if (charge.exhausted) {
      result.ledger.push_back(charge.total);
      return finalize(kTerminatedBudgetExhausted);
    }
    if (review.text.find(kDoneMarker) != std::string::npos) {
      result.ledger.push_back(charge.total);
      return finalize(kTerminatedNaturalCompletion);
    }

    const std::string program_prompt =
        std::string(kPhasePreamble) + "TASK:\n" + task_text +
        "\n\nCURRENT SOLUTION:\n" + detail::render_solution(current) +
        "\n\nREVISION GUIDANCE:\n" + review.text;
    AgentReply revision = detail::call_agent(agents, "programmer",
                                             kProgrammerSystemPrompt,
                                             program_prompt, budget, charge);
    result.ledger.push_back(charge.total);
    SolutionState solution = solution_from_content(
        revision.text, config.language_profile.default_filename);
    annotate(solution);
    append_step(graph, review.text, std::move(solution), charge.total);
    if (charge.exhausted) return finalize(kTerminatedBudgetExhausted);
  }
}

// ---------------------------------------------------------------------------
// Run directory persistence: trajectory.jsonl + result.json + solution files.

inline constexpr const char* kTrajectoryFilename = "trajectory.jsonl";
inline constexpr const char* kResultFilename = "result.json";
inline constexpr const char* kSolutionDirname = "solution";

inline void write_run_dir(const std::filesystem::path& dir,
                          const RunResult& result) {
  std::filesystem::create_directories(dir);
  write_trajectory_file(dir / kTrajectoryFilename, result.inference_graph);

  Json record;
  record["task_id"] = result.inference_graph.task_id;
  record["task_text"] = result.inference_graph.task_text;
  record["terminated_by"] = result.terminated_by;
  record["within_budget"] = result.within_budget;
  record["time_allocated"] = result.time_allocated;
  record["tokens_allocated"] = result.tokens_allocated;
  record["time_used"] = result.time_used;
  record["tokens_used"] = result.tokens_used;
  Json ledger = Json::array();
  for (const ResourceDelta& delta : result.ledger) {
    ledger.push_back(
        {{"time_seconds", delta.time_seconds}, {"tokens", delta.tokens}});
  }
  record["ledger"] = std::move(ledger);
  Json applied = Json::array();
  for (const AppliedShortcut& shortcut : result.applied_shortcuts) {
    applied.push_back({{"origin_task_id", shortcut.origin.task_id},
                       {"from_index", shortcut.origin.from_index},
                       {"to_index", shortcut.origin.to_index},
                       {"step_index", shortcut.step_index}});
  }
  record["applied_shortcuts"] = std::move(applied);
  record["reference_task_id"] = result.reference_task_id;
  record["reference_similarity"] = result.reference_similarity;
  record["gamma_trace"] = result.gamma_trace;
  record["final_node_index"] = result.final_solution.index;

  std::ofstream out(dir / kResultFilename, std::ios::binary);
  if (!out) raise(Errc::io_error, "cannot write " + (dir / kResultFilename).string());
  out << record.dump(2) << "\n";

  const auto solution_dir = dir / kSolutionDirname;
  std::filesystem::create_directories(solution_dir);
  for (const FileEntry& file : result.final_solution.files) {
    const std::filesystem::path rel(file.path);
    if (!detail::safe_relative_path(rel)) continue;
    const auto target = solution_dir / rel;
    std::filesystem::create_directories(target.parent_path());
    std::ofstream body(target, std::ios::binary);
    if (!body) raise(Errc::io_error, "cannot write " + target.string());
    body << file.body;
  }
}

inline RunResult load_run_dir(const std::filesystem::path& dir) {
  RunResult result;
  result.inference_graph = read_trajectory_file(dir / kTrajectoryFilename);

  const auto result_path = dir / kResultFilename;
  std::ifstream in(result_path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot read " + result_path.string());
  Json record = Json::parse(in, nullptr, false);
  if (record.is_discarded() || !record.is_object()) {
    detail::parse_fail(result_path.string(), 1, "invalid JSON object");
  }
  const std::string source = result_path.string();
  result.terminated_by = detail::need_string(record, "terminated_by", source, 1);
  const Json& within = detail::need(record, "within_budget", source, 1);
  if (!within.is_boolean()) {
    detail::parse_fail(source, 1, "within_budget must be a boolean");
  }
  result.within_budget = within.get<bool>();
  result.time_allocated = detail::need_number(record, "time_allocated", source, 1);
  result.tokens_allocated =
      detail::need_integer(record, "tokens_allocated", source, 1);
  result.time_used = detail::need_number(record, "time_used", source, 1);
  result.tokens_used = detail::need_integer(record, "tokens_used", source, 1);
  const Json& ledger = detail::need(record, "ledger", source, 1);
  if (!ledger.is_array()) detail::parse_fail(source, 1, "ledger must be an array");
  for (const Json& entry : ledger) {
    result.ledger.push_back(
        detail::usage_from_fields(entry, "time_seconds", "tokens", source, 1));
  }
  const Json& applied = detail::need(record, "applied_shortcuts", source, 1);
  if (!applied.is_array()) {
    detail::parse_fail(source, 1, "applied_shortcuts must be an array");
  }
  for (const Json& entry : applied) {
    AppliedShortcut shortcut;
    shortcut.origin.task_id =
        detail::need_string(entry, "origin_task_id", source, 1);
    shortcut.origin.from_index = static_cast<std::size_t>(
        detail::need_integer(entry, "from_index", source, 1));
    shortcut.origin.to_index = static_cast<std::size_t>(
        detail::need_integer(entry, "to_index", source, 1));
    shortcut.step_index = static_cast<std::size_t>(
        detail::need_integer(entry, "step_index", source, 1));
    result.applied_shortcuts.push_back(std::move(shortcut));
  }
  result.reference_task_id =
      detail::need_string(record, "reference_task_id", source, 1);
  result.reference_similarity =
      detail::need_number(record, "reference_similarity", source, 1);
  if (record.contains("gamma_trace") && record["gamma_trace"].is_array()) {
    for (const Json& value : record["gamma_trace"]) {
      if (value.is_number()) result.gamma_trace.push_back(value.get<double>());
    }
  }
  result.final_solution = final_node(result.inference_graph);
  if (record.contains("final_node_index")) {
    const auto index = static_cast<std::size_t>(
        detail::need_integer(record, "final_node_index", source, 1));
    if (index < result.inference_graph.nodes.size()) {
      result.final_solution = result.inference_graph.nodes[index];
    }
  }
  return result;
}

/// Subdirectories of `parent` holding a result.json, sorted by name.
inline std::vector<std::filesystem::path> list_run_dirs(
    const std::filesystem::path& parent) {
  std::vector<std::filesystem::path> dirs;
  if (!std::filesystem::is_directory(parent)) return dirs;
  for (const auto& entry : std::filesystem::directory_iterator(parent)) {
    if (entry.is_directory() &&
        std::filesystem::exists(entry.path() / kResultFilename)) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace chainshort
