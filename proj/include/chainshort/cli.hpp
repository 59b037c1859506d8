#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "chainshort/backend.hpp"
#include "chainshort/config.hpp"
#include "chainshort/embedding.hpp"
#include "chainshort/errors.hpp"
#include "chainshort/evalkit.hpp"
#include "chainshort/mining.hpp"
#include "chainshort/net.hpp"
#include "chainshort/pipeline.hpp"
#include "chainshort/retrieval.hpp"
#include "chainshort/serialize.hpp"

namespace chainshort {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitOverBudget = 3;

namespace cli_detail {

inline std::unique_ptr<Embedder> make_embedder(const Config& config) {
  if (config.offline || config.embedder == "offline") {
    return std::make_unique<OfflineEmbedder>();
  }
  const std::string base = config.embedding_base_url.empty()
                               ? config.base_url
                               : config.embedding_base_url;
  return std::make_unique<HttpEmbedder>(base, config.embedding_model,
                                        load_credential(config));
}

inline std::unique_ptr<AgentBackend> make_run_backend(const Config& config) {
  if (config.offline) {
    if (config.script_path.empty()) {
      raise(Errc::configuration_error,
            "offline runs need script_path in the configuration");
    }
    return std::make_unique<ScriptedBackend>(
        load_script_file(config.script_path));
  }
  return std::make_unique<HttpChatBackend>(config.base_url, config.model,
                                           load_credential(config));
}

inline std::unique_ptr<AgentBackend> make_synthesizer(const Config& config) {
  if (config.offline) return std::make_unique<DeterministicSynthesizer>();
  return std::make_unique<HttpChatBackend>(config.base_url, config.model,
                                           load_credential(config));
}

inline std::string task_id_for(std::size_t position) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "task-%04zu", position + 1);
  return buffer;
}

/// A task argument is either literal text or a path to a text file.
inline std::string resolve_task_text(const std::string& argument) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(argument, ec)) {
    std::ifstream in(argument, std::ios::binary);
    if (!in) raise(Errc::io_error, "cannot read task file " + argument);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
      text.pop_back();
    }
    if (text.empty()) {
      raise(Errc::invalid_argument, "task file " + argument + " is empty");
    }
    return text;
  }
  if (argument.empty()) {
    raise(Errc::invalid_argument, "task text is empty");
  }
  return argument;
}

inline ShortcutLibrary load_library(const Config& config) {
  if (!std::filesystem::exists(config.library_path)) {
    raise(Errc::configuration_error,
          "shortcut library not found: " + config.library_path);
  }
  if (!std::filesystem::exists(config.stats_path)) {
    raise(Errc::configuration_error,
          "stats corpus not found: " + config.stats_path);
  }
  ShortcutLibrary library;
  library.entries = read_shortcuts_file(config.library_path);
  library.corpus = read_stats_file(config.stats_path);
  if (library.entries.empty()) {
    raise(Errc::configuration_error,
          "shortcut library is empty: " + config.library_path);
  }
  if (library.corpus.size != library.entries.size()) {
    raise(Errc::configuration_error,
          "stats corpus size " + std::to_string(library.corpus.size) +
              " does not match library size " +
              std::to_string(library.entries.size()));
  }
  return library;
}

inline std::string group_label(const std::filesystem::path& dir) {
  std::filesystem::path normalized = dir;
  if (normalized.filename().empty()) normalized = normalized.parent_path();
  const std::string name = normalized.filename().string();
  return name.empty() ? normalized.string() : name;
}

inline std::string format_real(double value) {
  char buffer[48];
  std::snprintf(buffer, sizeof(buffer), "%.6f", value);
  return buffer;
}

// ---------------------------------------------------------------------------
// Hand-rolled grouped-histogram SVG, self-contained and deterministic.

struct HistogramGroup {
  std::string label;
  std::vector<double> values;
};

inline constexpr const char* kHistogramColors[] = {"#4c78a8", "#f58518",
                                                   "#54a24b", "#e45756",
                                                   "#b279a2", "#72b7b2"};

inline std::string render_histogram_svg(const std::vector<HistogramGroup>& groups,
                                        const std::string& title) {
  constexpr int kWidth = 640;
  constexpr int kHeight = 360;
  constexpr int kLeft = 50;
  constexpr int kRight = 20;
  constexpr int kTop = 40;
  constexpr int kBottom = 50;
  constexpr std::size_t kBins = 10;

  double lo = 0.0;
  double hi = 0.0;
  bool any = false;
  for (const auto& group : groups) {
    for (double value : group.values) {
      if (!any) {
        lo = hi = value;
        any = true;
      } else {
        lo = std::min(lo, value);
        hi = std::max(hi, value);
      }
    }
  }
  if (!any) hi = lo + 1.0;
  if (hi <= lo) hi = lo + 1.0;

  std::vector<std::vector<std::size_t>> counts(groups.size(),
                                               std::vector<std::size_t>(kBins, 0));
  std::size_t max_count = 1;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (double value : groups[g].values) {
      auto bin = static_cast<std::size_t>((value - lo) / (hi - lo) * kBins);
      if (bin >= kBins) bin = kBins - 1;
      ++counts[g][bin];
      max_count = std::max(max_count, counts[g][bin]);
    }
  }

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const double bin_w = plot_w / static_cast<double>(kBins);
  const double bar_w =
      bin_w / static_cast<double>(groups.empty() ? 1 : groups.size());

  std::string svg;
  char buffer[512];
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
         "height=\"360\" viewBox=\"0 0 640 360\">\n";
  svg += "<rect width=\"640\" height=\"360\" fill=\"#ffffff\"/>\n";
  std::snprintf(buffer, sizeof(buffer),
                "<text x=\"%d\" y=\"24\" font-family=\"sans-serif\" "
                "font-size=\"16\" fill=\"#222222\">%s</text>\n",
                kLeft, title.c_str());
  svg += buffer;

  for (std::size_t g = 0; g < groups.size(); ++g) {
    const char* color = kHistogramColors[g % 6];
    for (std::size_t b = 0; b < kBins; ++b) {
      if (counts[g][b] == 0) continue;
      const double h = plot_h * static_cast<double>(counts[g][b]) /
                       static_cast<double>(max_count);
      const double x = kLeft + bin_w * static_cast<double>(b) +
                       bar_w * static_cast<double>(g);
      const double y = kTop + (plot_h - h);
      std::snprintf(buffer, sizeof(buffer),
                    "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" "
                    "height=\"%.2f\" fill=\"%s\"/>\n",
                    x, y, bar_w * 0.92, h, color);
      svg += buffer;
    }
    std::snprintf(buffer, sizeof(buffer),
                  "<rect x=\"%d\" y=\"%.2f\" width=\"12\" height=\"12\" "
                  "fill=\"%s\"/><text x=\"%d\" y=\"%.2f\" "
                  "font-family=\"sans-serif\" font-size=\"12\" "
                  "fill=\"#222222\">%s (n=%zu)</text>\n",
                  kLeft + 150 * static_cast<int>(g), kHeight - 16.0, color,
                  kLeft + 16 + 150 * static_cast<int>(g), kHeight - 6.0,
                  groups[g].label.c_str(), groups[g].values.size());
    svg += buffer;
  }

  std::snprintf(buffer, sizeof(buffer),
                "<line x1=\"%d\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
                "stroke=\"#222222\"/>\n",
                kLeft, kTop + plot_h, kLeft + plot_w, kTop + plot_h);
  svg += buffer;
  std::snprintf(buffer, sizeof(buffer),
                "<text x=\"%d\" y=\"%.2f\" font-family=\"sans-serif\" "
                "font-size=\"12\" fill=\"#222222\">%.6g</text>\n",
                kLeft, kTop + plot_h + 16, lo);
  svg += buffer;
  std::snprintf(buffer, sizeof(buffer),
                "<text x=\"%.2f\" y=\"%.2f\" font-family=\"sans-serif\" "
                "font-size=\"12\" fill=\"#222222\" text-anchor=\"end\">%.6g"
                "</text>\n",
                kLeft + plot_w, kTop + plot_h + 16, hi);
  svg += buffer;
  std::snprintf(buffer, sizeof(buffer),
                "<text x=\"12\" y=\"%d\" font-family=\"sans-serif\" "
                "font-size=\"12\" fill=\"#222222\">max %zu</text>\n",
                kTop + 8, max_count);
  svg += buffer;
  svg += "</svg>\n";
  return svg;
}

}  // namespace cli_detail

// ---------------------------------------------------------------------------
// Commands

inline int cmd_mine(const Config& config, const std::string& trajectory_dir,
                    const std::string& out_dir) {
  auto embedder = cli_detail::make_embedder(config);
  auto synthesizer = cli_detail::make_synthesizer(config);
  const LanguageProfile profile = language_profile_from(config);

  MiningOutput output =
      mine_directory(trajectory_dir, *embedder, *synthesizer, profile,
                     config.mine_final_only);
  for (const std::string& reason : output.report.skipped) {
    std::cerr << "skipped: " << reason << "\n";
  }

  std::filesystem::create_directories(out_dir);
  const auto out = std::filesystem::path(out_dir);
  write_shortcuts_file(out / "shortcuts.json", output.library.entries);
  write_stats_file(out / "stats.json", output.library.corpus);
  std::cout << "mined " << output.library.entries.size() << " shortcuts from "
            << output.report.trajectories << " trajectories ("
            << output.report.skipped.size() << " skipped)\n";
  return kExitOk;
}

inline int cmd_run(const Config& config, const std::vector<std::string>& tasks,
                   const std::string& out_dir) {
  validate_config_values(config);
  ShortcutLibrary library = cli_detail::load_library(config);
  auto embedder = cli_detail::make_embedder(config);
  ReferenceIndex index = index_from_library(library, *embedder);
  const RunConfig run_config = run_config_from(config);

  std::vector<std::string> task_texts;
  for (const std::string& task : tasks) {
    task_texts.push_back(cli_detail::resolve_task_text(task));
  }

  struct Slot {
    std::string task_id;
    std::optional<RunResult> result;
    std::string error;
  };
  std::vector<Slot> slots(task_texts.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    slots[i].task_id = cli_detail::task_id_for(i);
  }

  const auto worker_body = [&](std::size_t i) {
    try {
      auto backend = cli_detail::make_run_backend(config);
      RunResult result =
          run_task(slots[i].task_id, task_texts[i], run_config, library, index,
                   *backend, *embedder);
      write_run_dir(std::filesystem::path(out_dir) / slots[i].task_id, result);
      slots[i].result = std::move(result);
    } catch (const std::exception& error) {
      slots[i].error = error.what();
    }
  };

  const std::size_t jobs = std::max<std::size_t>(
      1, std::min(config.jobs, task_texts.size() ? task_texts.size() : 1));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < slots.size(); ++i) worker_body(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&]() {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= slots.size()) break;
          worker_body(i);
        }
      });
    }
    for (std::thread& worker : workers) worker.join();
  }

  bool any_failed = false;
  bool any_over_budget = false;
  for (const Slot& slot : slots) {
    if (!slot.error.empty()) {
      any_failed = true;
      std::cerr << slot.task_id << ": error: " << slot.error << "\n";
      continue;
    }
    const RunResult& result = *slot.result;
    if (!result.within_budget) any_over_budget = true;
    std::cout << slot.task_id << ": terminated_by=" << result.terminated_by
              << " within_budget=" << (result.within_budget ? "true" : "false")
              << " edges=" << edge_count(result.inference_graph)
              << " time=" << cli_detail::format_real(result.time_used)
              << " tokens=" << result.tokens_used << "\n";
  }
  if (any_failed) return kExitConfigError;
  return any_over_budget ? kExitOverBudget : kExitOk;
}

inline int cmd_eval(const Config& config, const std::string& run_dir,
                    const std::string& out_path) {
  const auto dirs = list_run_dirs(run_dir);
  if (dirs.empty()) {
    raise(Errc::configuration_error,
          "no run results under " + run_dir);
  }
  std::vector<RunResult> results;
  for (const auto& dir : dirs) results.push_back(load_run_dir(dir));

  auto embedder = cli_detail::make_embedder(config);
  const LanguageProfile profile = language_profile_from(config);
  const MetricsReport report =
      evaluate_runs(results, *embedder, sandbox_checker(profile),
                    profile.comment_prefixes, config.granularity_cap);

  const std::string target =
      out_path.empty() ? (std::filesystem::path(run_dir) / "metrics.csv").string()
                       : out_path;
  std::ofstream out(target, std::ios::binary);
  if (!out) raise(Errc::io_error, "cannot write " + target);
  write_metrics_csv(out, report);

  std::cout << "aggregate completeness=" << cli_detail::format_real(report.completeness)
            << " executability=" << cli_detail::format_real(report.executability)
            << " consistency=" << cli_detail::format_real(report.consistency)
            << " granularity=" << cli_detail::format_real(report.granularity)
            << " quality=" << cli_detail::format_real(report.quality)
            << " bcr=" << cli_detail::format_real(report.bcr) << "\n";
  return kExitOk;
}

inline int cmd_stats(const std::vector<std::string>& run_dirs,
                     const std::string& out_dir) {
  struct Row {
    std::string group;
    std::size_t path_length;
    double time_seconds;
    std::int64_t tokens;
  };
  std::vector<Row> rows;
  std::vector<cli_detail::HistogramGroup> lengths;
  std::vector<cli_detail::HistogramGroup> times;
  std::vector<cli_detail::HistogramGroup> tokens;

  for (const std::string& run_dir : run_dirs) {
    const std::string group = cli_detail::group_label(run_dir);
    cli_detail::HistogramGroup length_group{group, {}};
    cli_detail::HistogramGroup time_group{group, {}};
    cli_detail::HistogramGroup token_group{group, {}};
    for (const auto& dir : list_run_dirs(run_dir)) {
      const RunResult result = load_run_dir(dir);
      Row row;
      row.group = group;
      row.path_length = edge_count(result.inference_graph);
      row.time_seconds = result.time_used;
      row.tokens = result.tokens_used;
      rows.push_back(row);
      length_group.values.push_back(static_cast<double>(row.path_length));
      time_group.values.push_back(row.time_seconds);
      token_group.values.push_back(static_cast<double>(row.tokens));
    }
    lengths.push_back(std::move(length_group));
    times.push_back(std::move(time_group));
    tokens.push_back(std::move(token_group));
  }

  std::filesystem::create_directories(out_dir);
  const auto out = std::filesystem::path(out_dir);
  {
    std::ofstream csv(out / "distributions.csv", std::ios::binary);
    if (!csv) raise(Errc::io_error, "cannot write distributions.csv");
    csv << "group,path_length,time_seconds,tokens\n";
    for (const Row& row : rows) {
      csv << row.group << "," << row.path_length << ","
          << cli_detail::format_real(row.time_seconds) << "," << row.tokens
          << "\n";
    }
  }
  const auto write_svg = [&](const char* name,
                             const std::vector<cli_detail::HistogramGroup>& groups,
                             const char* title) {
    std::ofstream svg(out / name, std::ios::binary);
    if (!svg) raise(Errc::io_error, std::string("cannot write ") + name);
    svg << cli_detail::render_histogram_svg(groups, title);
  };
  write_svg("path_length.svg", lengths, "Path length distribution");
  write_svg("time_seconds.svg", times, "Time cost distribution");
  write_svg("tokens.svg", tokens, "Token count distribution");

  std::cout << "wrote " << rows.size() << " rows across " << run_dirs.size()
            << " groups\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Argument surface

inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"shortcut-guided multi-agent task runner"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "key=value configuration file");

  std::optional<double> budget_seconds;
  std::optional<std::int64_t> budget_tokens;
  std::optional<double> utility_floor;
  std::optional<std::size_t> jobs;
  std::optional<double> min_reference_sim;
  bool disable_selection = false;
  bool disable_cost = false;
  bool disable_gamma = false;
  bool offline = false;
  app.add_option("--budget-seconds", budget_seconds, "time budget override");
  app.add_option("--budget-tokens", budget_tokens, "token budget override");
  app.add_flag("--disable-selection", disable_selection,
               "skip the feasibility filter");
  app.add_flag("--disable-cost", disable_cost, "score utility by value only");
  app.add_flag("--disable-gamma", disable_gamma, "pin the emergency factor to 0");
  app.add_option("--utility-floor", utility_floor,
                 "minimum utility a shortcut must reach");
  app.add_flag("--offline", offline, "scripted backend plus offline embedder");
  app.add_option("--jobs", jobs, "parallel task runs");
  app.add_option("--min-reference-sim", min_reference_sim,
                 "minimum similarity for adopting a reference");

  auto* mine = app.add_subcommand("mine", "build a shortcut library");
  std::string mine_trajectories;
  std::string mine_out;
  bool mine_final_only = false;
  mine->add_option("--trajectories", mine_trajectories, "trajectory directory");
  mine->add_option("--out", mine_out, "output directory");
  mine->add_flag("--final-only", mine_final_only,
                 "only mine pairs targeting the final node");

  auto* run = app.add_subcommand("run", "run tasks against a library");
  std::vector<std::string> run_tasks;
  std::string run_out;
  run->add_option("tasks", run_tasks, "task texts or files")->required();
  run->add_option("--out", run_out, "output directory");

  auto* eval = app.add_subcommand("eval", "evaluate run outputs");
  std::string eval_dir;
  std::string eval_out;
  eval->add_option("run_dir", eval_dir, "directory of run results")->required();
  eval->add_option("--out", eval_out, "metrics.csv path");

  auto* stats = app.add_subcommand("stats", "distribution statistics");
  std::vector<std::string> stats_dirs;
  std::string stats_out;
  stats->add_option("run_dirs", stats_dirs, "one directory per group")
      ->required();
  stats->add_option("--out", stats_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    return app.exit(error) == 0 ? kExitOk : kExitConfigError;
  }

  try {
    Config config;
    if (!config_path.empty()) config = load_config_file(config_path);
    if (budget_seconds) config.budget_seconds = *budget_seconds;
    if (budget_tokens) config.budget_tokens = *budget_tokens;
    if (utility_floor) config.utility_floor = *utility_floor;
    if (jobs) config.jobs = *jobs;
    if (min_reference_sim) config.min_reference_sim = *min_reference_sim;
    if (disable_selection) config.disable_selection = true;
    if (disable_cost) config.disable_cost = true;
    if (disable_gamma) config.disable_gamma = true;
    if (offline) config.offline = true;
    validate_config_values(config);

    if (app.got_subcommand(mine)) {
      const std::string trajectories = mine_trajectories.empty()
                                           ? config.trajectory_dir
                                           : mine_trajectories;
      const std::string out = mine_out.empty() ? "." : mine_out;
      Config mine_config = config;
      if (mine_final_only) mine_config.mine_final_only = true;
      return cmd_mine(mine_config, trajectories, out);
    }
    if (app.got_subcommand(run)) {
      const std::string out = run_out.empty() ? config.output_dir : run_out;
      return cmd_run(config, run_tasks, out);
    }
    if (app.got_subcommand(eval)) {
      return cmd_eval(config, eval_dir, eval_out);
    }
    if (app.got_subcommand(stats)) {
      return cmd_stats(stats_dirs, stats_out);
    }
    return kExitConfigError;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return kExitConfigError;
  }
}

}  // namespace chainshort
