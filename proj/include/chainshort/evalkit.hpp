#pragma once

#include <cctype>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "chainshort/embedding.hpp"
#include "chainshort/errors.hpp"
#include "chainshort/graph.hpp"
#include "chainshort/pipeline.hpp"
#include "chainshort/sandbox.hpp"

namespace chainshort {

inline constexpr std::size_t kDefaultGranularityCap = 300;

namespace detail {

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

/// Case-insensitive standalone-token scan for placeholder markers, so
/// identifiers like "todoList" do not count.
inline bool has_placeholder_token(const std::string& body) {
  static const char* kMarkers[] = {"todo", "fixme"};
  std::string lowered;
  lowered.reserve(body.size());
  for (char c : body) {
    lowered += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  for (const char* marker : kMarkers) {
    const std::string needle(marker);
    std::size_t at = 0;
    while ((at = lowered.find(needle, at)) != std::string::npos) {
      const bool left_ok = at == 0 || !is_word_char(lowered[at - 1]);
      const std::size_t end = at + needle.size();
      const bool right_ok = end >= lowered.size() || !is_word_char(lowered[end]);
      if (left_ok && right_ok) return true;
      at += 1;
    }
  }
  return false;
}

inline bool is_comment_line(const std::string& line,
                            const std::vector<std::string>& prefixes) {
  std::size_t start = line.find_first_not_of(" \t");
  if (start == std::string::npos) return false;
  for (const std::string& prefix : prefixes) {
    if (!prefix.empty() && line.compare(start, prefix.size(), prefix) == 0) {
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Fraction of files free of placeholder tokens; an empty file list scores 0
/// and the caller is expected to flag the task rather than average it in.
inline double completeness(const std::vector<FileEntry>& files) {
  if (files.empty()) return 0.0;
  std::size_t clean = 0;
  for (const FileEntry& file : files) {
    if (!detail::has_placeholder_token(file.body)) ++clean;
  }
  return static_cast<double>(clean) / static_cast<double>(files.size());
}

inline double executability(const std::vector<ExecutionVerdict>& verdicts) {
  if (verdicts.empty()) {
    raise(Errc::invalid_argument, "executability over zero verdicts");
  }
  std::size_t passing = 0;
  for (const ExecutionVerdict& verdict : verdicts) {
    if (verdict.compilable == 1) ++passing;
  }
  return static_cast<double>(passing) / static_cast<double>(verdicts.size());
}

inline double consistency(const std::string& code_text,
                          const std::string& task_text,
                          const Embedder& embedder) {
  if (code_text.empty() || task_text.empty()) return 0.0;
  return cosine(embedder.embed(code_text), embedder.embed(task_text));
}

/// Non-blank, non-comment lines across all files.
inline std::size_t count_loc(const std::vector<FileEntry>& files,
                             const std::vector<std::string>& comment_prefixes) {
  std::size_t loc = 0;
  for (const FileEntry& file : files) {
    std::size_t start = 0;
    while (start <= file.body.size()) {
      std::size_t end = file.body.find('\n', start);
      const std::string line = file.body.substr(
          start, end == std::string::npos ? std::string::npos : end - start);
      if (line.find_first_not_of(" \t\r") != std::string::npos &&
          !detail::is_comment_line(line, comment_prefixes)) {
        ++loc;
      }
      if (end == std::string::npos) break;
      start = end + 1;
    }
  }
  return loc;
}

inline double granularity(std::size_t loc, std::size_t cap) {
  if (cap == 0) {
    raise(Errc::invalid_argument, "granularity cap must be positive");
  }
  const double ratio = static_cast<double>(loc) / static_cast<double>(cap);
  return ratio < 1.0 ? ratio : 1.0;
}

inline double quality(double c, double e, double s, double g) {
  if (!std::isfinite(c) || !std::isfinite(e) || !std::isfinite(s) ||
      !std::isfinite(g)) {
    raise(Errc::invalid_argument, "quality factors must be finite");
  }
  return c * e * s * g;
}

inline double bcr(const std::vector<RunResult>& results) {
  if (results.empty()) {
    raise(Errc::invalid_argument, "budget compliance over zero runs");
  }
  std::size_t within = 0;
  for (const RunResult& result : results) {
    if (result.within_budget) ++within;
  }
  return static_cast<double>(within) / static_cast<double>(results.size());
}

struct TaskMetrics {
  std::string task_id;
  bool evaluable = false;  // false: no solution files, excluded from aggregates
  double completeness = 0.0;
  double executability = 0.0;
  double consistency = 0.0;
  double granularity = 0.0;
  double quality = 0.0;
  bool within_budget = false;
};

struct MetricsReport {
  double completeness = 0.0;
  double executability = 0.0;
  double consistency = 0.0;
  double granularity = 0.0;
  double quality = 0.0;  // product of the four aggregate means
  double bcr = 0.0;
  std::vector<TaskMetrics> per_task;
  std::size_t evaluated = 0;  // rows feeding the aggregates
};

inline TaskMetrics evaluate_run(const RunResult& result,
                                const Embedder& embedder,
                                const CompileChecker& checker,
                                const std::vector<std::string>& comment_prefixes,
                                std::size_t granularity_cap) {
  TaskMetrics metrics;
  metrics.task_id = result.inference_graph.task_id;
  metrics.within_budget = result.within_budget;
  const SolutionState& solution = result.final_solution;
  if (solution.files.empty()) {
    metrics.evaluable = false;
    return metrics;
  }
  metrics.evaluable = true;
  metrics.completeness = completeness(solution.files);
  metrics.executability = checker(solution) ? 1.0 : 0.0;
  metrics.consistency =
      consistency(solution.content, result.inference_graph.task_text, embedder);
  metrics.granularity =
      granularity(count_loc(solution.files, comment_prefixes), granularity_cap);
  metrics.quality = quality(metrics.completeness, metrics.executability,
                            metrics.consistency, metrics.granularity);
  return metrics;
}

/// Aggregates per-task rows into the report. Non-evaluable rows are kept in
/// per_task but excluded from every aggregate, the budget compliance rate
/// included.
inline MetricsReport evaluate_runs(
    const std::vector<RunResult>& results, const Embedder& embedder,
    const CompileChecker& checker,
    const std::vector<std::string>& comment_prefixes,
    std::size_t granularity_cap = kDefaultGranularityCap) {
  if (results.empty()) {
    raise(Errc::invalid_argument, "evaluation over zero runs");
  }
  MetricsReport report;
  for (const RunResult& result : results) {
    report.per_task.push_back(evaluate_run(result, embedder, checker,
                                           comment_prefixes, granularity_cap));
  }
  for (const TaskMetrics& row : report.per_task) {
    if (!row.evaluable) continue;
    ++report.evaluated;
    report.completeness += row.completeness;
    report.executability += row.executability;
    report.consistency += row.consistency;
    report.granularity += row.granularity;
    if (row.within_budget) report.bcr += 1.0;
  }
  if (report.evaluated > 0) {
    const double n = static_cast<double>(report.evaluated);
    report.completeness /= n;
    report.executability /= n;
    report.consistency /= n;
    report.granularity /= n;
    report.bcr /= n;
    report.quality = quality(report.completeness, report.executability,
                             report.consistency, report.granularity);
  }
  return report;
}

namespace detail {

inline std::string format_metric(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.6f", value);
  return buffer;
}

}  // namespace detail

/// metrics.csv: one row per task plus an aggregate row. Non-evaluable rows
/// carry NA in the metric columns.
inline void write_metrics_csv(std::ostream& out, const MetricsReport& report) {
  out << "task_id,completeness,executability,consistency,granularity,quality,"
         "within_budget\n";
  for (const TaskMetrics& row : report.per_task) {
    out << row.task_id << ",";
    if (row.evaluable) {
      out << detail::format_metric(row.completeness) << ","
          << detail::format_metric(row.executability) << ","
          << detail::format_metric(row.consistency) << ","
          << detail::format_metric(row.granularity) << ","
          << detail::format_metric(row.quality) << ",";
    } else {
      out << "NA,NA,NA,NA,NA,";
    }
    out << (row.within_budget ? 1 : 0) << "\n";
  }
  out << "aggregate," << detail::format_metric(report.completeness) << ","
      << detail::format_metric(report.executability) << ","
      << detail::format_metric(report.consistency) << ","
      << detail::format_metric(report.granularity) << ","
      << detail::format_metric(report.quality) << ","
      << detail::format_metric(report.bcr) << "\n";
}

}  // namespace chainshort
