#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include "chainshort/errors.hpp"
#include "chainshort/pipeline.hpp"
#include "chainshort/sandbox.hpp"

namespace chainshort {

/// Flat key=value configuration. The API credential intentionally has no key
/// here: it comes only from the environment variable named credential_env.
struct Config {
  // backend
  std::string base_url = "http://127.0.0.1:8080/v1";
  std::string model = "default-chat";
  std::string credential_env = "CHAINSHORT_API_KEY";
  std::string embedding_base_url;  // empty: reuse base_url
  std::string embedding_model = "default-embedding";
  std::string embedder = "offline";  // offline | live
  bool offline = false;              // scripted backend + offline embedder
  std::string script_path;           // required when offline

  // budgets and scoring
  double budget_seconds = 600.0;
  std::int64_t budget_tokens = 100000;
  bool disable_selection = false;
  bool disable_cost = false;
  bool disable_gamma = false;
  double utility_floor = 0.0;
  std::size_t reference_k = 1;
  double min_reference_sim = 0.0;

  // paths
  std::string library_path = "shortcuts.json";
  std::string stats_path = "stats.json";
  std::string trajectory_dir = "trajectories";
  std::string output_dir = "runs";

  // language profile
  std::string language_name = "python";
  std::string check_command = "python3 {file}";
  double check_timeout_seconds = 10.0;
  std::string comment_prefixes = "#";   // comma-separated
  std::string default_filename = "main.py";
  std::string sandbox_env_whitelist;    // comma-separated variable names

  // evaluation and mining
  std::size_t granularity_cap = 300;
  bool mine_final_only = false;
  std::size_t jobs = 1;
};

namespace detail {

inline std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split_csv_list(const std::string& text) {
  std::vector<std::string> items;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    const std::string item = trim(
        text.substr(start, end == std::string::npos ? std::string::npos
                                                    : end - start));
    if (!item.empty()) items.push_back(item);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return items;
}

inline bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  raise(Errc::configuration_error,
        "key '" + key + "' expects a boolean, got '" + value + "'");
}

inline double parse_real(const std::string& value, const std::string& key) {
  try {
    std::size_t consumed = 0;
    const double parsed = std::stod(value, &consumed);
    if (consumed == value.size() && std::isfinite(parsed)) return parsed;
  } catch (const std::exception&) {
  }
  raise(Errc::configuration_error,
        "key '" + key + "' expects a real number, got '" + value + "'");
}

inline std::int64_t parse_integer(const std::string& value,
                                  const std::string& key) {
  try {
    std::size_t consumed = 0;
    const long long parsed = std::stoll(value, &consumed);
    if (consumed == value.size()) return parsed;
  } catch (const std::exception&) {
  }
  raise(Errc::configuration_error,
        "key '" + key + "' expects an integer, got '" + value + "'");
}

}  // namespace detail

/// Parses the flat key=value format: one pair per line, # comments, unknown
/// keys rejected so typos surface immediately.
inline Config parse_config(std::istream& in, const std::string& source) {
  Config config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto separator = stripped.find('=');
    if (separator == std::string::npos) {
      raise(Errc::configuration_error,
            source + ":" + std::to_string(line_no) +
                ": expected key=value, got '" + stripped + "'");
    }
    const std::string key = detail::trim(stripped.substr(0, separator));
    const std::string value = detail::trim(stripped.substr(separator + 1));

    if (key == "base_url") config.base_url = value;
    else if (key == "model") config.model = value;
    else if (key == "credential_env") config.credential_env = value;
    else if (key == "embedding_base_url") config.embedding_base_url = value;
    else if (key == "embedding_model") config.embedding_model = value;
    else if (key == "embedder") config.embedder = value;
    else if (key == "offline") config.offline = detail::parse_bool(value, key);
    else if (key == "script_path") config.script_path = value;
    else if (key == "budget_seconds") config.budget_seconds = detail::parse_real(value, key);
    else if (key == "budget_tokens") config.budget_tokens = detail::parse_integer(value, key);
    else if (key == "disable_selection") config.disable_selection = detail::parse_bool(value, key);
    else if (key == "disable_cost") config.disable_cost = detail::parse_bool(value, key);
    else if (key == "disable_gamma") config.disable_gamma = detail::parse_bool(value, key);
    else if (key == "utility_floor") config.utility_floor = detail::parse_real(value, key);
    else if (key == "reference_k") config.reference_k = static_cast<std::size_t>(detail::parse_integer(value, key));
    else if (key == "min_reference_sim") config.min_reference_sim = detail::parse_real(value, key);
    else if (key == "library_path") config.library_path = value;
    else if (key == "stats_path") config.stats_path = value;
    else if (key == "trajectory_dir") config.trajectory_dir = value;
    else if (key == "output_dir") config.output_dir = value;
    else if (key == "language_name") config.language_name = value;
    else if (key == "check_command") config.check_command = value;
    else if (key == "check_timeout_seconds") config.check_timeout_seconds = detail::parse_real(value, key);
    else if (key == "comment_prefixes") config.comment_prefixes = value;
    else if (key == "default_filename") config.default_filename = value;
    else if (key == "sandbox_env_whitelist") config.sandbox_env_whitelist = value;
    else if (key == "granularity_cap") config.granularity_cap = static_cast<std::size_t>(detail::parse_integer(value, key));
    else if (key == "mine_final_only") config.mine_final_only = detail::parse_bool(value, key);
    else if (key == "jobs") config.jobs = static_cast<std::size_t>(detail::parse_integer(value, key));
    else {
      raise(Errc::configuration_error,
            source + ":" + std::to_string(line_no) + ": unknown key '" + key +
                "'");
    }
  }
  return config;
}

inline Config load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(Errc::configuration_error, "cannot read config " + path.string());
  }
  return parse_config(in, path.string());
}

inline void validate_config_values(const Config& config) {
  if (!(config.budget_seconds > 0.0) || !std::isfinite(config.budget_seconds) ||
      config.budget_tokens <= 0) {
    raise(Errc::configuration_error, "budgets must be positive");
  }
  if (!std::isfinite(config.utility_floor)) {
    raise(Errc::configuration_error, "utility_floor must be finite");
  }
  if (config.reference_k == 0) {
    raise(Errc::configuration_error, "reference_k must be positive");
  }
  if (config.granularity_cap == 0) {
    raise(Errc::configuration_error, "granularity_cap must be positive");
  }
  if (config.jobs == 0) {
    raise(Errc::configuration_error, "jobs must be positive");
  }
  if (!(config.check_timeout_seconds > 0.0) ||
      !std::isfinite(config.check_timeout_seconds)) {
    raise(Errc::configuration_error, "check_timeout_seconds must be positive");
  }
  if (config.embedder != "offline" && config.embedder != "live") {
    raise(Errc::configuration_error,
          "embedder must be 'offline' or 'live', got '" + config.embedder + "'");
  }
  if (config.check_command.empty()) {
    raise(Errc::configuration_error, "check_command must be non-empty");
  }
}

inline LanguageProfile language_profile_from(const Config& config) {
  LanguageProfile profile;
  profile.name = config.language_name;
  profile.check_command_template = config.check_command;
  profile.timeout_seconds = config.check_timeout_seconds;
  profile.comment_prefixes = detail::split_csv_list(config.comment_prefixes);
  profile.default_filename = config.default_filename;
  profile.env_whitelist = detail::split_csv_list(config.sandbox_env_whitelist);
  return profile;
}

inline RunConfig run_config_from(const Config& config) {
  RunConfig run;
  run.budget_time_seconds = config.budget_seconds;
  run.budget_tokens = config.budget_tokens;
  run.disable_selection = config.disable_selection;
  run.disable_cost = config.disable_cost;
  run.disable_gamma = config.disable_gamma;
  run.utility_floor = config.utility_floor;
  run.language_profile = language_profile_from(config);
  run.reference_k = config.reference_k;
  run.min_reference_sim = config.min_reference_sim;
  return run;
}

/// The credential never lives in the config file; it is read from the
/// environment variable the config names, empty when unset.
inline std::string load_credential(const Config& config) {
  if (config.credential_env.empty()) return "";
  const char* value = std::getenv(config.credential_env.c_str());
  return value ? value : "";
}

}  // namespace chainshort
