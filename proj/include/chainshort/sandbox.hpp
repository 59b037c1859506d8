#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "chainshort/errors.hpp"
#include "chainshort/graph.hpp"

namespace chainshort {

/// Outcome of one compile/run check. timed_out implies compilable == 0.
struct ExecutionVerdict {
  int compilable = 0;
  std::optional<int> exit_code;
  bool timed_out = false;
  std::string diagnostics;
  double wall_time_seconds = 0.0;
};

/// How to check a solution in some language: a command template with a
/// {file} placeholder for the entry file, run inside a scratch directory.
/// Whether "compilable" means a syntax check or a bounded run is entirely
/// the template's choice (e.g. "python3 -m py_compile {file}" vs
/// "python3 {file}").
struct LanguageProfile {
  std::string name = "python";
  std::string check_command_template = "python3 {file}";
  double timeout_seconds = 10.0;
  std::vector<std::string> comment_prefixes = {"#"};
  std::string default_filename = "main.py";
  std::vector<std::string> env_whitelist;  // passed through in addition to PATH

  bool valid() const {
    return timeout_seconds > 0.0 && std::isfinite(timeout_seconds) &&
           !check_command_template.empty();
  }
};

namespace proc {

struct RunOutcome {
  std::optional<int> exit_code;  // unset when killed by signal
  bool timed_out = false;
  std::string output;  // stdout + stderr interleaved, capped
  double wall_time_seconds = 0.0;
};

constexpr std::size_t kOutputCap = 65536;

/// Runs argv in `workdir` under a scrubbed environment (PATH plus an explicit
/// whitelist), killing the whole process group at the deadline. Throws
/// environment-error when the binary itself cannot be executed, which is a
/// different thing from the program failing.
inline RunOutcome run_command(const std::vector<std::string>& argv,
                              const std::filesystem::path& workdir,
                              double timeout_seconds,
                              const std::vector<std::string>& env_whitelist = {}) {
  if (argv.empty()) {
    raise(Errc::invalid_argument, "empty command");
  }

  int out_pipe[2];
  int status_pipe[2];
  if (pipe(out_pipe) != 0 || pipe2(status_pipe, O_CLOEXEC) != 0) {
    raise(Errc::environment_error, "pipe creation failed");
  }

  std::vector<std::string> env_strings;
  const char* path = std::getenv("PATH");
  env_strings.push_back(std::string("PATH=") +
                        (path ? path : "/usr/local/bin:/usr/bin:/bin"));
  for (const std::string& name : env_whitelist) {
    if (const char* value = std::getenv(name.c_str())) {
      env_strings.push_back(name + "=" + value);
    }
  }

  std::vector<char*> argv_ptrs;
  for (const std::string& arg : argv) {
    argv_ptrs.push_back(const_cast<char*>(arg.c_str()));
  }
  argv_ptrs.push_back(nullptr);
  std::vector<char*> env_ptrs;
  for (const std::string& e : env_strings) {
    env_ptrs.push_back(const_cast<char*>(e.c_str()));
  }
  env_ptrs.push_back(nullptr);

  const auto start = std::chrono::steady_clock::now();
  const pid_t pid = fork();
  if (pid < 0) {
    raise(Errc::environment_error, "fork failed");
  }
  if (pid == 0) {
    setpgid(0, 0);
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(out_pipe[1], STDERR_FILENO);
    close(out_pipe[0]);
    close(out_pipe[1]);
    close(status_pipe[0]);
    if (chdir(workdir.c_str()) != 0) {
      int err = errno;
      ssize_t ignored = write(status_pipe[1], &err, sizeof(err));
      (void)ignored;
      _exit(127);
    }
    execvpe(argv_ptrs[0], argv_ptrs.data(), env_ptrs.data());
    int err = errno;
    ssize_t ignored = write(status_pipe[1], &err, sizeof(err));
    (void)ignored;
    _exit(127);
  }

  setpgid(pid, pid);  // parent-side too; whichever runs first wins
  close(out_pipe[1]);
  close(status_pipe[1]);

  RunOutcome outcome;
  const auto deadline =
      start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                  std::chrono::duration<double>(timeout_seconds));
  bool pipe_open = true;
  bool exited = false;
  int wait_status = 0;
  char buffer[4096];

  while (true) {
    if (pipe_open) {
      pollfd pfd{out_pipe[0], POLLIN, 0};
      const int ready = poll(&pfd, 1, 20);
      if (ready > 0) {
        const ssize_t n = read(out_pipe[0], buffer, sizeof(buffer));
        if (n > 0) {
          if (outcome.output.size() < kOutputCap) {
            outcome.output.append(
                buffer, static_cast<std::size_t>(std::min<ssize_t>(
                            n, static_cast<ssize_t>(kOutputCap - outcome.output.size()))));
          }
        } else {
          pipe_open = false;
        }
      }
    } else if (!exited) {
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }

    if (!exited) {
      const pid_t reaped = waitpid(pid, &wait_status, WNOHANG);
      if (reaped == pid) exited = true;
    }
    if (exited && !pipe_open) break;
    if (exited && pipe_open) continue;  // drain remaining output

    if (!outcome.timed_out && std::chrono::steady_clock::now() >= deadline) {
      outcome.timed_out = true;
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
    }
  }
  close(out_pipe[0]);

  outcome.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  int exec_errno = 0;
  const ssize_t status_read =
      read(status_pipe[0], &exec_errno, sizeof(exec_errno));
  close(status_pipe[0]);
  if (status_read == sizeof(exec_errno)) {
    raise(Errc::environment_error,
          "cannot execute '" + argv[0] + "': " + std::strerror(exec_errno));
  }

  if (!outcome.timed_out) {
    if (WIFEXITED(wait_status)) {
      outcome.exit_code = WEXITSTATUS(wait_status);
    } else if (WIFSIGNALED(wait_status)) {
      outcome.exit_code = 128 + WTERMSIG(wait_status);
    }
  }
  return outcome;
}

/// Scratch directory removed on scope exit, success or not.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "chainshort-") {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / (prefix + "XXXXXX")).string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) {
      raise(Errc::environment_error, "mkdtemp failed");
    }
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace proc

namespace detail {

inline bool safe_relative_path(const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute()) return false;
  for (const auto& part : p) {
    if (part == "..") return false;
  }
  return true;
}

inline std::vector<std::string> split_command(const std::string& command,
                                              const std::string& entry_file) {
  std::vector<std::string> argv;
  std::string token;
  for (char c : command) {
    if (c == ' ' || c == '\t') {
      if (!token.empty()) argv.push_back(std::move(token)), token.clear();
    } else {
      token += c;
    }
  }
  if (!token.empty()) argv.push_back(std::move(token));
  for (std::string& arg : argv) {
    std::size_t at;
    while ((at = arg.find("{file}")) != std::string::npos) {
      arg.replace(at, 6, entry_file);
    }
  }
  return argv;
}

inline std::string pick_entry_file(const std::vector<FileEntry>& files) {
  for (const FileEntry& f : files) {
    const auto stem = std::filesystem::path(f.path).stem().string();
    if (stem == "main") return f.path;
  }
  return files.front().path;
}

}  // namespace detail

/// Materializes the solution's files in a scratch directory, runs the
/// profile's check command there with a timeout, and reports whether it
/// exited 0. The scratch directory is gone by the time this returns.
inline ExecutionVerdict check_compilable(const SolutionState& solution,
                                         const LanguageProfile& profile) {
  if (!profile.valid()) {
    raise(Errc::invalid_argument, "invalid language profile");
  }
  if (solution.files.empty()) {
    ExecutionVerdict verdict;
    verdict.compilable = 0;
    verdict.diagnostics = "empty solution";
    return verdict;
  }

  proc::TempDir scratch;
  for (const FileEntry& file : solution.files) {
    const std::filesystem::path rel(file.path);
    if (!detail::safe_relative_path(rel)) {
      raise(Errc::invalid_argument,
            "unsafe solution file path: '" + file.path + "'");
    }
    const auto target = scratch.path() / rel;
    std::filesystem::create_directories(target.parent_path());
    std::ofstream out(target, std::ios::binary);
    out << file.body;
    if (!out) {
      raise(Errc::environment_error, "cannot write " + target.string());
    }
  }

  const std::string entry = detail::pick_entry_file(solution.files);
  const auto argv = detail::split_command(profile.check_command_template, entry);
  const auto run = proc::run_command(argv, scratch.path(),
                                     profile.timeout_seconds,
                                     profile.env_whitelist);

  ExecutionVerdict verdict;
  verdict.timed_out = run.timed_out;
  verdict.exit_code = run.exit_code;
  verdict.wall_time_seconds = run.wall_time_seconds;
  verdict.diagnostics = run.timed_out ? "timed out\n" + run.output : run.output;
  verdict.compilable =
      (!run.timed_out && run.exit_code && *run.exit_code == 0) ? 1 : 0;
  return verdict;
}

}  // namespace chainshort
