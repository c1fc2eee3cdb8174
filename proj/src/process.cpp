// POSIX process control for solver runs: each run gets its own process group,
// output is captured through a pipe, and the whole group is signalled on
// timeout and reaped before returning.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <regex>
#include <thread>

#include "stratinv/error.hpp"
#include "stratinv/solver_runner.hpp"

namespace stratinv {
namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kMaxCapturedBytes = 16u << 20;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) {
    s.replace(pos, from.size(), to);
  }
}

std::vector<std::string> expand_command(const SolverConfig& config, const Task& task) {
  std::vector<std::string> argv;
  const std::string options = join(task.strategy_tokens, " ");
  for (const auto& tok : config.command_template) {
    if (tok == "{strategy_options}") {
      argv.insert(argv.end(), task.strategy_tokens.begin(), task.strategy_tokens.end());
      continue;
    }
    std::string t = tok;
    replace_all(t, "{problem}", task.problem_path.string());
    replace_all(t, "{timeout_s}", format_limit(task.limit_s));
    replace_all(t, "{strategy_options}", options);
    argv.push_back(std::move(t));
  }
  return argv;
}

bool any_match(const std::vector<std::string>& patterns, const std::string& text) {
  for (const auto& p : patterns) {
    if (std::regex_search(text, std::regex(p))) return true;
  }
  return false;
}

void kill_group(pid_t pgid, int sig) {
  if (pgid > 0) ::kill(-pgid, sig);
}

void drain(int fd, std::string& out) {
  char buf[65536];
  while (true) {
    ssize_t n = ::read(fd, buf, sizeof buf);
    if (n > 0) {
      if (out.size() < kMaxCapturedBytes) out.append(buf, static_cast<std::size_t>(n));
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    break;
  }
}

void write_raw_log(const SolverConfig& config, const Task& task, const std::string& output) {
  if (!config.raw_log_dir) return;
  std::error_code ec;
  std::filesystem::create_directories(*config.raw_log_dir, ec);
  const std::string name = hex_digits(
      fnv1a64(task.strategy_key + '\n' + task.problem_id + '\n' + task.variant + '\n' +
              format_limit(task.limit_s)),
      16);
  std::ofstream(*config.raw_log_dir / (name + ".log")) << output;
}

struct ChildResult {
  bool launched = false;
  int launch_errno = 0;
  bool timed_out = false;
  bool hard_killed = false;
  int wait_status = 0;
  double runtime_s = 0.0;
  std::string output;
};

ChildResult spawn_and_wait(const SolverConfig& config, const std::vector<std::string>& argv,
                           double limit_s) {
  ChildResult result;

  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  const std::string workdir = config.working_dir.string();

  int out_pipe[2];
  int err_pipe[2];
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) throw OrchestrationError("pipe2 failed");
  if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    throw OrchestrationError("pipe2 failed");
  }

  rlimit cpu{};
  rlimit mem{};
  if (config.cpu_limit) {
    cpu.rlim_cur = static_cast<rlim_t>(std::ceil(limit_s));
    cpu.rlim_max = cpu.rlim_cur + 1;
  }
  if (config.memory_limit_mb) {
    mem.rlim_cur = mem.rlim_max = static_cast<rlim_t>(*config.memory_limit_mb) << 20;
  }

  const auto t0 = Clock::now();
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) ::close(fd);
    throw OrchestrationError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    // Child: async-signal-safe calls only.
    ::setpgid(0, 0);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::dup2(out_pipe[1], STDERR_FILENO);
    int devnull = ::open("/dev/null", O_RDONLY | O_CLOEXEC);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    if (!workdir.empty() && ::chdir(workdir.c_str()) != 0) {
      int e = errno;
      (void)!::write(err_pipe[1], &e, sizeof e);
      ::_exit(127);
    }
    if (config.cpu_limit) ::setrlimit(RLIMIT_CPU, &cpu);
    if (config.memory_limit_mb) ::setrlimit(RLIMIT_AS, &mem);
    ::execvp(cargv[0], cargv.data());
    int e = errno;
    (void)!::write(err_pipe[1], &e, sizeof e);
    ::_exit(127);
  }

  ::setpgid(pid, pid);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);

  int child_errno = 0;
  ssize_t n;
  do {
    n = ::read(err_pipe[0], &child_errno, sizeof child_errno);
  } while (n < 0 && errno == EINTR);
  ::close(err_pipe[0]);
  if (n == static_cast<ssize_t>(sizeof child_errno)) {
    ::waitpid(pid, &result.wait_status, 0);
    ::close(out_pipe[0]);
    result.launch_errno = child_errno;
    result.runtime_s = round_ms(seconds_since(t0));
    return result;
  }
  result.launched = true;

  ::fcntl(out_pipe[0], F_SETFL, ::fcntl(out_pipe[0], F_GETFL) | O_NONBLOCK);
  bool pipe_open = true;
  bool exited = false;
  while (!exited) {
    const double elapsed = seconds_since(t0);
    if (elapsed >= limit_s) break;
    const int wait_ms = static_cast<int>(std::min(20.0, std::ceil((limit_s - elapsed) * 1000.0)));
    if (pipe_open) {
      pollfd pfd{out_pipe[0], POLLIN, 0};
      int r = ::poll(&pfd, 1, std::max(wait_ms, 1));
      if (r > 0) {
        char buf[65536];
        ssize_t got = ::read(out_pipe[0], buf, sizeof buf);
        if (got > 0) {
          if (result.output.size() < kMaxCapturedBytes) {
            result.output.append(buf, static_cast<std::size_t>(got));
          }
        } else if (got == 0) {
          pipe_open = false;
        }
      }
    } else {
      std::this_thread::sleep_for(std::chrono::milliseconds(std::max(wait_ms, 1)));
    }
    pid_t w = ::waitpid(pid, &result.wait_status, WNOHANG);
    if (w == pid) exited = true;
  }

  if (exited) {
    result.runtime_s = round_ms(seconds_since(t0));
  } else {
    result.timed_out = true;
    kill_group(pid, SIGTERM);
    const auto deadline = Clock::now() + std::chrono::duration<double>(config.grace_period_s);
    while (Clock::now() < deadline) {
      if (::waitpid(pid, &result.wait_status, WNOHANG) == pid) {
        exited = true;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (!exited) {
      result.hard_killed = true;
      kill_group(pid, SIGKILL);
      ::waitpid(pid, &result.wait_status, 0);
    }
    result.runtime_s = round_ms(seconds_since(t0));
  }

  // Leftover descendants (solvers that fork helpers) die with the group.
  kill_group(pid, SIGKILL);
  const auto settle = Clock::now() + std::chrono::milliseconds(200);
  while (::kill(-pid, 0) == 0 && Clock::now() < settle) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  drain(out_pipe[0], result.output);
  ::close(out_pipe[0]);
  return result;
}

}  // namespace

EvalOutcome run_task(const SolverConfig& config, const Task& task) {
  EvalOutcome out{task.problem_id, task.strategy_key, task.variant, task.limit_s,
                  Verdict::error,  0.0,               {}};
  const auto argv = expand_command(config, task);
  if (argv.empty()) {
    out.raw_status = "launch-failed: empty command";
    return out;
  }

  ChildResult r = spawn_and_wait(config, argv, task.limit_s);
  out.runtime_s = r.runtime_s;
  if (!r.launched) {
    out.raw_status = std::string("launch-failed: ") + std::strerror(r.launch_errno);
    return out;
  }
  write_raw_log(config, task, r.output);

  if (r.timed_out) {
    out.verdict = Verdict::timeout;
    out.runtime_s = std::max(out.runtime_s, task.limit_s);
    out.raw_status = r.hard_killed ? "timeout:SIGKILL" : "timeout:SIGTERM";
    return out;
  }
  if (WIFEXITED(r.wait_status)) {
    out.raw_status = "exit:" + std::to_string(WEXITSTATUS(r.wait_status));
  } else if (WIFSIGNALED(r.wait_status)) {
    out.raw_status = "signal:" + std::to_string(WTERMSIG(r.wait_status));
  }
  try {
    if (any_match(config.success_patterns, r.output)) {
      out.verdict = Verdict::solved;
    } else if (any_match(config.failure_patterns, r.output)) {
      out.verdict = Verdict::unsolved;
    } else {
      out.verdict = Verdict::error;
    }
  } catch (const std::regex_error& e) {
    out.verdict = Verdict::error;
    out.raw_status += std::string(" bad-pattern: ") + e.what();
  }
  return out;
}

}  // namespace stratinv
