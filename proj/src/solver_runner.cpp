#include "stratinv/solver_runner.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <regex>
#include <thread>

#include "stratinv/error.hpp"

namespace stratinv {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::solved:
      return "solved";
    case Verdict::unsolved:
      return "unsolved";
    case Verdict::timeout:
      return "timeout";
    case Verdict::error:
      return "error";
  }
  return "error";
}

Verdict verdict_from_string(std::string_view s) {
  if (s == "solved") return Verdict::solved;
  if (s == "unsolved") return Verdict::unsolved;
  if (s == "timeout") return Verdict::timeout;
  if (s == "error") return Verdict::error;
  throw ParseError("unknown verdict '" + std::string(s) + "'");
}

json outcome_to_json(const EvalOutcome& o) {
  return {{"problem", o.problem_id},           {"strategy", o.strategy_key},
          {"variant", o.variant},              {"limit_s", o.limit_s},
          {"verdict", std::string(to_string(o.verdict))}, {"runtime_s", round_ms(o.runtime_s)},
          {"status", o.raw_status}};
}

EvalOutcome outcome_from_json(const json& j) {
  try {
    EvalOutcome o;
    o.problem_id = j.at("problem").get<std::string>();
    o.strategy_key = j.at("strategy").get<std::string>();
    o.variant = j.value("variant", std::string{});
    o.limit_s = j.at("limit_s").get<double>();
    o.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    o.runtime_s = j.value("runtime_s", 0.0);
    o.raw_status = j.value("status", std::string{});
    if (o.runtime_s < 0) throw ValidationError("negative runtime");
    if (!(o.limit_s > 0)) throw ValidationError("limit_s must be positive");
    return o;
  } catch (const json::exception& e) {
    throw ParseError(std::string("outcome record: ") + e.what());
  }
}

void SolverConfig::validate() const {
  std::size_t problems = 0;
  for (const auto& tok : command_template) {
    for (std::size_t pos = 0; (pos = tok.find("{problem}", pos)) != std::string::npos; ++pos) {
      ++problems;
    }
  }
  if (command_template.empty()) throw ValidationError("solver command is empty");
  if (problems != 1) {
    throw ValidationError("solver command must contain {problem} exactly once (found " +
                          std::to_string(problems) + ")");
  }
  if (!(grace_period_s >= 0)) throw ValidationError("grace_period_s must be non-negative");
  for (const auto* list : {&success_patterns, &failure_patterns}) {
    for (const auto& p : *list) {
      try {
        std::regex re(p);
      } catch (const std::regex_error& e) {
        throw ValidationError("invalid output pattern '" + p + "': " + e.what());
      }
    }
  }
}

SolverConfig SolverConfig::from_json(const json& d) {
  try {
    SolverConfig c;
    c.command_template = d.at("command").get<std::vector<std::string>>();
    c.success_patterns = d.value("success_patterns", std::vector<std::string>{});
    c.failure_patterns = d.value("failure_patterns", std::vector<std::string>{});
    c.working_dir = d.value("working_dir", std::string{});
    c.grace_period_s = d.value("grace_period_s", 1.0);
    c.cpu_limit = d.value("cpu_limit", false);
    if (auto it = d.find("memory_limit_mb"); it != d.end() && !it->is_null()) {
      c.memory_limit_mb = it->get<std::size_t>();
    }
    if (auto it = d.find("raw_log_dir"); it != d.end() && !it->is_null()) {
      c.raw_log_dir = it->get<std::string>();
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("solver config: ") + e.what());
  }
}

std::vector<EvalOutcome> run_batch(const SolverConfig& config, std::span<const Task> tasks,
                                   std::size_t workers) {
  if (workers == 0) throw ValidationError("workers must be at least 1");
  std::vector<EvalOutcome> results(tasks.size());
  if (tasks.empty()) return results;

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        results[i] = run_task(config, tasks[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
        return;
      }
    }
  };

  const std::size_t n = std::min(workers, tasks.size());
  {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

// ---------------------------------------------------------------------------

Landscape Landscape::from_json(const json& d) {
  try {
    Landscape l;
    if (auto it = d.find("default"); it != d.end()) {
      l.default_solvable_ = it->value("solvable", false);
      l.default_runtime_s_ = it->value("runtime_s", 0.0);
    }
    if (auto it = d.find("problems"); it != d.end()) {
      for (const auto& [problem, rules] : it->items()) {
        auto& list = l.rules_[problem];
        for (const auto& r : rules) {
          LandscapeRule rule;
          if (auto w = r.find("when"); w != r.end()) {
            for (const auto& [param, values] : w->items()) {
              if (values.is_array()) {
                for (const auto& v : values) {
                  rule.when[param].push_back(v.is_string() ? v.get<std::string>() : v.dump());
                }
              } else {
                rule.when[param].push_back(values.is_string() ? values.get<std::string>()
                                                              : values.dump());
              }
            }
          }
          if (auto v = r.find("variant"); v != r.end()) rule.variant = v->get<std::string>();
          rule.solvable = r.value("solvable", true);
          rule.runtime_s = r.value("runtime_s", 0.0);
          if (rule.runtime_s < 0) throw ValidationError("landscape runtime must be non-negative");
          list.push_back(std::move(rule));
        }
      }
    }
    if (l.default_runtime_s_ < 0) throw ValidationError("landscape runtime must be non-negative");
    return l;
  } catch (const json::exception& e) {
    throw ParseError(std::string("landscape: ") + e.what());
  }
}

Landscape Landscape::from_file(const std::filesystem::path& path) {
  return from_json(parse_json_file(path));
}

json Landscape::to_json() const {
  json problems = json::object();
  for (const auto& [id, rules] : rules_) {
    json list = json::array();
    for (const auto& r : rules) {
      json when = json::object();
      for (const auto& [param, values] : r.when) when[param] = values;
      json jr = {{"when", when}, {"solvable", r.solvable}, {"runtime_s", r.runtime_s}};
      if (r.variant) jr["variant"] = *r.variant;
      list.push_back(std::move(jr));
    }
    problems[id] = std::move(list);
  }
  return {{"default", {{"solvable", default_solvable_}, {"runtime_s", default_runtime_s_}}},
          {"problems", problems}};
}

void Landscape::add_rule(const std::string& problem, LandscapeRule rule) {
  rules_[problem].push_back(std::move(rule));
}

void Landscape::set_default(bool solvable, double runtime_s) {
  default_solvable_ = solvable;
  default_runtime_s_ = runtime_s;
}

std::pair<bool, double> Landscape::lookup(const std::string& problem, const std::string& variant,
                                          const Strategy& strategy) const {
  if (auto it = rules_.find(problem); it != rules_.end()) {
    const auto active = strategy.active_mask();
    for (const auto& rule : it->second) {
      if (rule.variant && *rule.variant != variant) continue;
      bool match = true;
      for (const auto& [param, values] : rule.when) {
        auto p = strategy.space().find(param);
        if (!p || !active[*p] ||
            std::find(values.begin(), values.end(), strategy.value(*p)) == values.end()) {
          match = false;
          break;
        }
      }
      if (match) return {rule.solvable, rule.runtime_s};
    }
  }
  return {default_solvable_, default_runtime_s_};
}

std::vector<std::string> Landscape::problems() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : rules_) out.push_back(id);
  return out;
}

EvalOutcome run_synthetic(const Landscape& landscape, const Task& task, const Strategy& strategy) {
  auto [solvable, runtime] = landscape.lookup(task.problem_id, task.variant, strategy);
  EvalOutcome o{task.problem_id, task.strategy_key, task.variant, task.limit_s,
                Verdict::unsolved, 0.0, "synthetic"};
  if (solvable && runtime <= task.limit_s) {
    o.verdict = Verdict::solved;
    o.runtime_s = round_ms(runtime);
  } else if (solvable) {
    o.verdict = Verdict::timeout;
    o.runtime_s = task.limit_s;
  } else {
    o.runtime_s = round_ms(std::min(runtime, task.limit_s));
  }
  return o;
}

// ---------------------------------------------------------------------------

namespace {

Task make_task(const Request& r) {
  return Task{r.problem->id,          r.problem->path, r.strategy->canonical_key(),
              r.strategy->render(), r.limit_s,       r.variant};
}

}  // namespace

ExternalSolver::ExternalSolver(SolverConfig config, std::size_t workers)
    : config_(std::move(config)), workers_(workers), start_(std::chrono::steady_clock::now()) {
  config_.validate();
  if (workers_ == 0) throw ValidationError("workers must be at least 1");
}

std::vector<EvalOutcome> ExternalSolver::run(std::span<const Request> requests) {
  std::vector<Task> tasks;
  tasks.reserve(requests.size());
  for (const auto& r : requests) tasks.push_back(make_task(r));
  invocations_ += tasks.size();
  return run_batch(config_, tasks, workers_);
}

double ExternalSolver::elapsed_s() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

SyntheticSolver::SyntheticSolver(Landscape landscape, std::size_t workers)
    : landscape_(std::move(landscape)), workers_(std::max<std::size_t>(workers, 1)) {}

std::vector<EvalOutcome> SyntheticSolver::run(std::span<const Request> requests) {
  std::vector<EvalOutcome> out;
  out.reserve(requests.size());
  double charged = 0.0;
  for (const auto& r : requests) {
    out.push_back(run_synthetic(landscape_, make_task(r), *r.strategy));
    charged += out.back().runtime_s;
  }
  invocations_ += requests.size();
  virtual_time_s_ = round_ms(virtual_time_s_ + charged / static_cast<double>(workers_));
  return out;
}

}  // namespace stratinv
