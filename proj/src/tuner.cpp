#include "stratinv/tuner.hpp"

#include <algorithm>
#include <fstream>

#include "stratinv/error.hpp"

namespace stratinv {
namespace {

// ILS iterations in a row without a new evaluation before giving up; happens
// once the reachable part of a small space has been scored.
constexpr std::size_t kMaxStalledIterations = 50;

// k one-exchange moves on distinct parameters, so no move undoes another.
Strategy perturb(const Strategy& s, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> params;
  for (std::size_t i = 0; i < s.space().params().size(); ++i) {
    if (s.space().params()[i].values.size() > 1) params.push_back(i);
  }
  std::shuffle(params.begin(), params.end(), rng);
  Strategy out = s;
  for (std::size_t j = 0; j < std::min(k, params.size()); ++j) {
    const std::size_t p = params[j];
    const std::size_t n = out.space().params()[p].values.size();
    const std::size_t shift = std::uniform_int_distribution<std::size_t>(1, n - 1)(rng);
    out = out.with(p, (out.value_index(p) + shift) % n);
  }
  return out;
}

}  // namespace

void TunerConfig::validate() const {
  if (!(t_limit_s > 0)) throw ValidationError("tuner t_limit_s must be positive");
  if (!(restart_prob >= 0 && restart_prob <= 1)) {
    throw ValidationError("tuner restart_prob must be in [0, 1]");
  }
  if (wall_budget_s && *wall_budget_s < 0) {
    throw ValidationError("tuner wall_budget_s must be non-negative");
  }
  if (workers == 0) throw ValidationError("tuner workers must be at least 1");
}

TunerConfig TunerConfig::from_json(const json& d, TunerConfig c) {
  if (!d.is_object()) throw ParseError("tuner config must be an object");
  for (const auto& [k, v] : d.items()) {
    if (k == "t_limit_s") {
      c.t_limit_s = v.get<double>();
    } else if (k == "eval_budget") {
      c.eval_budget = v.get<std::size_t>();
    } else if (k == "wall_budget_s") {
      if (v.is_null()) {
        c.wall_budget_s.reset();
      } else {
        c.wall_budget_s = v.get<double>();
      }
    } else if (k == "perturb_strength") {
      c.perturb_strength = v.get<std::size_t>();
    } else if (k == "restart_prob") {
      c.restart_prob = v.get<double>();
    } else if (k == "rng_seed") {
      c.rng_seed = v.get<std::uint64_t>();
    } else if (k == "workers") {
      c.workers = v.get<std::size_t>();
    } else if (k == "variant") {
      c.variant = v.get<std::string>();
    } else {
      throw ParseError("unknown tuner field '" + k + "'");
    }
  }
  return c;
}

TunerConfig TunerConfig::from_json(const json& d) { return from_json(d, TunerConfig{}); }

json TunerConfig::to_json() const {
  json j{{"t_limit_s", t_limit_s},
         {"eval_budget", eval_budget},
         {"perturb_strength", perturb_strength},
         {"restart_prob", restart_prob},
         {"rng_seed", rng_seed},
         {"workers", workers},
         {"variant", variant}};
  j["wall_budget_s"] = wall_budget_s ? json(*wall_budget_s) : json(nullptr);
  return j;
}

json trace_entry_to_json(const TraceEntry& e) {
  return {{"iteration", e.iteration},
          {"canonical_key", e.canonical_key},
          {"solved", e.objective.solved},
          {"total_time_s", round_ms(e.objective.total_time_s)},
          {"accepted", e.accepted}};
}

void write_trace(const std::filesystem::path& path, std::span<const TraceEntry> trace) {
  std::string out;
  for (const auto& e : trace) out += trace_entry_to_json(e).dump() + "\n";
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------

TuningSession::TuningSession(const TunerConfig& config, std::span<const Problem> problems,
                             Solver& solver)
    : config_(config),
      problems_(problems),
      solver_(solver),
      start_elapsed_s_(solver.elapsed_s()),
      rng_(config.rng_seed) {
  config_.validate();
  if (problems_.empty()) throw ValidationError("cannot tune on an empty problem set");
}

bool TuningSession::exhausted() const {
  if (scores_.size() >= config_.eval_budget) return true;
  return config_.wall_budget_s && solver_.elapsed_s() - start_elapsed_s_ >= *config_.wall_budget_s;
}

std::optional<Objective> TuningSession::score(const Strategy& s) {
  const std::string key = s.canonical_key();
  if (auto it = scores_.find(key); it != scores_.end()) return it->second;
  if (exhausted()) return std::nullopt;

  std::vector<Request> reqs;
  reqs.reserve(problems_.size());
  for (const auto& p : problems_) reqs.push_back(Request{&s, &p, config_.variant, config_.t_limit_s});
  Objective obj;
  for (const auto& o : solver_.run(reqs)) {
    if (o.verdict == Verdict::solved) {
      ++obj.solved;
      obj.total_time_s += o.runtime_s;
    }
  }
  scores_.emplace(key, obj);

  const bool improved = !best_ || obj > *best_;
  if (improved) {
    best_ = obj;
    best_strategy_ = s;
  }
  trace_.push_back(TraceEntry{iteration_, key, obj, improved});
  return obj;
}

Objective score(const Strategy& s, std::span<const Problem> problems, const TunerConfig& config,
                Solver& solver) {
  TunerConfig unlimited = config;
  unlimited.eval_budget = 1;
  unlimited.wall_budget_s.reset();
  TuningSession session(unlimited, problems, solver);
  return *session.score(s);
}

Strategy local_search(const Strategy& start, TuningSession& session) {
  Strategy current = start;
  auto current_obj = session.score(current);
  if (!current_obj) return current;
  while (true) {
    auto candidates = neighbors(current);
    std::shuffle(candidates.begin(), candidates.end(), session.rng());
    bool moved = false;
    for (auto& n : candidates) {
      auto obj = session.score(n);
      if (!obj) return current;
      if (*obj > *current_obj) {
        current = std::move(n);
        current_obj = obj;
        moved = true;
        break;
      }
    }
    if (!moved) return current;
  }
}

Strategy local_search(const Strategy& start, std::span<const Problem> problems,
                      const TunerConfig& config, Solver& solver) {
  TuningSession session(config, problems, solver);
  return local_search(start, session);
}

TuneResult tune(const Strategy& seed, std::span<const Problem> problems, const TunerConfig& config,
                Solver& solver) {
  TuningSession session(config, problems, solver);
  auto& rng = session.rng();

  Strategy incumbent = local_search(seed, session);
  auto incumbent_obj = session.score(incumbent);

  std::bernoulli_distribution restart(config.restart_prob);
  std::size_t stalled = 0;
  for (std::size_t iteration = 1; !session.exhausted() && stalled < kMaxStalledIterations;
       ++iteration) {
    session.set_iteration(iteration);
    const std::size_t before = session.evaluations();

    Strategy start = incumbent;
    const bool jump = restart(rng);
    if (jump) {
      start = sample_uniform(seed.space_ptr(), rng);
    } else {
      start = perturb(incumbent, config.perturb_strength, rng);
    }
    Strategy candidate = local_search(start, session);
    auto candidate_obj = session.score(candidate);
    if (candidate_obj) {
      // The walk accepts ties so it can drift across plateaus; restarts always move.
      if (jump || !incumbent_obj || *candidate_obj >= *incumbent_obj) {
        incumbent = std::move(candidate);
        incumbent_obj = candidate_obj;
      }
    }
    stalled = session.evaluations() == before ? stalled + 1 : 0;
  }

  return TuneResult{session.best().value_or(seed), session.best_objective(), session.evaluations(),
                    session.trace()};
}

}  // namespace stratinv
