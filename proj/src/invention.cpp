#include "stratinv/invention.hpp"

#include <algorithm>

#include "stratinv/error.hpp"

namespace stratinv {
namespace {

constexpr int kSchemaVersion = 1;

bool fully_evaluated(const EvalMatrix& m, const std::string& key,
                     const std::vector<Problem>& problems) {
  if (!m.has_strategy(key)) return false;
  return std::all_of(problems.begin(), problems.end(),
                     [&](const Problem& p) { return m.find(key, p.id) != nullptr; });
}

char verdict_code(Verdict v) {
  switch (v) {
    case Verdict::solved: return 's';
    case Verdict::unsolved: return 'u';
    case Verdict::timeout: return 't';
    case Verdict::error: return 'e';
  }
  return 'e';
}

Verdict verdict_from_code(char c) {
  switch (c) {
    case 's': return Verdict::solved;
    case 'u': return Verdict::unsolved;
    case 't': return Verdict::timeout;
    case 'e': return Verdict::error;
  }
  throw CheckpointError(std::string("bad verdict code '") + c + "'");
}

}  // namespace

void CampaignConfig::validate() {
  if (!space) throw ValidationError("campaign has no strategy space");
  if (!(T_limit_s > 0)) throw ValidationError("evaluation limit T must be positive");
  if (tuner.t_limit_s == 0) tuner.t_limit_s = T_limit_s / 2;
  if (!(tuner.t_limit_s > 0) || tuner.t_limit_s > T_limit_s) {
    throw ValidationError("tuning limit t must satisfy 0 < t <= T");
  }
  if (!(wall_budget_s > 0)) throw ValidationError("campaign wall budget must be positive");
  if (workers == 0) throw ValidationError("campaign workers must be at least 1");
  if (initial_strategies.empty()) throw ValidationError("campaign needs initial strategies");
  std::set<std::string> keys;
  for (const auto& s : initial_strategies) {
    if (!(s.space() == *space)) {
      throw ValidationError("initial strategy '" + s.display_name() + "' is from another space");
    }
    if (!keys.insert(s.canonical_key()).second) {
      throw ValidationError("duplicate initial strategy '" + s.canonical_key() + "'");
    }
  }
  tuner.variant = variant;
  tuner.workers = workers;
  tuner.validate();
}

std::size_t CampaignState::invented_count() const {
  return static_cast<std::size_t>(std::count_if(portfolio.begin(), portfolio.end(),
                                                [](const auto& e) { return e.provenance.invented; }));
}

bool CampaignState::contains(const std::string& key) const {
  return std::any_of(portfolio.begin(), portfolio.end(),
                     [&](const auto& e) { return e.strategy.canonical_key() == key; });
}

std::vector<Strategy> CampaignState::strategies() const {
  std::vector<Strategy> out;
  for (const auto& e : portfolio) out.push_back(e.strategy);
  return out;
}

std::optional<std::string> select_target(const CampaignState& state) {
  const Partition part = best_partition(state.matrix);
  std::optional<std::string> best;
  std::size_t best_size = 0;
  // Partition keys iterate in lexicographic order; strict > keeps the smallest on ties.
  for (const auto& [key, set] : part.sets) {
    if (state.specialized.contains(key) || !state.contains(key)) continue;
    if (set.size() > best_size) {
      best = key;
      best_size = set.size();
    }
  }
  return best;
}

CampaignState initial_state(const CampaignConfig& config) {
  CampaignState state;
  state.matrix = EvalMatrix(config.T_limit_s, config.variant);
  for (const auto& s : config.initial_strategies) state.portfolio.push_back({s, Provenance{}});
  return state;
}

void run_campaign(const CampaignConfig& config, CampaignState& state, Solver& solver,
                  const CampaignOptions& options) {
  const double base = state.elapsed_s;
  const double solver_start = solver.elapsed_s();
  auto now = [&] { return base + (solver.elapsed_s() - solver_start); };
  auto save = [&] {
    state.elapsed_s = now();
    if (options.checkpoint_path) write_checkpoint(*options.checkpoint_path, state, *config.space);
    if (options.progress_path) write_progress(*options.progress_path, state);
  };

  auto evaluate_pending = [&] {
    std::set<std::string> cumulative = solved_union(state.matrix);
    for (const auto& entry : state.portfolio) {
      const std::string key = entry.strategy.canonical_key();
      if (fully_evaluated(state.matrix, key, config.problems)) continue;
      const Strategy* s = &entry.strategy;
      evaluate_into(state.matrix, std::span(s, 1), config.problems, solver, options.cache);
      std::size_t fresh = 0;
      for (const auto& p : solved_set(state.matrix, key)) fresh += cumulative.insert(p).second;
      state.progress.push_back(ProgressRecord{now(), entry.provenance.invented ? "invented" : "initial",
                                              key, fresh, cumulative.size()});
    }
  };

  try {
    while (true) {
      evaluate_pending();
      save();
      if (config.max_specializations && state.specializations_total >= *config.max_specializations) {
        break;
      }
      if (now() >= config.wall_budget_s) break;
      const auto target = select_target(state);
      if (!target) break;

      const auto win_set = best_partition(state.matrix).sets.at(*target);
      std::vector<Problem> focus;
      for (const auto& p : config.problems) {
        if (win_set.contains(p.id)) focus.push_back(p);
      }
      const auto seed_it = std::find_if(state.portfolio.begin(), state.portfolio.end(),
                                        [&](const auto& e) { return e.strategy.canonical_key() == *target; });

      TunerConfig tcfg = config.tuner;
      tcfg.rng_seed = splitmix64(config.tuner.rng_seed + state.specializations_total);
      SpecializationRecord rec;
      rec.target_key = *target;
      rec.ps_size = focus.size();
      rec.started_s = now();
      TuneResult result = options.tuner(seed_it->strategy, focus, tcfg, solver);
      rec.finished_s = now();
      rec.evaluations = result.evaluations;
      rec.result_key = result.best.canonical_key();

      ++state.specializations_total;
      if (options.trace_dir) {
        std::filesystem::create_directories(*options.trace_dir);
        write_trace(*options.trace_dir /
                        ("specialization-" + std::to_string(state.specializations_total) + ".jsonl"),
                    result.trace);
      }
      if (state.contains(rec.result_key)) {
        rec.failed = true;
        ++state.specializations_failed;
        const std::size_t total = solved_union(state.matrix).size();
        state.progress.push_back(ProgressRecord{rec.finished_s, "failed", *target, 0, total});
      } else {
        Strategy invented = result.best;
        invented.set_label("inv" + std::to_string(state.invented_count() + 1));
        state.portfolio.push_back(
            {std::move(invented), Provenance{true, *target, focus.size(), rec.finished_s}});
      }
      state.specialized.insert(*target);
      state.specializations.push_back(std::move(rec));
    }
  } catch (...) {
    if (options.checkpoint_path) {
      state.elapsed_s = now();
      write_checkpoint(*options.checkpoint_path, state, *config.space);
    }
    throw;
  }
}

CampaignState invent(CampaignConfig config, Solver& solver, const CampaignOptions& options) {
  config.validate();
  CampaignState state = initial_state(config);
  run_campaign(config, state, solver, options);
  return state;
}

// ---------------------------------------------------------------------------

json progress_to_json(const ProgressRecord& r) {
  return {{"elapsed_s", round_ms(r.elapsed_s)},
          {"event", r.event},
          {"strategy_key", r.strategy_key},
          {"new", r.new_solved},
          {"total", r.total}};
}

void write_progress(const std::filesystem::path& path, const CampaignState& state) {
  std::string out;
  for (const auto& r : state.progress) out += progress_to_json(r).dump() + "\n";
  write_file_atomic(path, out);
}

json checkpoint_to_json(const CampaignState& state, const StrategySpace& space) {
  json portfolio = json::array();
  for (const auto& e : state.portfolio) {
    json j = e.strategy.to_json();
    j["key"] = e.strategy.canonical_key();
    if (e.provenance.invented) {
      j["provenance"] = {{"kind", "invented"},
                         {"parent", e.provenance.parent_key},
                         {"ps_size", e.provenance.ps_size},
                         {"elapsed_s", e.provenance.elapsed_s}};
    } else {
      j["provenance"] = {{"kind", "initial"}};
    }
    portfolio.push_back(std::move(j));
  }

  const auto problem_set = state.matrix.problems();
  const std::vector<std::string> problems(problem_set.begin(), problem_set.end());
  json rows = json::array();
  for (const auto& [key, _] : state.matrix.registry()) {
    std::string verdicts;
    json runtimes = json::array();
    json statuses = json::array();
    for (const auto& p : problems) {
      const auto* c = state.matrix.find(key, p);
      verdicts += c ? verdict_code(c->verdict) : '.';
      runtimes.push_back(c ? json(c->runtime_s) : json(nullptr));
      statuses.push_back(c ? json(c->raw_status) : json(nullptr));
    }
    rows.push_back({{"key", key}, {"verdicts", verdicts}, {"runtime_s", runtimes}, {"status", statuses}});
  }

  json specializations = json::array();
  for (const auto& r : state.specializations) {
    specializations.push_back({{"target", r.target_key},
                               {"result", r.result_key},
                               {"ps_size", r.ps_size},
                               {"failed", r.failed},
                               {"evaluations", r.evaluations},
                               {"started_s", r.started_s},
                               {"finished_s", r.finished_s}});
  }
  json progress = json::array();
  for (const auto& r : state.progress) {
    json j = progress_to_json(r);
    j["elapsed_s"] = r.elapsed_s;
    progress.push_back(std::move(j));
  }

  return {{"schema_version", kSchemaVersion},
          {"space", space.to_json()},
          {"elapsed_s", state.elapsed_s},
          {"portfolio", portfolio},
          {"matrix",
           {{"limit_s", state.matrix.limit_s()},
            {"variant", state.matrix.variant()},
            {"problems", problems},
            {"rows", rows}}},
          {"specialized", state.specialized},
          {"counters",
           {{"specializations_total", state.specializations_total},
            {"specializations_failed", state.specializations_failed}}},
          {"specializations", specializations},
          {"progress", progress}};
}

CampaignState checkpoint_from_json(const json& d, const SpacePtr& space) {
  if (!d.is_object() || !d.contains("schema_version")) {
    throw CheckpointError("not a campaign checkpoint");
  }
  if (d["schema_version"] != kSchemaVersion) {
    throw CheckpointError("unsupported checkpoint schema_version " + d["schema_version"].dump() +
                          " (expected " + std::to_string(kSchemaVersion) + ")");
  }
  if (d.value("space", json()) != space->to_json()) {
    throw CheckpointError("checkpoint was written for a different strategy space");
  }
  try {
    CampaignState state;
    state.elapsed_s = d.at("elapsed_s").get<double>();
    for (const auto& j : d.at("portfolio")) {
      PortfolioEntry e{Strategy::from_json(space, j), {}};
      if (e.strategy.canonical_key() != j.at("key").get<std::string>()) {
        throw CheckpointError("portfolio key does not match its assignment");
      }
      const auto& prov = j.at("provenance");
      if (prov.at("kind") == "invented") {
        e.provenance = Provenance{true, prov.at("parent").get<std::string>(),
                                  prov.at("ps_size").get<std::size_t>(),
                                  prov.at("elapsed_s").get<double>()};
      }
      state.portfolio.push_back(std::move(e));
    }

    const auto& m = d.at("matrix");
    state.matrix = EvalMatrix(m.at("limit_s").get<double>(), m.at("variant").get<std::string>());
    for (const auto& e : state.portfolio) state.matrix.register_strategy(e.strategy);
    const auto problems = m.at("problems").get<std::vector<std::string>>();
    for (const auto& row : m.at("rows")) {
      const auto key = row.at("key").get<std::string>();
      const auto verdicts = row.at("verdicts").get<std::string>();
      const auto& runtimes = row.at("runtime_s");
      const auto& statuses = row.at("status");
      if (verdicts.size() != problems.size() || runtimes.size() != problems.size() ||
          statuses.size() != problems.size()) {
        throw CheckpointError("matrix row for '" + key + "' is not aligned with the problem list");
      }
      if (!state.matrix.has_strategy(key)) {
        throw CheckpointError("matrix row for '" + key + "' has no portfolio entry");
      }
      for (std::size_t i = 0; i < problems.size(); ++i) {
        if (verdicts[i] == '.') continue;
        state.matrix.set(EvalOutcome{problems[i], key, state.matrix.variant(), state.matrix.limit_s(),
                                     verdict_from_code(verdicts[i]), runtimes[i].get<double>(),
                                     statuses[i].get<std::string>()});
      }
    }

    state.specialized = d.at("specialized").get<std::set<std::string>>();
    state.specializations_total = d.at("counters").at("specializations_total").get<std::size_t>();
    state.specializations_failed = d.at("counters").at("specializations_failed").get<std::size_t>();
    for (const auto& r : d.at("specializations")) {
      state.specializations.push_back(SpecializationRecord{
          r.at("target").get<std::string>(), r.at("result").get<std::string>(),
          r.at("ps_size").get<std::size_t>(), r.at("failed").get<bool>(),
          r.at("evaluations").get<std::size_t>(), r.at("started_s").get<double>(),
          r.at("finished_s").get<double>()});
    }
    for (const auto& r : d.at("progress")) {
      state.progress.push_back(ProgressRecord{r.at("elapsed_s").get<double>(),
                                              r.at("event").get<std::string>(),
                                              r.at("strategy_key").get<std::string>(),
                                              r.at("new").get<std::size_t>(),
                                              r.at("total").get<std::size_t>()});
    }
    if (state.specializations_failed > state.specializations_total) {
      throw CheckpointError("checkpoint counters are inconsistent");
    }
    return state;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  }
}

void write_checkpoint(const std::filesystem::path& path, const CampaignState& state,
                      const StrategySpace& space) {
  write_file_atomic(path, checkpoint_to_json(state, space).dump(1) + "\n");
}

CampaignState load_checkpoint(const std::filesystem::path& path, const SpacePtr& space) {
  json d;
  try {
    d = parse_json_file(path);
  } catch (const DomainError& e) {
    throw CheckpointError(std::string("cannot load checkpoint: ") + e.what());
  }
  return checkpoint_from_json(d, space);
}

}  // namespace stratinv
