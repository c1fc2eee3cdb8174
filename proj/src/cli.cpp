#include "stratinv/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "stratinv/benchmark.hpp"
#include "stratinv/error.hpp"
#include "stratinv/portfolio_report.hpp"

namespace stratinv {
namespace fs = std::filesystem;
namespace {

const std::set<std::string> kConfigFields{
    "space",  "tier",    "strategies", "landscape",     "solver",
    "benchmark", "problems", "variant", "limit_s",   "workers",
    "wall_budget_s", "max_specializations", "tuner"};

TierFilter tier_from_string(const std::string& s) {
  if (s == "full") return TierFilter::full;
  if (s == "regular") return TierFilter::regular;
  throw ValidationError("unknown tier '" + s + "' (expected full or regular)");
}

json document_or_file(const json& v, const fs::path& base_dir) {
  if (v.is_string()) return parse_json_file(base_dir / v.get<std::string>());
  return v;
}

std::string seconds(double s) { return format_limit(round_ms(s)); }

std::set<std::string> read_id_list(const fs::path& path) {
  std::set<std::string> out;
  std::istringstream in(read_file(path));
  for (std::string line; std::getline(in, line);) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

void write_text(const std::string& path, const std::string& contents) {
  write_file_atomic(path, contents);
}

// The configured strategies, optionally restricted to one label.
std::vector<Strategy> pick(const RunConfig& c, const std::string& label) {
  const auto& all = c.strategies;
  if (label.empty()) return all.empty() ? std::vector{Strategy::defaults(c.space, "default")} : all;
  std::vector<Strategy> out;
  for (const auto& s : all) {
    if (s.label() == label) out.push_back(s);
  }
  if (out.empty()) throw ValidationError("no strategy labelled '" + label + "'");
  return out;
}

struct LogSet {
  SolvedView view;
  std::vector<json> headers;
  std::vector<EvalOutcome> outcomes;
};

LogSet read_logs(const std::vector<std::string>& paths) {
  LogSet out;
  for (const auto& p : paths) {
    auto log = read_outcome_log(p);
    out.view = merge_views(out.view, view_from_outcomes(log.outcomes));
    out.headers.insert(out.headers.end(), log.headers.begin(), log.headers.end());
    out.outcomes.insert(out.outcomes.end(), log.outcomes.begin(), log.outcomes.end());
  }
  return out;
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<double> limit;
  std::string config;
};

class Commands {
 public:
  Commands(const Globals& g, std::ostream& out) : g_(g), out_(out) {}

  RunConfig config() const {
    if (g_.config.empty()) throw CLI::RequiredError("--config");
    auto c = RunConfig::from_file(g_.config);
    if (g_.workers) c.workers = *g_.workers;
    if (g_.seed) c.tuner.rng_seed = *g_.seed;
    if (g_.limit) c.limit_s = *g_.limit;
    return c;
  }

  void space_validate(const std::string& path, const std::string& tier) {
    auto space = load_space_file(path, tier_from_string(tier));
    const auto size = space_size(*space);
    out_ << "space " << space->name() << "\n";
    out_ << "params " << space->params().size() << "\n";
    out_ << "canonical_size " << (size.exact ? std::to_string(*size.exact) : "overflow") << "\n";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", size.log10);
    out_ << "log10_size " << buf << "\n";
  }

  void eval(const std::string& label, const std::string& log_out, const std::string& cache_path) {
    auto c = config();
    if (!(c.limit_s > 0)) throw ValidationError("eval needs a positive limit");
    const auto strategies = pick(c, label);
    auto solver = c.make_solver();
    std::optional<OutcomeCache> cache;
    if (!cache_path.empty()) cache.emplace(cache_path);
    auto m = evaluate_portfolio(strategies, c.problems, *solver, c.limit_s, c.variant,
                                cache ? &*cache : nullptr);
    if (!log_out.empty()) {
      std::string text = matrix_header(c.variant, c.limit_s, strategies).dump() + "\n";
      for (const auto& [cell, outcome] : m.cells()) text += outcome_to_json(outcome).dump() + "\n";
      write_text(log_out, text);
    }
    for (const auto& s : strategies) {
      out_ << s.display_name() << " " << solved_set(m, s.canonical_key()).size() << "/"
           << c.problems.size() << "\n";
    }
  }

  void tune_cmd(const std::string& start_label, const std::string& best_out,
                const std::string& trace_out) {
    auto c = config();
    auto tc = c.tuner;
    if (g_.limit) tc.t_limit_s = *g_.limit;
    if (tc.t_limit_s == 0) tc.t_limit_s = c.limit_s / 2;
    tc.variant = c.variant;
    tc.workers = c.workers;
    const Strategy start =
        start_label.empty() ? Strategy::defaults(c.space) : pick(c, start_label).front();
    auto solver = c.make_solver();
    auto r = tune(start, c.problems, tc, *solver);
    if (!best_out.empty()) {
      json doc = r.best.to_json();
      doc["key"] = r.best.canonical_key();
      write_text(best_out, doc.dump(1) + "\n");
    }
    if (!trace_out.empty()) write_trace(trace_out, r.trace);
    out_ << "best " << r.best.canonical_key() << "\n";
    out_ << "solved " << (r.objective ? r.objective->solved : 0) << "/" << c.problems.size() << "\n";
    out_ << "total_time_s " << seconds(r.objective ? r.objective->total_time_s : 0) << "\n";
    out_ << "evaluations " << r.evaluations << "\n";
  }

  void invent_cmd(const std::string& checkpoint, const std::string& progress, bool resume,
                  std::optional<std::size_t> max_spec, const std::string& trace_dir,
                  const std::string& cache_path, const std::string& select, std::size_t select_k) {
    auto c = config();
    auto cc = c.campaign();
    if (max_spec) cc.max_specializations = max_spec;
    auto solver = c.make_solver();
    std::optional<OutcomeCache> cache;
    if (!cache_path.empty()) cache.emplace(cache_path);

    CampaignOptions opts;
    if (!checkpoint.empty()) opts.checkpoint_path = checkpoint;
    if (!progress.empty()) opts.progress_path = progress;
    if (!trace_dir.empty()) {
      fs::create_directories(trace_dir);
      opts.trace_dir = trace_dir;
    }
    opts.cache = cache ? &*cache : nullptr;

    const auto mode = selection_mode_from_string(select);
    if (mode != SelectionMode::all && !resume) {
      auto m = evaluate_portfolio(cc.initial_strategies, cc.problems, *solver, cc.T_limit_s,
                                  cc.variant, opts.cache);
      cc.initial_strategies = select_initial(cc.initial_strategies, m, mode, select_k);
    }

    CampaignState state;
    if (resume) {
      if (checkpoint.empty()) throw CLI::RequiresError("--resume", "--checkpoint");
      cc.validate();
      state = load_checkpoint(checkpoint, cc.space);
      run_campaign(cc, state, *solver, opts);
    } else {
      state = invent(cc, *solver, opts);
    }
    out_ << run_accounting(state).dump(2) << "\n";
  }

  void cover(const std::vector<std::string>& logs, const std::string& csv,
             const std::string& baseline) {
    auto set = read_logs(logs);
    auto items = items_from_view(set.view, names_from_headers(set.headers));
    std::optional<std::set<std::string>> base;
    if (!baseline.empty()) base = read_id_list(baseline);
    auto steps = greedy_cover(items, base ? &*base : nullptr);
    if (!csv.empty()) write_text(csv, render_csv(steps));
    out_ << render_text(steps);
  }

  void escalate_cmd(const std::vector<std::string>& logs, double high, std::optional<std::size_t> cap,
                    bool only_unsolved, const std::string& csv, const std::string& cache_path) {
    auto c = config();
    auto set = read_logs(logs);
    auto names = names_from_headers(set.headers);
    auto strategies = c.strategies;
    for (auto& s : strategies_from_headers(c.space, set.headers)) strategies.push_back(std::move(s));
    for (const auto& s : c.strategies) {
      if (!s.label().empty()) names.emplace(s.canonical_key(), s.label());
    }
    EscalationConfig ec{high, cap.value_or(SIZE_MAX), only_unsolved};
    auto solver = c.make_solver();
    std::optional<OutcomeCache> cache;
    if (!cache_path.empty()) cache.emplace(cache_path);
    auto r = escalate(items_from_view(set.view, names), strategies, c.problems, c.variant, ec,
                      *solver, cache ? &*cache : nullptr);
    if (!csv.empty()) write_text(csv, render_csv(r.cover));
    out_ << render_text(r.cover);
    out_ << "escalated " << r.escalated.size() << "\n";
  }

  void report(const std::string& checkpoint, const std::string& progress_csv_out,
              const std::string& cover_csv, const std::string& baseline) {
    auto c = config();
    auto state = load_checkpoint(checkpoint, c.space);
    std::vector<CoverItem> items;
    for (const auto& e : state.portfolio) {
      const auto key = e.strategy.canonical_key();
      if (!state.matrix.has_strategy(key)) continue;
      items.push_back({ItemLabel{state.matrix.variant(), state.matrix.limit_s(), key},
                       solved_set(state.matrix, key), e.strategy.display_name()});
    }
    std::optional<std::set<std::string>> base;
    if (!baseline.empty()) base = read_id_list(baseline);
    auto steps = greedy_cover(items, base ? &*base : nullptr);
    if (!cover_csv.empty()) write_text(cover_csv, render_csv(steps));
    if (!progress_csv_out.empty()) write_text(progress_csv_out, progress_csv(state.progress));
    out_ << run_accounting(state).dump(2) << "\n" << render_text(steps);
  }

  void analyze(const std::string& strategies_path, const std::string& checkpoint,
               bool invented_only, const std::string& csv) {
    auto c = config();
    std::vector<Strategy> ss;
    if (!checkpoint.empty()) {
      auto state = load_checkpoint(checkpoint, c.space);
      for (const auto& e : state.portfolio) {
        if (!invented_only || e.provenance.invented) ss.push_back(e.strategy);
      }
    } else if (!strategies_path.empty()) {
      ss = load_strategies_file(c.space, strategies_path);
    } else {
      ss = c.strategies;
    }
    auto rows = option_frequency(ss);
    const auto text = render_frequency(rows);
    if (!csv.empty()) write_text(csv, text);
    out_ << text;
  }

  void ingest_cmd(const std::string& spec_path, const std::string& manifest_out) {
    auto spec = BenchmarkSpec::from_file(spec_path);
    auto b = ingest(spec);
    const fs::path target = manifest_out.empty() ? spec.cache_dir / "manifest.json" : fs::path(manifest_out);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    write_text(target, b.manifest().dump(1) + "\n");
    out_ << "problems " << b.problem_ids.size() << "\n";
    out_ << "variants " << b.paths.size() << "\n";
    out_ << "preprocessed " << b.preprocess_runs << "\n";
    out_ << "failed " << b.failed << "\n";
    out_ << "excluded " << b.excluded << "\n";
    out_ << "manifest " << target.string() << "\n";
    for (const auto& w : b.warnings) out_ << "warning: " << w << "\n";
  }

 private:
  const Globals& g_;
  std::ostream& out_;
};

}  // namespace

RunConfig RunConfig::from_json(const json& d, const fs::path& base_dir) {
  if (!d.is_object()) throw ParseError("config must be an object");
  for (const auto& [k, v] : d.items()) {
    if (!kConfigFields.contains(k)) throw ParseError("unknown config field '" + k + "'");
  }
  RunConfig c;
  try {
    const auto tier = tier_from_string(d.value("tier", "full"));
    if (!d.contains("space")) throw ValidationError("config needs a space");
    c.space = load_space(document_or_file(d["space"], base_dir), tier);
    if (d.contains("strategies")) {
      c.strategies = load_strategies(c.space, document_or_file(d["strategies"], base_dir));
    }
    if (d.contains("landscape")) {
      c.landscape = Landscape::from_json(document_or_file(d["landscape"], base_dir));
    }
    if (d.contains("solver")) {
      c.solver = SolverConfig::from_json(document_or_file(d["solver"], base_dir));
      c.solver->validate();
    }
    if (c.landscape.has_value() == c.solver.has_value()) {
      throw ValidationError("config needs exactly one of 'landscape' and 'solver'");
    }
    c.variant = d.value("variant", c.variant);
    c.limit_s = d.value("limit_s", 0.0);
    c.workers = d.value("workers", std::size_t{1});
    if (c.workers == 0) throw ValidationError("workers must be at least 1");
    c.wall_budget_s = d.value("wall_budget_s", 0.0);
    if (d.contains("max_specializations")) c.max_specializations = d["max_specializations"].get<std::size_t>();
    if (d.contains("tuner")) c.tuner = TunerConfig::from_json(d["tuner"]);
    if (d.contains("benchmark")) {
      c.problems = Benchmark::from_manifest(parse_json_file(base_dir / d["benchmark"].get<std::string>()))
                       .problems(c.variant);
    } else if (d.contains("problems")) {
      for (const auto& id : d["problems"].get<std::vector<std::string>>()) {
        c.problems.push_back(Problem{id, base_dir / id});
      }
    } else if (c.landscape) {
      for (const auto& id : c.landscape->problems()) c.problems.push_back(Problem{id, {}});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::from_file(const fs::path& path) {
  return from_json(parse_json_file(path), path.parent_path());
}

std::unique_ptr<Solver> RunConfig::make_solver() const {
  if (landscape) return std::make_unique<SyntheticSolver>(*landscape, workers);
  return std::make_unique<ExternalSolver>(*solver, workers);
}

CampaignConfig RunConfig::campaign() const {
  CampaignConfig c;
  c.T_limit_s = limit_s;
  c.tuner = tuner;
  c.wall_budget_s = wall_budget_s;
  c.initial_strategies = strategies;
  c.space = space;
  c.problems = problems;
  c.variant = variant;
  c.workers = workers;
  c.max_specializations = max_specializations;
  return c;
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Solver strategy invention: evaluate, tune, invent and report strategy portfolios."};
  app.name("stratinv");
  app.fallthrough();
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_option("--workers", g.workers, "Parallel solver runs")->check(CLI::PositiveNumber);
  app.add_option("--limit", g.limit, "Time limit in seconds (overrides the config)")
      ->check(CLI::PositiveNumber);
  app.add_option("--config", g.config, "Run configuration file");

  Commands cmd(g, out);
  std::function<void()> action;

  auto* space = app.add_subcommand("space", "Strategy space utilities");
  space->require_subcommand(1);
  auto* validate = space->add_subcommand("validate", "Load a space and print its size");
  std::string space_path, tier = "full";
  validate->add_option("file", space_path, "Space document")->required();
  validate->add_option("--tier", tier, "full or regular");
  validate->callback([&] { action = [&] { cmd.space_validate(space_path, tier); }; });

  auto* eval = app.add_subcommand("eval", "Evaluate strategies on the configured problems");
  std::string label, log_out, cache;
  eval->add_option("--strategy", label, "Only the strategy with this label");
  eval->add_option("--out", log_out, "Write the outcome log here");
  eval->add_option("--cache", cache, "Outcome log to reuse and extend");
  eval->callback([&] { action = [&] { cmd.eval(label, log_out, cache); }; });

  auto* tune_sc = app.add_subcommand("tune", "Tune one strategy on the configured problems");
  std::string start, best_out, trace_out;
  tune_sc->add_option("--start", start, "Label of the start strategy (defaults when absent)");
  tune_sc->add_option("--out", best_out, "Write the best strategy here");
  tune_sc->add_option("--trace", trace_out, "Write the tuning trace here");
  tune_sc->callback([&] { action = [&] { cmd.tune_cmd(start, best_out, trace_out); }; });

  auto* invent_sc = app.add_subcommand("invent", "Run an invention campaign");
  std::string checkpoint, progress, trace_dir, select = "all";
  bool resume = false;
  std::optional<std::size_t> max_spec;
  std::size_t select_k = SIZE_MAX;
  invent_sc->add_option("--checkpoint", checkpoint, "Campaign snapshot file");
  invent_sc->add_option("--progress", progress, "Progress log (JSON Lines)");
  invent_sc->add_flag("--resume", resume, "Continue from --checkpoint");
  invent_sc->add_option("--max-specializations", max_spec, "Stop after this many specializations");
  invent_sc->add_option("--trace-dir", trace_dir, "Directory for per-specialization tuner traces");
  invent_sc->add_option("--cache", cache, "Outcome log to reuse and extend");
  invent_sc->add_option("--select", select, "Initial selection: all, cover or solo");
  invent_sc->add_option("--select-k", select_k, "Number of initial strategies to keep");
  invent_sc->callback([&] {
    action = [&] {
      cmd.invent_cmd(checkpoint, progress, resume, max_spec, trace_dir, cache, select, select_k);
    };
  });

  auto* cover = app.add_subcommand("cover", "Greedy cover over outcome logs");
  std::vector<std::string> logs;
  std::string csv, baseline;
  cover->add_option("--in", logs, "Outcome logs")->required();
  cover->add_option("--csv", csv, "Write the cover as CSV");
  cover->add_option("--baseline", baseline, "Ids counted in the new column, one per line");
  cover->callback([&] { action = [&] { cmd.cover(logs, csv, baseline); }; });

  auto* esc = app.add_subcommand("escalate", "Re-run cover strategies at a higher limit");
  double high = 0;
  std::optional<std::size_t> cap;
  bool only_unsolved = false;
  esc->add_option("--in", logs, "Outcome logs of the pool")->required();
  esc->add_option("--high-limit", high, "Escalated limit in seconds")->required()->check(CLI::PositiveNumber);
  esc->add_option("--max", cap, "At most this many escalations");
  esc->add_flag("--only-unsolved", only_unsolved, "Run escalations only on uncovered problems");
  esc->add_option("--csv", csv, "Write the final cover as CSV");
  esc->add_option("--cache", cache, "Outcome log to reuse and extend");
  esc->callback([&] { action = [&] { cmd.escalate_cmd(logs, high, cap, only_unsolved, csv, cache); }; });

  auto* report = app.add_subcommand("report", "Summarize a campaign snapshot");
  std::string progress_out;
  report->add_option("--checkpoint", checkpoint, "Campaign snapshot")->required();
  report->add_option("--progress-csv", progress_out, "Write elapsed_s,new,total here");
  report->add_option("--csv", csv, "Write the portfolio cover as CSV");
  report->add_option("--baseline", baseline, "Ids counted in the new column, one per line");
  report->callback([&] { action = [&] { cmd.report(checkpoint, progress_out, csv, baseline); }; });

  auto* analyze = app.add_subcommand("analyze", "Option frequencies across a portfolio");
  std::string strategies_path;
  bool invented_only = false;
  analyze->add_option("--strategies", strategies_path, "Strategy file (defaults to the config's)");
  analyze->add_option("--checkpoint", checkpoint, "Use the portfolio of a campaign snapshot");
  analyze->add_flag("--invented-only", invented_only, "Skip initial strategies of the snapshot");
  analyze->add_option("--csv", csv, "Write the table as CSV");
  analyze->callback([&] { action = [&] { cmd.analyze(strategies_path, checkpoint, invented_only, csv); }; });

  auto* ingest_sc = app.add_subcommand("ingest", "Materialize benchmark variants and a manifest");
  std::string spec_path, manifest_out;
  ingest_sc->add_option("spec", spec_path, "Benchmark spec document")->required();
  ingest_sc->add_option("--manifest", manifest_out, "Manifest path (default: in the cache dir)");
  ingest_sc->callback([&] { action = [&] { cmd.ingest_cmd(spec_path, manifest_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (action) action();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace stratinv
