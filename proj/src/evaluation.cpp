#include "stratinv/evaluation.hpp"

#include <fstream>

#include "stratinv/error.hpp"

namespace stratinv {

EvalMatrix::EvalMatrix(double limit_s, std::string variant)
    : limit_s_(limit_s), variant_(std::move(variant)) {
  if (!(limit_s_ > 0)) throw ValidationError("matrix limit must be positive");
}

void EvalMatrix::register_strategy(const Strategy& s) {
  registry_.insert_or_assign(s.canonical_key(), s);
}

void EvalMatrix::set(const EvalOutcome& o) {
  if (o.limit_s != limit_s_ || o.variant != variant_) {
    throw ValidationError("outcome for (" + o.variant + ", " + format_limit(o.limit_s) +
                          ") does not belong to matrix (" + variant_ + ", " +
                          format_limit(limit_s_) + ")");
  }
  if (!registry_.contains(o.strategy_key)) {
    throw ValidationError("outcome for unregistered strategy '" + o.strategy_key + "'");
  }
  cells_.insert_or_assign(CellKey{o.strategy_key, o.problem_id}, o);
}

const EvalOutcome* EvalMatrix::find(const std::string& strategy_key,
                                    const std::string& problem_id) const {
  auto it = cells_.find(CellKey{strategy_key, problem_id});
  return it == cells_.end() ? nullptr : &it->second;
}

std::set<std::string> EvalMatrix::problems() const {
  std::set<std::string> out;
  for (const auto& [key, _] : cells_) out.insert(key.problem_id);
  return out;
}

// ---------------------------------------------------------------------------

json matrix_header(const std::string& variant, double limit_s,
                   std::span<const Strategy> strategies) {
  json list = json::array();
  for (const auto& s : strategies) {
    json entry = s.to_json();
    entry["key"] = s.canonical_key();
    list.push_back(std::move(entry));
  }
  return {{"header", {{"variant", variant}, {"limit_s", limit_s}, {"strategies", list}}}};
}

OutcomeLogContents read_outcome_log(const std::filesystem::path& path) {
  OutcomeLogContents out;
  for (const auto& line : read_json_lines(path)) {
    if (auto it = line.find("header"); it != line.end()) {
      out.headers.push_back(*it);
    } else {
      out.outcomes.push_back(outcome_from_json(line));
    }
  }
  return out;
}

std::vector<Strategy> strategies_from_headers(const SpacePtr& space,
                                              std::span<const json> headers) {
  std::vector<Strategy> out;
  std::set<std::string> seen;
  for (const auto& h : headers) {
    for (const auto& entry : h.value("strategies", json::array())) {
      Strategy s = Strategy::from_json(space, entry);
      const std::string key = s.canonical_key();
      if (entry.contains("key") && entry["key"] != key) continue;
      if (seen.insert(key).second) out.push_back(std::move(s));
    }
  }
  return out;
}

OutcomeCache::OutcomeCache(std::filesystem::path log_path) : log_path_(std::move(log_path)) {
  if (std::filesystem::exists(*log_path_)) {
    for (const auto& o : read_outcome_log(*log_path_).outcomes) {
      cells_.insert_or_assign(Key{o.strategy_key, o.problem_id, o.variant, o.limit_s}, o);
    }
  }
}

const EvalOutcome* OutcomeCache::find(const std::string& strategy_key,
                                      const std::string& problem_id, const std::string& variant,
                                      double limit_s) const {
  auto it = cells_.find(Key{strategy_key, problem_id, variant, limit_s});
  return it == cells_.end() ? nullptr : &it->second;
}

void OutcomeCache::record(std::span<const EvalOutcome> outcomes) {
  std::ofstream log;
  if (log_path_) {
    log.open(*log_path_, std::ios::app);
    if (!log) throw DomainError("cannot append to '" + log_path_->string() + "'");
  }
  for (const auto& o : outcomes) {
    cells_.insert_or_assign(Key{o.strategy_key, o.problem_id, o.variant, o.limit_s}, o);
    if (log_path_) log << outcome_to_json(o).dump() << '\n';
  }
}

void OutcomeCache::record_header(const json& header) {
  if (!log_path_) return;
  std::ofstream log(*log_path_, std::ios::app);
  if (!log) throw DomainError("cannot append to '" + log_path_->string() + "'");
  log << header.dump() << '\n';
}

std::size_t evaluate_into(EvalMatrix& matrix, std::span<const Strategy> strategies,
                          std::span<const Problem> problems, Solver& solver,
                          OutcomeCache* cache) {
  std::vector<Request> pending;
  for (const auto& s : strategies) {
    matrix.register_strategy(s);
    const std::string key = s.canonical_key();
    for (const auto& p : problems) {
      if (matrix.find(key, p.id)) continue;
      if (cache) {
        if (const auto* hit = cache->find(key, p.id, matrix.variant(), matrix.limit_s())) {
          matrix.set(*hit);
          continue;
        }
      }
      pending.push_back(Request{&s, &p, matrix.variant(), matrix.limit_s()});
    }
  }
  if (pending.empty()) return 0;
  const auto outcomes = solver.run(pending);
  if (outcomes.size() != pending.size()) {
    throw OrchestrationError("solver returned " + std::to_string(outcomes.size()) +
                             " outcomes for " + std::to_string(pending.size()) + " requests");
  }
  if (cache) cache->record(outcomes);
  for (const auto& o : outcomes) matrix.set(o);
  return outcomes.size();
}

EvalMatrix evaluate_portfolio(std::span<const Strategy> strategies,
                              std::span<const Problem> problems, Solver& solver, double limit_s,
                              const std::string& variant, OutcomeCache* cache) {
  if (strategies.empty()) throw ValidationError("cannot evaluate an empty portfolio");
  if (problems.empty()) throw ValidationError("cannot evaluate on an empty problem set");
  EvalMatrix matrix(limit_s, variant);
  evaluate_into(matrix, strategies, problems, solver, cache);
  return matrix;
}

std::set<std::string> solved_set(const EvalMatrix& matrix, const std::string& strategy_key) {
  if (!matrix.has_strategy(strategy_key)) {
    throw DomainError("unknown strategy key '" + strategy_key + "'");
  }
  std::set<std::string> out;
  for (auto it = matrix.cells().lower_bound(CellKey{strategy_key, {}});
       it != matrix.cells().end() && it->first.strategy_key == strategy_key; ++it) {
    if (it->second.verdict == Verdict::solved) out.insert(it->first.problem_id);
  }
  return out;
}

std::set<std::string> solved_union(const EvalMatrix& matrix) {
  std::set<std::string> out;
  for (const auto& [key, o] : matrix.cells()) {
    if (o.verdict == Verdict::solved) out.insert(key.problem_id);
  }
  return out;
}

std::size_t Partition::size_of(const std::string& key) const {
  auto it = sets.find(key);
  return it == sets.end() ? 0 : it->second.size();
}

Partition best_partition(const EvalMatrix& matrix) {
  Partition part;
  for (const auto& [key, _] : matrix.registry()) part.sets[key];

  struct Best {
    const std::string* key;
    double runtime;
  };
  std::map<std::string, Best> best;
  // Cells iterate in key order, so on equal runtimes the first key seen wins.
  for (const auto& [cell, o] : matrix.cells()) {
    if (o.verdict != Verdict::solved) continue;
    auto [it, fresh] = best.try_emplace(cell.problem_id, Best{&cell.strategy_key, o.runtime_s});
    if (!fresh && o.runtime_s < it->second.runtime) it->second = Best{&cell.strategy_key, o.runtime_s};
  }
  for (const auto& [problem, b] : best) part.sets[*b.key].insert(problem);
  return part;
}

// ---------------------------------------------------------------------------

void SolvedView::add(const EvalOutcome& o) {
  ItemLabel label{o.variant, o.limit_s, o.strategy_key};
  auto [vit, fresh] = verdicts_.try_emplace({label, o.problem_id}, o.verdict);
  if (!fresh && vit->second != o.verdict) {
    throw MergeError("conflicting verdicts for strategy '" + o.strategy_key + "' on '" +
                     o.problem_id + "' (" + o.variant + ", " + format_limit(o.limit_s) +
                     "): " + std::string(to_string(vit->second)) + " vs " +
                     std::string(to_string(o.verdict)));
  }
  auto [it, new_item] = items_.try_emplace(label);
  if (new_item) order_.push_back(label);
  if (o.verdict == Verdict::solved) it->second.insert(o.problem_id);
}

void SolvedView::absorb(const SolvedView& other) {
  for (const auto& [cell, verdict] : other.verdicts_) {
    auto [vit, fresh] = verdicts_.try_emplace(cell, verdict);
    if (!fresh && vit->second != verdict) {
      throw MergeError("conflicting verdicts for strategy '" + cell.first.strategy_key +
                       "' on '" + cell.second + "'");
    }
  }
  for (const auto& label : other.order_) {
    auto [it, fresh] = items_.try_emplace(label);
    if (fresh) order_.push_back(label);
    const auto& src = other.items_.at(label);
    it->second.insert(src.begin(), src.end());
  }
}

const std::set<std::string>& SolvedView::solved(const ItemLabel& label) const {
  auto it = items_.find(label);
  if (it == items_.end()) throw DomainError("unknown item '" + label.strategy_key + "'");
  return it->second;
}

std::set<std::string> SolvedView::universe() const {
  std::set<std::string> out;
  for (const auto& [_, s] : items_) out.insert(s.begin(), s.end());
  return out;
}

SolvedView merge(std::span<const EvalMatrix> matrices) {
  SolvedView view;
  for (const auto& m : matrices) {
    for (const auto& [cell, o] : m.cells()) view.add(o);
  }
  return view;
}

SolvedView merge_views(const SolvedView& a, const SolvedView& b) {
  SolvedView out = a;
  out.absorb(b);
  return out;
}

SolvedView view_from_outcomes(std::span<const EvalOutcome> outcomes) {
  SolvedView view;
  for (const auto& o : outcomes) view.add(o);
  return view;
}

}  // namespace stratinv
