#pragma once

// Evaluation matrices at one (limit, variant), the outcome cache backed by the
// JSON Lines log, win-set partitions and the cross-variant solved view.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stratinv/solver_runner.hpp"
#include "stratinv/strategy_space.hpp"

namespace stratinv {

struct CellKey {
  std::string strategy_key;
  std::string problem_id;

  auto operator<=>(const CellKey&) const = default;
};

class EvalMatrix {
 public:
  EvalMatrix() = default;
  EvalMatrix(double limit_s, std::string variant);

  double limit_s() const { return limit_s_; }
  const std::string& variant() const { return variant_; }

  void register_strategy(const Strategy& s);
  bool has_strategy(const std::string& key) const { return registry_.contains(key); }
  const std::map<std::string, Strategy>& registry() const { return registry_; }

  // Throws ValidationError if the outcome's limit, variant or strategy does not belong here.
  void set(const EvalOutcome& outcome);
  const EvalOutcome* find(const std::string& strategy_key, const std::string& problem_id) const;
  const std::map<CellKey, EvalOutcome>& cells() const { return cells_; }
  std::set<std::string> problems() const;

  bool operator==(const EvalMatrix&) const = default;

 private:
  double limit_s_ = 0.0;
  std::string variant_;
  std::map<CellKey, EvalOutcome> cells_;
  std::map<std::string, Strategy> registry_;
};

// ---------------------------------------------------------------------------
// Outcome log and cache

// {"header": {"variant": ..., "limit_s": ..., "strategies": [{key, label, assignment}]}}
json matrix_header(const std::string& variant, double limit_s,
                   std::span<const Strategy> strategies);

struct OutcomeLogContents {
  std::vector<json> headers;  // the inner "header" objects
  std::vector<EvalOutcome> outcomes;
};

OutcomeLogContents read_outcome_log(const std::filesystem::path& path);

// Strategies named in header records, resolved against `space`; keys that do
// not match the space's rendering are skipped.
std::vector<Strategy> strategies_from_headers(const SpacePtr& space,
                                              std::span<const json> headers);

// Cells keyed by (strategy, problem, variant, limit). With a log path, the
// existing log is loaded on construction and new outcomes are appended.
class OutcomeCache {
 public:
  OutcomeCache() = default;
  explicit OutcomeCache(std::filesystem::path log_path);

  const EvalOutcome* find(const std::string& strategy_key, const std::string& problem_id,
                          const std::string& variant, double limit_s) const;
  void record(std::span<const EvalOutcome> outcomes);
  void record_header(const json& header);
  std::size_t size() const { return cells_.size(); }

 private:
  struct Key {
    std::string strategy, problem, variant;
    double limit_s;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, EvalOutcome> cells_;
  std::optional<std::filesystem::path> log_path_;
};

// Adds cells for every (strategy, problem) pair missing from `matrix`, running
// only the pairs the cache cannot answer. Returns the number of solver runs.
std::size_t evaluate_into(EvalMatrix& matrix, std::span<const Strategy> strategies,
                          std::span<const Problem> problems, Solver& solver,
                          OutcomeCache* cache = nullptr);

EvalMatrix evaluate_portfolio(std::span<const Strategy> strategies,
                              std::span<const Problem> problems, Solver& solver, double limit_s,
                              const std::string& variant, OutcomeCache* cache = nullptr);

// Throws DomainError for a key missing from the registry.
std::set<std::string> solved_set(const EvalMatrix& matrix, const std::string& strategy_key);

std::set<std::string> solved_union(const EvalMatrix& matrix);

// P_S for every registered strategy: each solved problem goes to the strategy
// with the smallest runtime, ties to the lexicographically smallest key.
struct Partition {
  std::map<std::string, std::set<std::string>> sets;

  std::size_t size_of(const std::string& key) const;
  bool operator==(const Partition&) const = default;
};

Partition best_partition(const EvalMatrix& matrix);

// ---------------------------------------------------------------------------
// Solved view across variants and limits

struct ItemLabel {
  std::string variant;
  double limit_s = 0.0;
  std::string strategy_key;

  auto operator<=>(const ItemLabel&) const = default;
};

class SolvedView {
 public:
  // Throws MergeError when the same cell was already seen with another verdict.
  void add(const EvalOutcome& outcome);
  void absorb(const SolvedView& other);

  // Items in first-seen order.
  const std::vector<ItemLabel>& order() const { return order_; }
  const std::set<std::string>& solved(const ItemLabel& label) const;
  bool contains(const ItemLabel& label) const { return items_.contains(label); }
  // Problem ids solved by any item; ids are shared across variants.
  std::set<std::string> universe() const;

  // Order-insensitive.
  bool operator==(const SolvedView& other) const {
    return items_ == other.items_ && verdicts_ == other.verdicts_;
  }

 private:
  std::vector<ItemLabel> order_;
  std::map<ItemLabel, std::set<std::string>> items_;
  std::map<std::pair<ItemLabel, std::string>, Verdict> verdicts_;
};

SolvedView merge(std::span<const EvalMatrix> matrices);
SolvedView merge_views(const SolvedView& a, const SolvedView& b);
SolvedView view_from_outcomes(std::span<const EvalOutcome> outcomes);

}  // namespace stratinv
