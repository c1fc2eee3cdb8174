#pragma once

// Greedy covers over (variant, limit, strategy) items, timeout escalation,
// cover reports and option-frequency analysis.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stratinv/evaluation.hpp"
#include "stratinv/invention.hpp"

namespace stratinv {

struct CoverItem {
  ItemLabel label;
  std::set<std::string> solved;
  std::string name;  // shown in the strat column; the strategy key when empty
};

struct CoverStep {
  ItemLabel label;
  std::string name;
  std::size_t addon = 0;
  // addon / previous total in hundredths of a percent, rounded half-up; none on the first step.
  std::optional<std::int64_t> addon_pct_centi;
  std::size_t total = 0;
  std::size_t alone = 0;
  std::optional<std::size_t> fresh;  // |solved ∩ baseline|, when a baseline is given

  bool operator==(const CoverStep&) const = default;
};

// Throws ValidationError on duplicate labels.
std::vector<CoverStep> greedy_cover(std::span<const CoverItem> items,
                                    const std::set<std::string>* baseline_unsolved = nullptr);

std::int64_t percent_centi(std::size_t addon, std::size_t previous_total);
std::string format_percent(std::int64_t centi);  // 1717 -> "17.17"

std::vector<CoverItem> items_from_view(const SolvedView& view,
                                       const std::map<std::string, std::string>& names = {});
// key -> label for every labelled strategy in log header records.
std::map<std::string, std::string> names_from_headers(std::span<const json> headers);

std::string render_csv(std::span<const CoverStep> steps);
std::string render_text(std::span<const CoverStep> steps);

// ---------------------------------------------------------------------------

struct EscalationConfig {
  double high_limit_s = 0.0;
  std::size_t max_escalations = SIZE_MAX;
  // Evaluate escalated strategies only on problems no item solves yet.
  bool only_unsolved = false;
};

struct EscalationResult {
  std::vector<CoverItem> items;
  std::vector<CoverStep> cover;
  std::vector<std::string> escalated;       // strategy keys, in escalation order
  std::vector<std::size_t> covered_sizes;   // |covered| before and after each escalation
};

// `strategies` supplies the runnable strategy for each item key; items whose
// key is unknown are never escalated.
EscalationResult escalate(std::vector<CoverItem> pool, std::span<const Strategy> strategies,
                          std::span<const Problem> problems, const std::string& variant,
                          const EscalationConfig& config, Solver& solver,
                          OutcomeCache* cache = nullptr);

// ---------------------------------------------------------------------------

struct OptionFrequency {
  std::string param;
  std::string value;
  std::size_t count = 0;
  double fraction = 0.0;
};

// Active assignments only; sorted by fraction descending, then name, then value.
// Throws ValidationError for strategies from different spaces.
std::vector<OptionFrequency> option_frequency(std::span<const Strategy> portfolio);
std::string render_frequency(std::span<const OptionFrequency> rows);

// elapsed_s,new,total
std::string progress_csv(std::span<const ProgressRecord> progress);

// Campaign accounting in the style of run summaries: initial, final, new,
// needed (greedy cover length), total and failed specializations.
json run_accounting(const CampaignState& state);

// ---------------------------------------------------------------------------

enum class SelectionMode { all, cover, solo };

SelectionMode selection_mode_from_string(const std::string& s);

// Picks up to `k` of `strategies` using their solved sets in `matrix`: the
// first k greedy-cover steps, the k best solo performers, or all of them.
std::vector<Strategy> select_initial(std::span<const Strategy> strategies, const EvalMatrix& matrix,
                                     SelectionMode mode, std::size_t k);

}  // namespace stratinv
