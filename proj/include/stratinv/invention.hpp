#pragma once

// The invention campaign: evaluate the portfolio at T, specialize the strategy
// with the largest win set on that set at t, add the result, repeat.

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stratinv/evaluation.hpp"
#include "stratinv/tuner.hpp"

namespace stratinv {

struct CampaignConfig {
  double T_limit_s = 0.0;
  TunerConfig tuner;  // t_limit_s = 0 means T/2
  double wall_budget_s = 0.0;
  std::vector<Strategy> initial_strategies;
  SpacePtr space;
  std::vector<Problem> problems;
  std::string variant;
  std::size_t workers = 1;
  // Stop once this many specializations have been made in total.
  std::optional<std::size_t> max_specializations;

  // Resolves the t default; throws ValidationError on broken invariants.
  void validate();
};

struct Provenance {
  bool invented = false;
  std::string parent_key;
  std::size_t ps_size = 0;
  double elapsed_s = 0.0;

  bool operator==(const Provenance&) const = default;
};

struct PortfolioEntry {
  Strategy strategy;
  Provenance provenance;

  bool operator==(const PortfolioEntry&) const = default;
};

struct ProgressRecord {
  double elapsed_s = 0.0;
  std::string event;  // "initial", "invented" or "failed"
  std::string strategy_key;
  std::size_t new_solved = 0;
  std::size_t total = 0;

  bool operator==(const ProgressRecord&) const = default;
};

struct SpecializationRecord {
  std::string target_key;
  std::string result_key;
  std::size_t ps_size = 0;
  bool failed = false;
  std::size_t evaluations = 0;
  double started_s = 0.0;
  double finished_s = 0.0;

  bool operator==(const SpecializationRecord&) const = default;
};

struct CampaignState {
  std::vector<PortfolioEntry> portfolio;
  EvalMatrix matrix;
  std::set<std::string> specialized;
  std::size_t specializations_total = 0;
  std::size_t specializations_failed = 0;
  std::vector<ProgressRecord> progress;
  std::vector<SpecializationRecord> specializations;
  double elapsed_s = 0.0;

  std::size_t invented_count() const;
  bool contains(const std::string& key) const;
  std::vector<Strategy> strategies() const;

  bool operator==(const CampaignState&) const = default;
};

// Unspecialized strategy with the largest non-empty win set; ties by key.
std::optional<std::string> select_target(const CampaignState& state);

struct CampaignOptions {
  std::optional<std::filesystem::path> checkpoint_path;
  std::optional<std::filesystem::path> progress_path;
  std::optional<std::filesystem::path> trace_dir;
  OutcomeCache* cache = nullptr;
  TuneFunction tuner = tune;
};

CampaignState initial_state(const CampaignConfig& config);

// Runs the loop on `state` until no target remains or a budget is spent.
// On an exception the checkpoint (if configured) reflects the last finished step.
void run_campaign(const CampaignConfig& config, CampaignState& state, Solver& solver,
                  const CampaignOptions& options = {});

CampaignState invent(CampaignConfig config, Solver& solver, const CampaignOptions& options = {});

json checkpoint_to_json(const CampaignState& state, const StrategySpace& space);
// Throws CheckpointError on a corrupt, version-mismatched or foreign-space snapshot.
CampaignState checkpoint_from_json(const json& document, const SpacePtr& space);
void write_checkpoint(const std::filesystem::path& path, const CampaignState& state,
                      const StrategySpace& space);
CampaignState load_checkpoint(const std::filesystem::path& path, const SpacePtr& space);

json progress_to_json(const ProgressRecord& r);
void write_progress(const std::filesystem::path& path, const CampaignState& state);

}  // namespace stratinv
