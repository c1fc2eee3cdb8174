#pragma once

// Command-line entry point and the run configuration it loads.

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stratinv/invention.hpp"

namespace stratinv {

// A run configuration document. Paths resolve against the document's directory.
//   space, tier, strategies, landscape | solver, benchmark | problems,
//   variant, limit_s, workers, wall_budget_s, max_specializations, tuner
struct RunConfig {
  SpacePtr space;
  std::vector<Strategy> strategies;
  std::optional<Landscape> landscape;
  std::optional<SolverConfig> solver;
  std::vector<Problem> problems;
  std::string variant = "default";
  double limit_s = 0.0;
  std::size_t workers = 1;
  double wall_budget_s = 0.0;
  std::optional<std::size_t> max_specializations;
  TunerConfig tuner;

  // Throws ParseError/ValidationError.
  static RunConfig from_json(const json& document, const std::filesystem::path& base_dir);
  static RunConfig from_file(const std::filesystem::path& path);

  std::unique_ptr<Solver> make_solver() const;
  CampaignConfig campaign() const;
};

// Exit codes: 0 success, 1 domain error, 2 usage error.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stratinv
