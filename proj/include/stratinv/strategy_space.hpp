#pragma once

// Configuration space of a command-line solver: categorical parameters with
// finite domains, regular/expert tiers and single-parent activation
// dependencies. A Strategy is a total assignment over a space; only the
// parameters that are active under that assignment are rendered.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stratinv/util.hpp"

namespace stratinv {

enum class Tier { regular, expert };

// Which parameters survive loading: `regular` drops expert parameters that do
// not carry a regular override.
enum class TierFilter { regular, full };

enum class RenderStyle {
  key_value,  // --name=value
  flag,       // --name / --no-name for boolean-like domains
  table,      // explicit value -> token table from the document
};

struct ParamSpec {
  std::string name;
  std::vector<std::string> values;
  std::size_t default_index = 0;
  Tier tier = Tier::regular;
  bool regular_override = false;
  RenderStyle render = RenderStyle::key_value;
  // Rendered token for each value, parallel to `values`.
  std::vector<std::string> tokens;

  bool operator==(const ParamSpec&) const = default;
};

struct Dependency {
  std::string child;
  std::string parent;
  std::vector<std::string> enabling_values;

  bool operator==(const Dependency&) const = default;
};

class StrategySpace {
 public:
  const std::string& name() const { return name_; }
  std::span<const ParamSpec> params() const { return params_; }
  std::span<const Dependency> dependencies() const { return deps_; }
  std::size_t size() const { return params_.size(); }

  std::optional<std::size_t> find(std::string_view param) const;
  std::optional<std::size_t> find_value(std::size_t param, std::string_view value) const;

  // Controlling parent of `param`, if any.
  std::optional<std::size_t> parent(std::size_t param) const;
  // Whether value index `parent_value` of the parent enables `param`.
  bool enabled_by(std::size_t param, std::size_t parent_value) const;
  // Parents before children.
  std::span<const std::size_t> topological_order() const { return topo_; }
  std::span<const std::size_t> children(std::size_t param) const { return children_[param]; }

  // Reverse lookup of a rendered token: (param, value index).
  std::optional<std::pair<std::size_t, std::size_t>> find_token(std::string_view token) const;

  json to_json() const;

  bool operator==(const StrategySpace& other) const {
    return name_ == other.name_ && params_ == other.params_ && deps_ == other.deps_;
  }

 private:
  friend std::shared_ptr<const StrategySpace> load_space(const json&, TierFilter);

  std::string name_;
  std::vector<ParamSpec> params_;
  std::vector<Dependency> deps_;
  std::vector<std::optional<std::size_t>> parent_;
  std::vector<std::vector<bool>> enabling_;  // per child, indexed by parent value
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> topo_;
};

using SpacePtr = std::shared_ptr<const StrategySpace>;

// Throws ParseError for malformed documents and ValidationError naming the
// violated invariant otherwise.
SpacePtr load_space(const json& document, TierFilter filter = TierFilter::full);
SpacePtr load_space_file(const std::filesystem::path& path, TierFilter filter = TierFilter::full);

class Strategy {
 public:
  // Throws ValidationError if `assignment` is not total or out of range.
  Strategy(SpacePtr space, std::vector<std::uint32_t> assignment, std::string label = {});

  static Strategy defaults(SpacePtr space, std::string label = {});
  // Starts at the defaults and applies each rendered token.
  static Strategy from_tokens(SpacePtr space, std::span<const std::string> tokens,
                              std::string label = {});
  // {"label": ..., "assignment": {param: value}} or {"label": ..., "options": "--a --b=1"}.
  static Strategy from_json(SpacePtr space, const json& document);

  const StrategySpace& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }
  std::span<const std::uint32_t> assignment() const { return assignment_; }
  std::size_t value_index(std::size_t param) const { return assignment_[param]; }
  const std::string& value(std::size_t param) const;
  const std::string& label() const { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }

  Strategy with(std::size_t param, std::size_t value) const;

  std::vector<bool> active_mask() const;
  std::set<std::string> active_params() const;
  std::vector<std::string> render() const;
  // Rendered tokens joined by a single space; tokens never contain whitespace.
  std::string canonical_key() const;
  // Six hex digits of the key hash, for display.
  std::string short_id() const;
  // Label if present, otherwise the short id.
  std::string display_name() const;

  // Full assignment by parameter name (inactive parameters included).
  json to_json() const;

  bool operator==(const Strategy& other) const;

 private:
  SpacePtr space_;
  std::vector<std::uint32_t> assignment_;
  std::string label_;
};

// Strategy documents: either an array or {"strategies": [...]}.
std::vector<Strategy> load_strategies(const SpacePtr& space, const json& document);
std::vector<Strategy> load_strategies_file(const SpacePtr& space, const std::filesystem::path& path);

struct SpaceSize {
  std::optional<std::uint64_t> exact;  // empty on overflow
  double log10 = 0.0;
};

// Number of distinct canonical strategies.
SpaceSize space_size(const StrategySpace& space);

// Every strategy differing from `s` in exactly one parameter, in declaration
// order. Changes to inactive parameters are included (they share s's key).
std::vector<Strategy> neighbors(const Strategy& s);

Strategy sample_uniform(const SpacePtr& space, std::mt19937_64& rng);
Strategy sample_uniform(const SpacePtr& space, std::uint64_t rng_seed);

}  // namespace stratinv
