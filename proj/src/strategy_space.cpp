#include "stratinv/strategy_space.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <unordered_map>

#include "stratinv/error.hpp"

namespace stratinv {
namespace {

const std::set<std::string, std::less<>> kTruthy = {"on", "true", "yes", "1"};
const std::set<std::string, std::less<>> kFalsy = {"off", "false", "no", "0"};

std::string token_of(const json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer() || v.is_number_unsigned() || v.is_boolean()) return v.dump();
  throw ParseError(where + ": value tokens must be strings, integers or booleans");
}

void check_fields(const json& obj, std::initializer_list<std::string_view> allowed,
                  const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError(where + ": unknown field '" + key + "'");
    }
  }
}

const json& require(const json& obj, const char* field, const std::string& where) {
  auto it = obj.find(field);
  if (it == obj.end()) throw ParseError(where + ": missing field '" + field + "'");
  return *it;
}

bool valid_identifier(std::string_view s) {
  if (s.empty() || contains_whitespace(s)) return false;
  return s.find('=') == std::string_view::npos;
}

ParamSpec parse_param(const json& p, std::size_t index) {
  const std::string where = "params[" + std::to_string(index) + "]";
  if (!p.is_object()) throw ParseError(where + ": expected an object");
  check_fields(p, {"name", "values", "default", "tier", "render", "regular_override"}, where);

  ParamSpec spec;
  const json& name = require(p, "name", where);
  if (!name.is_string()) throw ParseError(where + ".name: expected a string");
  spec.name = name.get<std::string>();
  if (!valid_identifier(spec.name)) {
    throw ValidationError(where + ": invalid parameter name '" + spec.name + "'");
  }
  const std::string pwhere = "parameter '" + spec.name + "'";

  const json& values = require(p, "values", where);
  if (!values.is_array()) throw ParseError(pwhere + ".values: expected an array");
  for (const auto& v : values) spec.values.push_back(token_of(v, pwhere));
  if (spec.values.empty()) throw ValidationError(pwhere + ": empty value domain");
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    if (spec.values[i].empty() || contains_whitespace(spec.values[i])) {
      throw ValidationError(pwhere + ": invalid value token '" + spec.values[i] + "'");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (spec.values[i] == spec.values[j]) {
        throw ValidationError(pwhere + ": duplicate value '" + spec.values[i] + "'");
      }
    }
  }

  if (auto it = p.find("default"); it != p.end()) {
    const std::string def = token_of(*it, pwhere);
    auto pos = std::find(spec.values.begin(), spec.values.end(), def);
    if (pos == spec.values.end()) {
      throw ValidationError(pwhere + ": default '" + def + "' out of range (not in values)");
    }
    spec.default_index = static_cast<std::size_t>(pos - spec.values.begin());
  }

  if (auto it = p.find("tier"); it != p.end()) {
    if (*it == "regular") {
      spec.tier = Tier::regular;
    } else if (*it == "expert") {
      spec.tier = Tier::expert;
    } else {
      throw ValidationError(pwhere + ": tier must be 'regular' or 'expert'");
    }
  }
  if (auto it = p.find("regular_override"); it != p.end()) {
    if (!it->is_boolean()) throw ParseError(pwhere + ".regular_override: expected a boolean");
    spec.regular_override = it->get<bool>();
  }

  const json render = p.value("render", json("kv"));
  if (render.is_string() && render == "kv") {
    spec.render = RenderStyle::key_value;
    for (const auto& v : spec.values) spec.tokens.push_back("--" + spec.name + "=" + v);
  } else if (render.is_string() && render == "flag") {
    spec.render = RenderStyle::flag;
    for (const auto& v : spec.values) {
      if (kTruthy.contains(v)) {
        spec.tokens.push_back("--" + spec.name);
      } else if (kFalsy.contains(v)) {
        spec.tokens.push_back("--no-" + spec.name);
      } else {
        throw ValidationError(pwhere + ": flag rendering needs boolean-like values, got '" + v +
                              "'");
      }
    }
  } else if (render.is_object()) {
    spec.render = RenderStyle::table;
    for (const auto& v : spec.values) {
      auto it = render.find(v);
      if (it == render.end() || !it->is_string()) {
        throw ValidationError(pwhere + ": render table has no token for value '" + v + "'");
      }
      spec.tokens.push_back(it->get<std::string>());
    }
    if (render.size() != spec.values.size()) {
      throw ValidationError(pwhere + ": render table mentions values outside the domain");
    }
  } else {
    throw ValidationError(pwhere + ": render must be \"kv\", \"flag\" or a value->token table");
  }
  for (const auto& t : spec.tokens) {
    if (t.empty() || contains_whitespace(t)) {
      throw ValidationError(pwhere + ": invalid rendered token '" + t + "'");
    }
  }
  return spec;
}

Dependency parse_dep(const json& d, std::size_t index) {
  const std::string where = "deps[" + std::to_string(index) + "]";
  if (!d.is_object()) throw ParseError(where + ": expected an object");
  check_fields(d, {"child", "parent", "when"}, where);
  Dependency dep;
  const json& child = require(d, "child", where);
  const json& parent = require(d, "parent", where);
  if (!child.is_string() || !parent.is_string()) {
    throw ParseError(where + ": child and parent must be strings");
  }
  dep.child = child.get<std::string>();
  dep.parent = parent.get<std::string>();
  const json& when = require(d, "when", where);
  if (when.is_array()) {
    for (const auto& v : when) dep.enabling_values.push_back(token_of(v, where));
  } else {
    dep.enabling_values.push_back(token_of(when, where));
  }
  return dep;
}

}  // namespace

std::optional<std::size_t> StrategySpace::find(std::string_view param) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == param) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> StrategySpace::find_value(std::size_t param,
                                                     std::string_view value) const {
  const auto& vals = params_[param].values;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (vals[i] == value) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> StrategySpace::parent(std::size_t param) const { return parent_[param]; }

bool StrategySpace::enabled_by(std::size_t param, std::size_t parent_value) const {
  return enabling_[param][parent_value];
}

std::optional<std::pair<std::size_t, std::size_t>> StrategySpace::find_token(
    std::string_view token) const {
  for (std::size_t p = 0; p < params_.size(); ++p) {
    const auto& toks = params_[p].tokens;
    for (std::size_t v = 0; v < toks.size(); ++v) {
      if (toks[v] == token) return std::pair{p, v};
    }
  }
  return std::nullopt;
}

json StrategySpace::to_json() const {
  json params = json::array();
  for (const auto& p : params_) {
    json jp = {{"name", p.name},
               {"values", p.values},
               {"default", p.values[p.default_index]},
               {"tier", p.tier == Tier::regular ? "regular" : "expert"}};
    if (p.regular_override) jp["regular_override"] = true;
    switch (p.render) {
      case RenderStyle::key_value:
        jp["render"] = "kv";
        break;
      case RenderStyle::flag:
        jp["render"] = "flag";
        break;
      case RenderStyle::table: {
        json table = json::object();
        for (std::size_t v = 0; v < p.values.size(); ++v) table[p.values[v]] = p.tokens[v];
        jp["render"] = table;
        break;
      }
    }
    params.push_back(std::move(jp));
  }
  json deps = json::array();
  for (const auto& d : deps_) {
    deps.push_back({{"child", d.child}, {"parent", d.parent}, {"when", d.enabling_values}});
  }
  return {{"name", name_}, {"params", params}, {"deps", deps}};
}

SpacePtr load_space(const json& document, TierFilter filter) {
  if (!document.is_object()) throw ParseError("space document: expected an object");
  check_fields(document, {"name", "params", "deps"}, "space document");

  std::string name;
  if (auto it = document.find("name"); it != document.end()) {
    if (!it->is_string()) throw ParseError("space document: name must be a string");
    name = it->get<std::string>();
  }
  const json& params = require(document, "params", "space document");
  if (!params.is_array()) throw ParseError("space document: params must be an array");
  if (params.empty()) throw ValidationError("space must be non-empty (empty params list)");

  std::vector<ParamSpec> all;
  for (std::size_t i = 0; i < params.size(); ++i) all.push_back(parse_param(params[i], i));

  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!index.emplace(all[i].name, i).second) {
      throw ValidationError("duplicate parameter name '" + all[i].name + "'");
    }
  }
  {
    std::map<std::string, std::string, std::less<>> owner;
    for (const auto& p : all) {
      for (const auto& t : p.tokens) {
        auto [it, fresh] = owner.emplace(t, p.name);
        if (!fresh) {
          throw ValidationError("rendered token '" + t + "' is ambiguous (parameters '" +
                                it->second + "' and '" + p.name + "')");
        }
      }
    }
  }

  std::vector<Dependency> deps;
  if (auto it = document.find("deps"); it != document.end()) {
    if (!it->is_array()) throw ParseError("space document: deps must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) deps.push_back(parse_dep((*it)[i], i));
  }

  std::vector<std::optional<std::size_t>> parent(all.size());
  for (const auto& d : deps) {
    auto c = index.find(d.child);
    if (c == index.end()) throw ValidationError("dependency names unknown child '" + d.child + "'");
    auto p = index.find(d.parent);
    if (p == index.end()) {
      throw ValidationError("dependency of '" + d.child + "' names unknown parent '" + d.parent +
                            "'");
    }
    if (c->second == p->second) {
      throw ValidationError("parameter '" + d.child + "' cannot depend on itself");
    }
    if (parent[c->second]) {
      throw ValidationError("parameter '" + d.child + "' has more than one controlling parent");
    }
    if (d.enabling_values.empty()) {
      throw ValidationError("dependency of '" + d.child + "' has an empty enabling set");
    }
    for (const auto& v : d.enabling_values) {
      const auto& dom = all[p->second].values;
      if (std::find(dom.begin(), dom.end(), v) == dom.end()) {
        throw ValidationError("enabling value '" + v + "' of '" + d.child +
                              "' is not in the domain of parent '" + d.parent + "'");
      }
    }
    parent[c->second] = p->second;
  }

  // Single-parent graph: a cycle exists iff some parent chain revisits a node.
  for (std::size_t start = 0; start < all.size(); ++start) {
    std::vector<std::size_t> chain{start};
    std::vector<bool> seen(all.size(), false);
    seen[start] = true;
    for (auto cur = parent[start]; cur; cur = parent[*cur]) {
      chain.push_back(*cur);
      if (seen[*cur]) {
        std::string path;
        auto first = std::find(chain.begin(), chain.end(), *cur);
        for (auto it = first; it != chain.end(); ++it) {
          if (!path.empty()) path += " <- ";
          path += all[*it].name;
        }
        throw ValidationError("cyclic dependency: " + path);
      }
      seen[*cur] = true;
    }
  }

  // Tier filtering happens after whole-document validation.
  std::vector<bool> keep(all.size(), true);
  if (filter == TierFilter::regular) {
    for (std::size_t i = 0; i < all.size(); ++i) {
      keep[i] = all[i].tier == Tier::regular || all[i].regular_override;
    }
    if (std::none_of(keep.begin(), keep.end(), [](bool k) { return k; })) {
      throw ValidationError("space must be non-empty (no regular-tier parameters)");
    }
  }

  auto space = std::make_shared<StrategySpace>();
  space->name_ = std::move(name);
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (keep[i]) space->params_.push_back(all[i]);
  }
  for (const auto& d : deps) {
    if (keep[index.at(d.child)] && keep[index.at(d.parent)]) space->deps_.push_back(d);
  }

  const std::size_t n = space->params_.size();
  space->parent_.assign(n, std::nullopt);
  space->enabling_.assign(n, {});
  space->children_.assign(n, {});
  for (const auto& d : space->deps_) {
    const std::size_t c = *space->find(d.child);
    const std::size_t p = *space->find(d.parent);
    space->parent_[c] = p;
    std::vector<bool> mask(space->params_[p].values.size(), false);
    for (const auto& v : d.enabling_values) mask[*space->find_value(p, v)] = true;
    space->enabling_[c] = std::move(mask);
    space->children_[p].push_back(c);
  }
  for (auto& kids : space->children_) std::sort(kids.begin(), kids.end());

  // Roots first, then breadth-first by declaration order.
  std::vector<std::size_t> frontier;
  for (std::size_t i = 0; i < n; ++i) {
    if (!space->parent_[i]) frontier.push_back(i);
  }
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    for (std::size_t c : space->children_[frontier[head]]) frontier.push_back(c);
  }
  space->topo_ = std::move(frontier);
  return space;
}

SpacePtr load_space_file(const std::filesystem::path& path, TierFilter filter) {
  try {
    return load_space(parse_json_file(path), filter);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Strategy

Strategy::Strategy(SpacePtr space, std::vector<std::uint32_t> assignment, std::string label)
    : space_(std::move(space)), assignment_(std::move(assignment)), label_(std::move(label)) {
  if (!space_) throw ValidationError("strategy without a space");
  if (assignment_.size() != space_->size()) {
    throw ValidationError("strategy assigns " + std::to_string(assignment_.size()) +
                          " parameters, space has " + std::to_string(space_->size()));
  }
  for (std::size_t i = 0; i < assignment_.size(); ++i) {
    if (assignment_[i] >= space_->params()[i].values.size()) {
      throw ValidationError("value index out of range for '" + space_->params()[i].name + "'");
    }
  }
}

Strategy Strategy::defaults(SpacePtr space, std::string label) {
  std::vector<std::uint32_t> a;
  for (const auto& p : space->params()) a.push_back(static_cast<std::uint32_t>(p.default_index));
  return Strategy(std::move(space), std::move(a), std::move(label));
}

Strategy Strategy::from_tokens(SpacePtr space, std::span<const std::string> tokens,
                               std::string label) {
  Strategy s = defaults(space, std::move(label));
  std::vector<bool> set(space->size(), false);
  for (const auto& tok : tokens) {
    auto hit = space->find_token(tok);
    if (!hit) throw ValidationError("unknown option token '" + tok + "'");
    auto [p, v] = *hit;
    if (set[p] && s.assignment_[p] != v) {
      throw ValidationError("conflicting values for '" + space->params()[p].name + "'");
    }
    set[p] = true;
    s.assignment_[p] = static_cast<std::uint32_t>(v);
  }
  return s;
}

Strategy Strategy::from_json(SpacePtr space, const json& document) {
  if (!document.is_object()) throw ParseError("strategy document: expected an object");
  std::string label = document.value("label", std::string{});
  if (auto it = document.find("options"); it != document.end()) {
    std::vector<std::string> tokens;
    if (it->is_string()) {
      std::string text = it->get<std::string>();
      std::size_t i = 0;
      while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) tokens.push_back(text.substr(i, j - i));
        i = j;
      }
    } else if (it->is_array()) {
      for (const auto& t : *it) tokens.push_back(t.get<std::string>());
    } else {
      throw ParseError("strategy '" + label + "': options must be a string or an array");
    }
    return from_tokens(std::move(space), tokens, std::move(label));
  }
  Strategy s = defaults(space, std::move(label));
  if (auto it = document.find("assignment"); it != document.end()) {
    if (!it->is_object()) throw ParseError("strategy assignment: expected an object");
    for (const auto& [name, value] : it->items()) {
      auto p = space->find(name);
      if (!p) throw ValidationError("strategy assigns unknown parameter '" + name + "'");
      const std::string tok = token_of(value, "parameter '" + name + "'");
      auto v = space->find_value(*p, tok);
      if (!v) {
        throw ValidationError("value '" + tok + "' not in the domain of '" + name + "'");
      }
      s.assignment_[*p] = static_cast<std::uint32_t>(*v);
    }
  }
  return s;
}

const std::string& Strategy::value(std::size_t param) const {
  return space_->params()[param].values[assignment_[param]];
}

Strategy Strategy::with(std::size_t param, std::size_t value) const {
  if (param >= space_->size() || value >= space_->params()[param].values.size()) {
    throw ValidationError("parameter or value index out of range");
  }
  Strategy s = *this;
  s.assignment_[param] = static_cast<std::uint32_t>(value);
  s.label_.clear();
  return s;
}

std::vector<bool> Strategy::active_mask() const {
  std::vector<bool> active(space_->size(), false);
  for (std::size_t p : space_->topological_order()) {
    auto par = space_->parent(p);
    active[p] = !par || (active[*par] && space_->enabled_by(p, assignment_[*par]));
  }
  return active;
}

std::set<std::string> Strategy::active_params() const {
  std::set<std::string> out;
  const auto active = active_mask();
  for (std::size_t p = 0; p < active.size(); ++p) {
    if (active[p]) out.insert(space_->params()[p].name);
  }
  return out;
}

std::vector<std::string> Strategy::render() const {
  std::vector<std::string> out;
  const auto active = active_mask();
  for (std::size_t p = 0; p < active.size(); ++p) {
    if (active[p]) out.push_back(space_->params()[p].tokens[assignment_[p]]);
  }
  return out;
}

std::string Strategy::canonical_key() const { return join(render(), " "); }

std::string Strategy::short_id() const { return hex_digits(fnv1a64(canonical_key()), 6); }

std::string Strategy::display_name() const { return label_.empty() ? short_id() : label_; }

json Strategy::to_json() const {
  json assignment = json::object();
  for (std::size_t p = 0; p < assignment_.size(); ++p) {
    assignment[space_->params()[p].name] = value(p);
  }
  json out = {{"assignment", assignment}};
  if (!label_.empty()) out["label"] = label_;
  return out;
}

bool Strategy::operator==(const Strategy& other) const {
  return assignment_ == other.assignment_ && label_ == other.label_ &&
         (space_ == other.space_ || *space_ == *other.space_);
}

std::vector<Strategy> load_strategies(const SpacePtr& space, const json& document) {
  const json* list = &document;
  if (document.is_object()) {
    auto it = document.find("strategies");
    if (it == document.end()) throw ParseError("strategy list: missing 'strategies'");
    list = &*it;
  }
  if (!list->is_array()) throw ParseError("strategy list: expected an array");
  std::vector<Strategy> out;
  for (const auto& d : *list) out.push_back(Strategy::from_json(space, d));
  return out;
}

std::vector<Strategy> load_strategies_file(const SpacePtr& space,
                                           const std::filesystem::path& path) {
  try {
    return load_strategies(space, parse_json_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Sizing, neighborhoods, sampling

namespace {

struct Count {
  std::optional<std::uint64_t> exact;
  double log10;
};

// log10(10^a + 10^b)
double log10_add(double a, double b) {
  if (std::isinf(a) && a < 0) return b;
  if (std::isinf(b) && b < 0) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log10(1.0 + std::pow(10.0, lo - hi));
}

// Distinct rendered suffixes contributed by `p` and its (active) descendants:
// sum over p's values of the product of the enabled children's counts.
Count subtree_count(const StrategySpace& space, std::size_t p) {
  const std::size_t nvalues = space.params()[p].values.size();
  std::vector<Count> kids;
  for (std::size_t c : space.children(p)) kids.push_back(subtree_count(space, c));

  std::optional<std::uint64_t> total = 0;
  double total_log = -INFINITY;
  for (std::size_t v = 0; v < nvalues; ++v) {
    std::optional<std::uint64_t> prod = 1;
    double prod_log = 0.0;
    const auto children = space.children(p);
    for (std::size_t k = 0; k < children.size(); ++k) {
      if (!space.enabled_by(children[k], v)) continue;
      prod_log += kids[k].log10;
      if (prod && kids[k].exact) {
        std::uint64_t r;
        prod = __builtin_mul_overflow(*prod, *kids[k].exact, &r) ? std::nullopt
                                                                  : std::optional(r);
      } else {
        prod.reset();
      }
    }
    total_log = log10_add(total_log, prod_log);
    if (total && prod) {
      std::uint64_t r;
      total = __builtin_add_overflow(*total, *prod, &r) ? std::nullopt : std::optional(r);
    } else {
      total.reset();
    }
  }
  return {total, total_log};
}

}  // namespace

SpaceSize space_size(const StrategySpace& space) {
  SpaceSize out;
  std::optional<std::uint64_t> exact = 1;
  for (std::size_t p = 0; p < space.size(); ++p) {
    if (space.parent(p)) continue;
    Count c = subtree_count(space, p);
    out.log10 += c.log10;
    if (exact && c.exact) {
      std::uint64_t r;
      exact = __builtin_mul_overflow(*exact, *c.exact, &r) ? std::nullopt : std::optional(r);
    } else {
      exact.reset();
    }
  }
  out.exact = exact;
  return out;
}

std::vector<Strategy> neighbors(const Strategy& s) {
  std::vector<Strategy> out;
  const auto params = s.space().params();
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t v = 0; v < params[p].values.size(); ++v) {
      if (v != s.value_index(p)) out.push_back(s.with(p, v));
    }
  }
  return out;
}

Strategy sample_uniform(const SpacePtr& space, std::mt19937_64& rng) {
  std::vector<std::uint32_t> a;
  a.reserve(space->size());
  for (const auto& p : space->params()) {
    std::uniform_int_distribution<std::uint32_t> pick(0,
                                                      static_cast<std::uint32_t>(p.values.size() - 1));
    a.push_back(pick(rng));
  }
  return Strategy(space, std::move(a));
}

Strategy sample_uniform(const SpacePtr& space, std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  return sample_uniform(space, rng);
}

}  // namespace stratinv
