#include "stratinv/portfolio_report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "stratinv/error.hpp"

namespace stratinv {
namespace {

std::string step_name(const CoverStep& s) { return s.name.empty() ? s.label.strategy_key : s.name; }

std::string pct_cell(const CoverStep& s) {
  return s.addon_pct_centi ? format_percent(*s.addon_pct_centi) : "-";
}

std::string fresh_cell(const CoverStep& s) {
  return s.fresh ? std::to_string(*s.fresh) : "-";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::set<std::string> union_of(std::span<const CoverItem> items) {
  std::set<std::string> out;
  for (const auto& i : items) out.insert(i.solved.begin(), i.solved.end());
  return out;
}

}  // namespace

std::int64_t percent_centi(std::size_t addon, std::size_t previous_total) {
  if (previous_total == 0) throw DomainError("percentage of an empty total");
  const auto num = static_cast<std::int64_t>(addon) * 10000;
  const auto den = static_cast<std::int64_t>(previous_total);
  return (2 * num + den) / (2 * den);
}

std::string format_percent(std::int64_t centi) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", static_cast<long long>(centi / 100),
                static_cast<long long>(centi % 100));
  return buf;
}

std::vector<CoverStep> greedy_cover(std::span<const CoverItem> items,
                                    const std::set<std::string>* baseline_unsolved) {
  {
    std::set<ItemLabel> labels;
    for (const auto& i : items) {
      if (!labels.insert(i.label).second) {
        throw ValidationError("duplicate cover item '" + i.label.variant + "/" +
                              format_limit(i.label.limit_s) + "/" + i.label.strategy_key + "'");
      }
    }
  }

  std::vector<CoverStep> steps;
  std::set<std::string> covered;
  std::vector<bool> chosen(items.size(), false);
  while (true) {
    std::size_t best = items.size();
    std::size_t best_gain = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (chosen[i]) continue;
      std::size_t gain = 0;
      for (const auto& p : items[i].solved) gain += !covered.contains(p);
      if (gain > best_gain) {
        best = i;
        best_gain = gain;
      }
    }
    if (best == items.size()) break;

    const auto& item = items[best];
    chosen[best] = true;
    CoverStep step;
    step.label = item.label;
    step.name = item.name;
    step.addon = best_gain;
    if (!steps.empty()) step.addon_pct_centi = percent_centi(best_gain, covered.size());
    covered.insert(item.solved.begin(), item.solved.end());
    step.total = covered.size();
    step.alone = item.solved.size();
    if (baseline_unsolved) {
      step.fresh = static_cast<std::size_t>(std::count_if(
          item.solved.begin(), item.solved.end(),
          [&](const std::string& p) { return baseline_unsolved->contains(p); }));
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

std::vector<CoverItem> items_from_view(const SolvedView& view,
                                       const std::map<std::string, std::string>& names) {
  std::vector<CoverItem> out;
  for (const auto& label : view.order()) {
    auto it = names.find(label.strategy_key);
    out.push_back(CoverItem{label, view.solved(label), it == names.end() ? "" : it->second});
  }
  return out;
}

std::map<std::string, std::string> names_from_headers(std::span<const json> headers) {
  std::map<std::string, std::string> out;
  for (const auto& h : headers) {
    for (const auto& s : h.value("strategies", json::array())) {
      if (s.contains("key") && s.contains("label") && !s["label"].get<std::string>().empty()) {
        out.emplace(s["key"].get<std::string>(), s["label"].get<std::string>());
      }
    }
  }
  return out;
}

std::string render_csv(std::span<const CoverStep> steps) {
  std::string out = "version,timeout,strat,addon,addon_pct,total,alone,new\n";
  for (const auto& s : steps) {
    out += csv_field(s.label.variant) + "," + format_limit(s.label.limit_s) + "," +
           csv_field(step_name(s)) + "," + std::to_string(s.addon) + "," + pct_cell(s) + "," +
           std::to_string(s.total) + "," + std::to_string(s.alone) + "," + fresh_cell(s) + "\n";
  }
  return out;
}

std::string render_text(std::span<const CoverStep> steps) {
  std::vector<std::vector<std::string>> rows{
      {"version", "timeout", "strat", "addon", "pct", "total", "alone", "new"}};
  for (const auto& s : steps) {
    rows.push_back({s.label.variant, format_limit(s.label.limit_s), step_name(s),
                    "+" + std::to_string(s.addon),
                    s.addon_pct_centi ? "+" + format_percent(*s.addon_pct_centi) + "%" : "-",
                    std::to_string(s.total), std::to_string(s.alone), fresh_cell(s)});
  }
  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      const std::string pad(width[c] - r[c].size(), ' ');
      // Text columns left, numbers right.
      line += c < 3 ? r[c] + pad : pad + r[c];
      if (c + 1 < r.size()) line += "  ";
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

EscalationResult escalate(std::vector<CoverItem> pool, std::span<const Strategy> strategies,
                          std::span<const Problem> problems, const std::string& variant,
                          const EscalationConfig& config, Solver& solver, OutcomeCache* cache) {
  if (!(config.high_limit_s > 0)) throw ValidationError("high limit must be positive");
  std::map<std::string, const Strategy*> by_key;
  for (const auto& s : strategies) by_key.emplace(s.canonical_key(), &s);

  EscalationResult result;
  result.items = std::move(pool);
  std::set<std::string> covered = union_of(result.items);
  result.covered_sizes.push_back(covered.size());

  auto escalated_already = [&](const std::string& key) {
    return std::any_of(result.items.begin(), result.items.end(), [&](const CoverItem& i) {
      return i.label.variant == variant && i.label.limit_s == config.high_limit_s &&
             i.label.strategy_key == key;
    });
  };
  auto eligible = [&](const CoverItem& i) {
    return i.label.variant == variant && i.label.limit_s < config.high_limit_s &&
           by_key.contains(i.label.strategy_key) && !escalated_already(i.label.strategy_key);
  };

  while (result.escalated.size() < config.max_escalations) {
    const auto cover = greedy_cover(result.items);
    const CoverItem* pick = nullptr;
    for (const auto& step : cover) {
      auto it = std::find_if(result.items.begin(), result.items.end(),
                             [&](const CoverItem& i) { return i.label == step.label; });
      if (eligible(*it)) {
        pick = &*it;
        break;
      }
    }
    if (!pick) {
      for (const auto& i : result.items) {
        if (eligible(i)) {
          pick = &i;
          break;
        }
      }
    }
    if (!pick) break;

    const std::string key = pick->label.strategy_key;
    const std::string name = pick->name;
    std::vector<Problem> targets;
    for (const auto& p : problems) {
      if (!config.only_unsolved || !covered.contains(p.id)) targets.push_back(p);
    }
    CoverItem item{ItemLabel{variant, config.high_limit_s, key}, {}, name};
    if (!targets.empty()) {
      const Strategy* s = by_key.at(key);
      auto m = evaluate_portfolio(std::span(s, 1), targets, solver, config.high_limit_s, variant,
                                  cache);
      item.solved = solved_set(m, key);
    }
    const std::size_t before = covered.size();
    covered.insert(item.solved.begin(), item.solved.end());
    result.items.push_back(std::move(item));
    result.escalated.push_back(key);
    result.covered_sizes.push_back(covered.size());
    if (covered.size() == before) break;
  }
  result.cover = greedy_cover(result.items);
  return result;
}

// ---------------------------------------------------------------------------

std::vector<OptionFrequency> option_frequency(std::span<const Strategy> portfolio) {
  std::vector<OptionFrequency> out;
  if (portfolio.empty()) return out;
  const StrategySpace& space = portfolio.front().space();
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (const auto& s : portfolio) {
    if (&s.space() != &space && !(s.space() == space)) {
      throw ValidationError("option frequency over strategies from different spaces");
    }
    const auto active = s.active_mask();
    for (std::size_t p = 0; p < active.size(); ++p) {
      if (active[p]) ++counts[{space.params()[p].name, s.value(p)}];
    }
  }
  for (const auto& [pv, n] : counts) {
    out.push_back({pv.first, pv.second, n, static_cast<double>(n) / portfolio.size()});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.count != b.count) return a.count > b.count;
    return std::tie(a.param, a.value) < std::tie(b.param, b.value);
  });
  return out;
}

std::string render_frequency(std::span<const OptionFrequency> rows) {
  std::string out = "param,value,count,fraction\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.4f", r.fraction);
    out += csv_field(r.param) + "," + csv_field(r.value) + "," + std::to_string(r.count) + "," +
           buf + "\n";
  }
  return out;
}

std::string progress_csv(std::span<const ProgressRecord> progress) {
  std::string out = "elapsed_s,new,total\n";
  for (const auto& r : progress) {
    out += format_limit(round_ms(r.elapsed_s)) + "," + std::to_string(r.new_solved) + "," +
           std::to_string(r.total) + "\n";
  }
  return out;
}

json run_accounting(const CampaignState& state) {
  std::set<std::string> initial_solved;
  std::vector<CoverItem> items;
  std::size_t single_best = 0;
  std::size_t initial_count = 0;
  for (const auto& e : state.portfolio) {
    const std::string key = e.strategy.canonical_key();
    if (!state.matrix.has_strategy(key)) continue;
    auto solved = solved_set(state.matrix, key);
    if (e.provenance.invented) {
      single_best = std::max(single_best, solved.size());
    } else {
      ++initial_count;
      initial_solved.insert(solved.begin(), solved.end());
    }
    items.push_back(CoverItem{ItemLabel{state.matrix.variant(), state.matrix.limit_s(), key},
                              std::move(solved), e.strategy.display_name()});
  }
  const std::size_t final_solved = union_of(items).size();
  return {{"solved",
           {{"initial", initial_solved.size()},
            {"final", final_solved},
            {"new", final_solved - initial_solved.size()}}},
          {"single_best", single_best},
          {"strategies",
           {{"initial", initial_count},
            {"new", state.invented_count()},
            {"needed", greedy_cover(items).size()}}},
          {"specializations",
           {{"total", state.specializations_total}, {"failed", state.specializations_failed}}}};
}

// ---------------------------------------------------------------------------

SelectionMode selection_mode_from_string(const std::string& s) {
  if (s == "all") return SelectionMode::all;
  if (s == "cover") return SelectionMode::cover;
  if (s == "solo") return SelectionMode::solo;
  throw ValidationError("unknown selection mode '" + s + "' (expected all, cover or solo)");
}

std::vector<Strategy> select_initial(std::span<const Strategy> strategies, const EvalMatrix& matrix,
                                     SelectionMode mode, std::size_t k) {
  if (mode == SelectionMode::all) return {strategies.begin(), strategies.end()};
  std::vector<CoverItem> items;
  for (const auto& s : strategies) {
    const std::string key = s.canonical_key();
    items.push_back(CoverItem{ItemLabel{matrix.variant(), matrix.limit_s(), key},
                              solved_set(matrix, key), s.display_name()});
  }
  std::vector<Strategy> out;
  if (mode == SelectionMode::cover) {
    for (const auto& step : greedy_cover(items)) {
      if (out.size() == k) break;
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].label == step.label) out.push_back(strategies[i]);
      }
    }
    return out;
  }
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return items[a].solved.size() > items[b].solved.size();
  });
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) out.push_back(strategies[order[i]]);
  return out;
}

}  // namespace stratinv
