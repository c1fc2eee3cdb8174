#include "stratinv/portfolio_report.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "stratinv/error.hpp"
#include "support/niche.hpp"
#include "support/space_oracle.hpp"

namespace stratinv {
namespace {

const std::string kFixtures = STRATINV_FIXTURES;

json flat_space_document() {
  return {{"name", "flat"},
          {"params",
           {{{"name", "x"}, {"values", {"0", "1", "2", "3"}}, {"default", "0"}},
            {{"name", "y"}, {"values", {"0", "1", "2"}}, {"default", "0"}}}}};
}

CoverItem item(const std::string& key, std::set<std::string> solved, double limit = 30) {
  return CoverItem{ItemLabel{"fof", limit, key}, std::move(solved), ""};
}

std::set<std::string> ids(std::initializer_list<int> xs) {
  std::set<std::string> out;
  for (int x : xs) out.insert(std::to_string(x));
  return out;
}

// Recomputes every gain from scratch at each step.
std::vector<std::size_t> oracle_cover(const std::vector<CoverItem>& items) {
  std::vector<std::size_t> picks;
  while (true) {
    std::set<std::string> covered;
    for (auto p : picks) covered.insert(items[p].solved.begin(), items[p].solved.end());
    std::size_t best = items.size();
    std::size_t best_gain = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (std::find(picks.begin(), picks.end(), i) != picks.end()) continue;
      std::set<std::string> fresh;
      std::set_difference(items[i].solved.begin(), items[i].solved.end(), covered.begin(),
                          covered.end(), std::inserter(fresh, fresh.end()));
      if (fresh.size() > best_gain) {
        best_gain = fresh.size();
        best = i;
      }
    }
    if (best == items.size()) return picks;
    picks.push_back(best);
  }
}

std::vector<CoverItem> random_items(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> n_items(1, 10), n_problems(1, 50);
  const std::size_t k = n_items(rng), m = n_problems(rng);
  std::uniform_real_distribution<double> density(0.0, 0.6);
  std::vector<CoverItem> items;
  for (std::size_t i = 0; i < k; ++i) {
    std::bernoulli_distribution in(density(rng));
    std::set<std::string> solved;
    for (std::size_t p = 0; p < m; ++p) {
      if (in(rng)) solved.insert("p" + std::to_string(p));
    }
    items.push_back(item("s" + std::to_string(i), std::move(solved)));
  }
  return items;
}

TEST(GreedyCover, ThreeItemExample) {
  std::vector<CoverItem> items{item("A", ids({1, 2, 3})), item("B", ids({3, 4})),
                               item("C", ids({4, 5, 6, 7}))};
  auto steps = greedy_cover(items);
  ASSERT_EQ(steps.size(), 2u);
  EXPECT_EQ(steps[0].label.strategy_key, "C");
  EXPECT_EQ(steps[0].addon, 4u);
  EXPECT_EQ(steps[0].total, 4u);
  EXPECT_FALSE(steps[0].addon_pct_centi);
  EXPECT_EQ(steps[1].label.strategy_key, "A");
  EXPECT_EQ(steps[1].addon, 3u);
  EXPECT_EQ(steps[1].total, 7u);
  EXPECT_EQ(steps[1].addon_pct_centi, 7500);
}

TEST(GreedyCover, SingleItem) {
  std::vector<CoverItem> items{item("A", ids({1, 2, 3}))};
  auto steps = greedy_cover(items);
  ASSERT_EQ(steps.size(), 1u);
  EXPECT_EQ(steps[0].addon, 3u);
  EXPECT_EQ(steps[0].alone, 3u);
  EXPECT_EQ(steps[0].total, 3u);
}

TEST(GreedyCover, EmptyAndUselessItems) {
  EXPECT_TRUE(greedy_cover(std::vector<CoverItem>{}).empty());
  std::vector<CoverItem> items{item("A", {}), item("B", {})};
  EXPECT_TRUE(greedy_cover(items).empty());
}

TEST(GreedyCover, TiesGoToEarliestItem) {
  std::vector<CoverItem> items{item("z", ids({1, 2})), item("a", ids({3, 4}))};
  auto steps = greedy_cover(items);
  ASSERT_EQ(steps.size(), 2u);
  EXPECT_EQ(steps[0].label.strategy_key, "z");
}

TEST(GreedyCover, DuplicateLabelsAreRejected) {
  std::vector<CoverItem> items{item("A", ids({1})), item("A", ids({2}))};
  EXPECT_THROW(greedy_cover(items), ValidationError);
  items[1].label.limit_s = 60;
  EXPECT_NO_THROW(greedy_cover(items));
}

TEST(GreedyCover, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  for (int instance = 0; instance < 100; ++instance) {
    auto items = random_items(rng);
    auto steps = greedy_cover(items);
    auto picks = oracle_cover(items);
    ASSERT_EQ(steps.size(), picks.size()) << "instance " << instance;
    std::set<std::string> covered;
    for (std::size_t k = 0; k < steps.size(); ++k) {
      const auto& chosen = items[picks[k]];
      EXPECT_EQ(steps[k].label, chosen.label);
      const std::size_t prev = covered.size();
      covered.insert(chosen.solved.begin(), chosen.solved.end());
      EXPECT_EQ(steps[k].addon, covered.size() - prev);
      EXPECT_EQ(steps[k].total, covered.size());
      EXPECT_EQ(steps[k].alone, chosen.solved.size());
      EXPECT_LE(steps[k].addon, steps[k].alone);
      if (k > 0) {
        EXPECT_EQ(steps[k].total, steps[k - 1].total + steps[k].addon);
        const double pct = *steps[k].addon_pct_centi / 100.0;
        EXPECT_NEAR(pct / 100.0 * prev, static_cast<double>(steps[k].addon), 0.005 * prev);
        EXPECT_LE(steps[k].addon, steps[k - 1].addon);
      }
    }
    std::set<std::string> all;
    for (const auto& i : items) all.insert(i.solved.begin(), i.solved.end());
    EXPECT_EQ(covered, all);
  }
}

TEST(Percent, RoundsHalfUp) {
  EXPECT_EQ(percent_centi(521, 3034), 1717);
  EXPECT_EQ(format_percent(1717), "17.17");
  EXPECT_EQ(percent_centi(1, 8), 1250);
  EXPECT_EQ(percent_centi(1, 80000), 0);
  EXPECT_EQ(percent_centi(1, 20000), 1);  // 0.005% rounds up
  EXPECT_EQ(format_percent(5), "0.05");
  EXPECT_EQ(format_percent(10000), "100.00");
  EXPECT_THROW(percent_centi(1, 0), DomainError);
}

std::vector<CoverStep> slice_steps() {
  auto log = read_outcome_log(kFixtures + "/slices/log.jsonl");
  auto view = view_from_outcomes(log.outcomes);
  std::set<std::string> baseline;
  std::ifstream in(kFixtures + "/slices/baseline.txt");
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) baseline.insert(line);
  }
  auto items = items_from_view(view, names_from_headers(log.headers));
  return greedy_cover(items, &baseline);
}

TEST(SliceCover, FirstTwoGreedySteps) {
  auto steps = slice_steps();
  ASSERT_EQ(steps.size(), 2u);
  EXPECT_EQ(steps[0].label.variant, "min_fof");
  EXPECT_EQ(steps[0].name, "inv1");
  EXPECT_EQ(steps[0].addon, 3034u);
  EXPECT_EQ(steps[0].total, 3034u);
  EXPECT_EQ(steps[1].label.variant, "gnn");
  EXPECT_EQ(steps[1].addon, 521u);
  EXPECT_EQ(steps[1].total, 3555u);
  EXPECT_EQ(steps[1].alone, 1024u);
  EXPECT_EQ(format_percent(*steps[1].addon_pct_centi), "17.17");
  EXPECT_EQ(steps[0].fresh, 968u);
  EXPECT_EQ(steps[1].fresh, 336u);

  const auto csv = render_csv(steps);
  EXPECT_EQ(csv,
            "version,timeout,strat,addon,addon_pct,total,alone,new\n"
            "min_fof,30,inv1,3034,-,3034,3034,968\n"
            "gnn,30,inv1,521,17.17,3555,1024,336\n");
  const auto text = render_text(steps);
  EXPECT_NE(text.find("+17.17%"), std::string::npos);
  EXPECT_NE(text.find("+521"), std::string::npos);
  EXPECT_EQ(render_text(steps), text);
}

TEST(Render, EmptyStepsGiveHeaderOnly) {
  EXPECT_EQ(render_csv({}), "version,timeout,strat,addon,addon_pct,total,alone,new\n");
  const auto text = render_text({});
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
}

TEST(Render, ThreeStepCover) {
  std::vector<CoverItem> items{item("A", ids({1, 2, 3, 4, 5})), item("B", ids({5, 6, 7})),
                               item("C", ids({1, 8}))};
  auto steps = greedy_cover(items);
  ASSERT_EQ(steps.size(), 3u);
  EXPECT_LT(steps[0].total, steps[1].total);
  EXPECT_LT(steps[1].total, steps[2].total);
  EXPECT_EQ(steps[2].total, 8u);
  EXPECT_EQ(render_csv(steps),
            "version,timeout,strat,addon,addon_pct,total,alone,new\n"
            "fof,30,A,5,-,5,5,-\n"
            "fof,30,B,2,40.00,7,3,-\n"
            "fof,30,C,1,14.29,8,2,-\n");
}

TEST(Render, QuotesFieldsWithCommas) {
  std::vector<CoverItem> items{item("--x=a,b", ids({1}))};
  EXPECT_NE(render_csv(greedy_cover(items)).find("\"--x=a,b\""), std::string::npos);
}

// ---------------------------------------------------------------------------

struct EscalationFixture {
  SpacePtr space = load_space(testing::toy_space_document());
  Strategy s1 = Strategy::from_json(space, json{{"assignment", {{"a", "on"}, {"b", "1"}}}});
  Strategy s2 = Strategy::from_json(space, json{{"assignment", {{"a", "on"}, {"b", "2"}}}});
  std::vector<Problem> problems;
  Landscape landscape;

  EscalationFixture() {
    for (int i = 1; i <= 4; ++i) problems.push_back({std::to_string(i), {}});
    auto rule = [](const char* b, double t) {
      return LandscapeRule{{{"b", {b}}}, std::nullopt, true, t};
    };
    landscape.add_rule("1", rule("1", 5));
    landscape.add_rule("2", rule("1", 10));
    landscape.add_rule("3", rule("1", 100));
    landscape.add_rule("4", rule("2", 700));
  }
};

TEST(Escalate, SlowProblemIsPickedUpThenStops) {
  EscalationFixture f;
  std::vector<CoverItem> pool{item(f.s1.canonical_key(), ids({1, 2}))};
  SyntheticSolver solver(f.landscape);
  auto r = escalate(pool, std::vector<Strategy>{f.s1}, f.problems, "fof", {600}, solver);
  ASSERT_EQ(r.escalated, std::vector<std::string>{f.s1.canonical_key()});
  ASSERT_EQ(r.items.size(), 2u);
  EXPECT_EQ(r.items[1].label.limit_s, 600);
  EXPECT_EQ(r.items[1].solved, ids({1, 2, 3}));
  EXPECT_EQ(r.covered_sizes, (std::vector<std::size_t>{2, 3}));
  ASSERT_FALSE(r.cover.empty());
  EXPECT_EQ(r.cover.back().total, 3u);
}

TEST(Escalate, StopsWhenAnEscalationAddsNothing) {
  EscalationFixture f;
  std::vector<CoverItem> pool{item(f.s1.canonical_key(), ids({1, 2})),
                              item(f.s2.canonical_key(), {})};
  SyntheticSolver solver(f.landscape);
  auto r = escalate(pool, std::vector<Strategy>{f.s1, f.s2}, f.problems, "fof", {600}, solver);
  // s1 gains 3; s2 at 600 s still misses problem 4 (needs 700 s) and adds nothing.
  EXPECT_EQ(r.escalated.size(), 2u);
  EXPECT_EQ(r.covered_sizes, (std::vector<std::size_t>{2, 3, 3}));
}

TEST(Escalate, EqualLimitsStopImmediately) {
  EscalationFixture f;
  std::vector<CoverItem> pool{item(f.s1.canonical_key(), ids({1, 2}))};
  SyntheticSolver solver(f.landscape);
  auto r = escalate(pool, std::vector<Strategy>{f.s1}, f.problems, "fof", {30}, solver);
  EXPECT_TRUE(r.escalated.empty());
  ASSERT_EQ(r.items.size(), 1u);
  EXPECT_EQ(r.items[0].solved, pool[0].solved);
  EXPECT_EQ(solver.invocations(), 0u);
}

TEST(Escalate, CapAndUnknownKeys) {
  EscalationFixture f;
  std::vector<CoverItem> pool{item("unknown", ids({9})), item(f.s1.canonical_key(), ids({1})),
                              item(f.s2.canonical_key(), {})};
  SyntheticSolver solver(f.landscape);
  EscalationConfig cfg{800, 1, false};
  auto r = escalate(pool, std::vector<Strategy>{f.s1, f.s2}, f.problems, "fof", cfg, solver);
  EXPECT_EQ(r.escalated, std::vector<std::string>{f.s1.canonical_key()});
}

TEST(Escalate, OnlyUnsolvedSkipsCoveredProblems) {
  EscalationFixture f;
  std::vector<CoverItem> pool{item(f.s1.canonical_key(), ids({1, 2}))};
  SyntheticSolver solver(f.landscape);
  auto r = escalate(pool, std::vector<Strategy>{f.s1}, f.problems, "fof", {600, SIZE_MAX, true},
                    solver);
  EXPECT_EQ(solver.invocations(), 2u);
  EXPECT_EQ(r.items[1].solved, ids({3}));
}

TEST(Escalate, CoveredSetIsMonotoneOnRandomPools) {
  auto space = load_space(flat_space_document());
  std::mt19937_64 rng(99);
  for (int round = 0; round < 20; ++round) {
    std::vector<Strategy> ss;
    std::set<std::string> keys;
    while (ss.size() < 5) {
      auto s = sample_uniform(space, rng);
      if (keys.insert(s.canonical_key()).second) ss.push_back(s);
    }
    Landscape land;
    std::vector<Problem> problems;
    std::uniform_real_distribution<double> runtime(1, 200);
    for (int p = 0; p < 30; ++p) {
      const std::string id = "p" + std::to_string(p);
      problems.push_back({id, {}});
      const auto& owner = ss[rng() % ss.size()];
      land.add_rule(id, LandscapeRule{{{"x", {owner.value(0)}}, {"y", {owner.value(1)}}},
                                      std::nullopt, true, runtime(rng)});
    }
    SyntheticSolver solver(land);
    auto pool = evaluate_portfolio(ss, problems, solver, 30, "fof");
    std::vector<CoverItem> items;
    for (const auto& s : ss) items.push_back(item(s.canonical_key(), solved_set(pool, s.canonical_key())));
    auto r = escalate(items, ss, problems, "fof", {200}, solver);
    for (std::size_t i = 1; i < r.covered_sizes.size(); ++i) {
      EXPECT_GE(r.covered_sizes[i], r.covered_sizes[i - 1]);
    }
    EXPECT_LE(r.escalated.size(), ss.size());
  }
}

// ---------------------------------------------------------------------------

TEST(OptionFrequency, InventedCvc5StrategiesAllSaturate) {
  auto space = load_space_file(kFixtures + "/cvc5/space.json");
  auto ss = load_strategies_file(space, kFixtures + "/cvc5/invented.json");
  ASSERT_EQ(ss.size(), 5u);
  auto rows = option_frequency(ss);
  auto it = std::find_if(rows.begin(), rows.end(),
                         [](const auto& r) { return r.param == "full-saturate-quant"; });
  ASSERT_NE(it, rows.end());
  EXPECT_EQ(it->value, "on");
  EXPECT_EQ(it->count, 5u);
  EXPECT_EQ(it->fraction, 1.0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_GE(rows[i - 1].fraction, rows[i].fraction);
  }
}

TEST(OptionFrequency, SingleStrategy) {
  auto space = load_space(testing::toy_space_document());
  std::vector<Strategy> ss{Strategy::from_json(space, json{{"assignment", {{"a", "on"}, {"b", "2"}}}})};
  auto rows = option_frequency(ss);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) EXPECT_EQ(r.fraction, 1.0);
}

TEST(OptionFrequency, InactiveParametersAreSkipped) {
  auto space = load_space(testing::toy_space_document());
  std::vector<Strategy> ss{Strategy::defaults(space)};
  auto rows = option_frequency(ss);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].param, "a");
}

TEST(OptionFrequency, DisagreementSplitsEvenly) {
  auto space = load_space(testing::toy_space_document());
  std::vector<Strategy> ss{Strategy::defaults(space),
                           Strategy::from_json(space, json{{"assignment", {{"a", "on"}}}})};
  auto rows = option_frequency(ss);
  std::size_t a_rows = 0;
  for (const auto& r : rows) {
    if (r.param != "a") continue;
    ++a_rows;
    EXPECT_EQ(r.fraction, 0.5);
  }
  EXPECT_EQ(a_rows, 2u);
  EXPECT_EQ(render_frequency(rows).substr(0, 27), "param,value,count,fraction\n");
}

TEST(OptionFrequency, MixedSpacesAreRejected) {
  auto toy = load_space(testing::toy_space_document());
  auto other = load_space(flat_space_document());
  std::vector<Strategy> ss{Strategy::defaults(toy), Strategy::defaults(other)};
  EXPECT_THROW(option_frequency(ss), ValidationError);
}

// ---------------------------------------------------------------------------

TEST(ProgressCsv, Columns) {
  std::vector<ProgressRecord> rs{{0.0, "initial", "k", 3, 3}, {12.3456, "invented", "j", 2, 5}};
  EXPECT_EQ(progress_csv(rs), "elapsed_s,new,total\n0,3,3\n12.346,2,5\n");
}

TEST(RunAccounting, NicheCampaign) {
  auto c = testing::niche_config(7);
  SyntheticSolver solver(testing::niche_landscape(), 4);
  auto st = invent(c, solver);
  auto acc = run_accounting(st);
  EXPECT_EQ(acc["strategies"]["initial"], 2);
  EXPECT_EQ(acc["strategies"]["new"], st.invented_count());
  EXPECT_EQ(acc["specializations"]["total"].get<std::size_t>() -
                acc["specializations"]["failed"].get<std::size_t>(),
            acc["strategies"]["new"].get<std::size_t>());
  EXPECT_EQ(acc["solved"]["final"], solved_union(st.matrix).size());
  EXPECT_EQ(acc["solved"]["final"].get<std::size_t>() - acc["solved"]["initial"].get<std::size_t>(),
            acc["solved"]["new"].get<std::size_t>());
  EXPECT_LE(acc["strategies"]["needed"].get<std::size_t>(), st.portfolio.size());
  EXPECT_GT(acc["single_best"].get<std::size_t>(), 0u);
}

TEST(SelectInitial, Modes) {
  auto space = load_space(testing::toy_space_document());
  std::vector<Strategy> ss{Strategy::defaults(space)};
  for (const char* b : {"1", "2", "3"}) {
    ss.push_back(Strategy::from_json(space, json{{"assignment", {{"a", "on"}, {"b", b}}}}));
  }
  EvalMatrix m(30, "fof");
  auto solve = [&](std::size_t s, std::initializer_list<int> ps) {
    m.register_strategy(ss[s]);
    for (int p : ps) {
      m.set(EvalOutcome{std::to_string(p), ss[s].canonical_key(), "fof", 30, Verdict::solved, 1,
                        "ok"});
    }
  };
  solve(0, {1, 2, 3});
  solve(1, {1, 2, 3, 4});
  solve(2, {5});
  solve(3, {});

  EXPECT_EQ(select_initial(ss, m, SelectionMode::all, 1).size(), 4u);
  auto solo = select_initial(ss, m, SelectionMode::solo, 2);
  ASSERT_EQ(solo.size(), 2u);
  EXPECT_EQ(solo[0], ss[1]);
  EXPECT_EQ(solo[1], ss[0]);
  auto cover = select_initial(ss, m, SelectionMode::cover, 3);
  ASSERT_EQ(cover.size(), 2u);
  EXPECT_EQ(cover[0], ss[1]);
  EXPECT_EQ(cover[1], ss[2]);
  EXPECT_EQ(selection_mode_from_string("cover"), SelectionMode::cover);
  EXPECT_THROW(selection_mode_from_string("best"), ValidationError);
}

}  // namespace
}  // namespace stratinv
