#include "stratinv/invention.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "stratinv/error.hpp"
#include "support/niche.hpp"
#include "support/space_oracle.hpp"

namespace stratinv {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "stratinv_invention_test";
  fs::create_directories(dir);
  fs::remove_all(dir / name);
  return dir / name;
}

std::set<std::string> final_solved(const CampaignState& s) { return solved_union(s.matrix); }

// State over the toy space whose partition sizes are given per strategy index.
CampaignState state_with_sizes(const std::vector<std::size_t>& sizes) {
  auto space = load_space(testing::toy_space_document());
  std::vector<Strategy> ss{Strategy::defaults(space)};
  for (const char* b : {"1", "2", "3"}) {
    ss.push_back(Strategy::from_json(space, json{{"assignment", {{"a", "on"}, {"b", b}}}}));
  }
  CampaignState st;
  st.matrix = EvalMatrix(30, "fof");
  int problem = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    st.portfolio.push_back({ss[i], {}});
    st.matrix.register_strategy(ss[i]);
    for (std::size_t k = 0; k < sizes[i]; ++k) {
      st.matrix.set(EvalOutcome{"p" + std::to_string(problem++), ss[i].canonical_key(), "fof", 30,
                                Verdict::solved, 1.0, "test"});
    }
  }
  return st;
}

TEST(SelectTarget, LargestWinSet) {
  auto st = state_with_sizes({10, 7});
  EXPECT_EQ(select_target(st), st.portfolio[0].strategy.canonical_key());
}

TEST(SelectTarget, SpecializedAreExcluded) {
  auto st = state_with_sizes({10, 7});
  st.specialized.insert(st.portfolio[0].strategy.canonical_key());
  EXPECT_EQ(select_target(st), st.portfolio[1].strategy.canonical_key());
}

TEST(SelectTarget, NoneWhenAllSpecializedOrEmpty) {
  auto st = state_with_sizes({10, 7});
  for (const auto& e : st.portfolio) st.specialized.insert(e.strategy.canonical_key());
  EXPECT_FALSE(select_target(st));
  EXPECT_FALSE(select_target(state_with_sizes({0, 0})));
}

TEST(SelectTarget, TiesBySmallestKey) {
  auto st = state_with_sizes({4, 4, 4});
  std::string smallest = st.portfolio[0].strategy.canonical_key();
  for (const auto& e : st.portfolio) smallest = std::min(smallest, e.strategy.canonical_key());
  EXPECT_EQ(select_target(st), smallest);
}

TEST(CampaignConfig, Validation) {
  auto c = testing::niche_config();
  c.tuner.t_limit_s = 0;
  c.validate();
  EXPECT_DOUBLE_EQ(c.tuner.t_limit_s, 30);
  EXPECT_EQ(c.tuner.variant, "fof");
  c.tuner.t_limit_s = 61;
  EXPECT_THROW(c.validate(), ValidationError);
  c = testing::niche_config();
  c.wall_budget_s = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = testing::niche_config();
  c.initial_strategies.push_back(c.initial_strategies[0]);
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Invent, EmptyBenchmarkChangesNothing) {
  auto c = testing::niche_config();
  c.problems.clear();
  SyntheticSolver solver(testing::niche_landscape(), 4);
  auto st = invent(c, solver);
  ASSERT_EQ(st.portfolio.size(), 2u);
  EXPECT_EQ(st.portfolio[0].strategy, c.initial_strategies[0]);
  EXPECT_EQ(st.specializations_total, 0u);
  EXPECT_EQ(solver.invocations(), 0u);
}

TEST(Invent, ZeroBudgetTunerFailsEverySpecialization) {
  auto c = testing::niche_config();
  c.tuner.eval_budget = 0;
  SyntheticSolver solver(testing::niche_landscape(), 4);
  auto st = invent(c, solver);
  EXPECT_GT(st.specializations_total, 0u);
  EXPECT_EQ(st.specializations_failed, st.specializations_total);
  EXPECT_EQ(st.portfolio.size(), 2u);
}

void expect_campaign_invariants(const CampaignState& st) {
  EXPECT_LE(st.specializations_failed, st.specializations_total);
  EXPECT_EQ(st.specializations_total - st.specializations_failed, st.invented_count());
  EXPECT_EQ(st.specializations.size(), st.specializations_total);

  std::set<std::string> keys;
  for (const auto& e : st.portfolio) EXPECT_TRUE(keys.insert(e.strategy.canonical_key()).second);

  std::set<std::string> targets;
  for (const auto& r : st.specializations) EXPECT_TRUE(targets.insert(r.target_key).second);
  EXPECT_EQ(targets, st.specialized);

  std::size_t last = 0;
  for (const auto& r : st.progress) {
    EXPECT_GE(r.total, last);
    last = r.total;
  }
  EXPECT_EQ(last, final_solved(st).size());

  // Each invented strategy names a parent specialized before it was added.
  for (const auto& e : st.portfolio) {
    if (!e.provenance.invented) continue;
    auto it = std::find_if(st.specializations.begin(), st.specializations.end(), [&](const auto& r) {
      return r.result_key == e.strategy.canonical_key() && !r.failed;
    });
    ASSERT_NE(it, st.specializations.end());
    EXPECT_EQ(it->target_key, e.provenance.parent_key);
    EXPECT_LE(it->finished_s, e.provenance.elapsed_s);
  }
}

TEST(Invent, NicheBenchmarkIsCovered) {
  auto c = testing::niche_config(7);
  SyntheticSolver solver(testing::niche_landscape(), 4);
  auto st = invent(c, solver);
  expect_campaign_invariants(st);
  EXPECT_GE(st.invented_count(), 2u);
  EXPECT_EQ(final_solved(st).size(), testing::niche_solvable(60));
  EXPECT_EQ(st.portfolio[2].strategy.label(), "inv1");
}

TEST(Invent, TinyWallBudgetOvershootsByAtMostOneSpecialization) {
  for (double budget : {1.0, 500.0, 3000.0}) {
    auto c = testing::niche_config(3);
    c.wall_budget_s = budget;
    SyntheticSolver solver(testing::niche_landscape(), 4);
    auto st = invent(c, solver);
    expect_campaign_invariants(st);
    if (st.specializations.empty()) continue;
    for (const auto& r : st.specializations) EXPECT_LT(r.started_s, budget);
    // After the last tuner call at most one strategy is evaluated.
    const double one_evaluation = 200 * 60 / 4.0;
    EXPECT_LE(st.elapsed_s - st.specializations.back().finished_s, one_evaluation);
  }
}

TEST(Checkpoint, RoundTripAndFiles) {
  auto c = testing::niche_config(5);
  const auto dir = scratch("roundtrip");
  fs::create_directories(dir);
  CampaignOptions opts;
  opts.checkpoint_path = dir / "state.json";
  opts.progress_path = dir / "progress.jsonl";
  SyntheticSolver solver(testing::niche_landscape(), 4);
  auto st = invent(c, solver, opts);
  auto back = load_checkpoint(*opts.checkpoint_path, c.space);
  EXPECT_EQ(back, st);
  EXPECT_EQ(checkpoint_to_json(back, *c.space), checkpoint_to_json(st, *c.space));
  auto lines = read_json_lines(*opts.progress_path);
  ASSERT_EQ(lines.size(), st.progress.size());
  EXPECT_EQ(lines[0]["event"], "initial");
  EXPECT_TRUE(lines[0].contains("elapsed_s"));
}

TEST(Checkpoint, ResumeWithNoBudgetLeftIsANoOp) {
  auto c = testing::niche_config(5);
  c.max_specializations = 1;
  SyntheticSolver solver(testing::niche_landscape(), 4);
  auto st = invent(c, solver);
  auto snapshot = checkpoint_from_json(checkpoint_to_json(st, *c.space), c.space);
  SyntheticSolver again(testing::niche_landscape(), 4);
  run_campaign(c, snapshot, again);
  EXPECT_EQ(snapshot, st);
  EXPECT_EQ(again.invocations(), 0u);
}

TEST(Checkpoint, InterruptedCampaignResumesToSameResult) {
  auto c = testing::niche_config(11);
  SyntheticSolver full_solver(testing::niche_landscape(), 4);
  auto full = invent(c, full_solver);

  const auto dir = scratch("resume");
  fs::create_directories(dir);
  CampaignOptions opts;
  opts.checkpoint_path = dir / "state.json";
  auto partial_cfg = c;
  partial_cfg.max_specializations = 1;
  SyntheticSolver s1(testing::niche_landscape(), 4);
  auto partial = invent(partial_cfg, s1, opts);
  ASSERT_EQ(partial.specializations_total, 1u);

  auto resumed = load_checkpoint(*opts.checkpoint_path, c.space);
  SyntheticSolver s2(testing::niche_landscape(), 4);
  auto cfg = c;
  cfg.validate();
  run_campaign(cfg, resumed, s2, opts);
  EXPECT_EQ(final_solved(resumed), final_solved(full));
  EXPECT_EQ(resumed.specializations_total, full.specializations_total);
  EXPECT_EQ(resumed.strategies(), full.strategies());
}

TEST(Checkpoint, BadSnapshotsAreRejected) {
  auto c = testing::niche_config();
  SyntheticSolver solver(testing::niche_landscape(), 4);
  auto cc = c;
  cc.max_specializations = 0;
  auto st = invent(cc, solver);
  auto doc = checkpoint_to_json(st, *c.space);

  auto wrong_version = doc;
  wrong_version["schema_version"] = 99;
  EXPECT_THROW(checkpoint_from_json(wrong_version, c.space), CheckpointError);

  auto misaligned = doc;
  misaligned["matrix"]["rows"][0]["verdicts"] = "s";
  EXPECT_THROW(checkpoint_from_json(misaligned, c.space), CheckpointError);

  auto missing = doc;
  missing.erase("counters");
  EXPECT_THROW(checkpoint_from_json(missing, c.space), CheckpointError);

  EXPECT_THROW(checkpoint_from_json(doc, load_space(testing::toy_space_document())),
               CheckpointError);

  const auto path = scratch("corrupt.json");
  std::ofstream(path) << "{ not json";
  EXPECT_THROW(load_checkpoint(path, c.space), CheckpointError);
}

// Fails once it has served `budget` runs.
class FlakySolver : public SyntheticSolver {
 public:
  FlakySolver(Landscape l, std::size_t budget) : SyntheticSolver(std::move(l), 4), budget_(budget) {}
  std::vector<EvalOutcome> run(std::span<const Request> requests) override {
    if (invocations() + requests.size() > budget_) throw OrchestrationError("runner lost");
    return SyntheticSolver::run(requests);
  }

 private:
  std::size_t budget_;
};

TEST(Checkpoint, OrchestrationFailureLeavesResumableCheckpoint) {
  auto c = testing::niche_config(13);
  const auto dir = scratch("flaky");
  fs::create_directories(dir);
  CampaignOptions opts;
  opts.checkpoint_path = dir / "state.json";
  FlakySolver flaky(testing::niche_landscape(), 3000);
  EXPECT_THROW(invent(c, flaky, opts), OrchestrationError);

  auto resumed = load_checkpoint(*opts.checkpoint_path, c.space);
  EXPECT_GE(resumed.portfolio.size(), 2u);
  SyntheticSolver solver(testing::niche_landscape(), 4);
  c.validate();
  run_campaign(c, resumed, solver);
  expect_campaign_invariants(resumed);
  EXPECT_EQ(final_solved(resumed).size(), testing::niche_solvable(60));
}

}  // namespace
}  // namespace stratinv
