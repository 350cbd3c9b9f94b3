#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "tidyplan/dataset.hpp"

namespace tidy {
namespace {

const Template& dining() { return testing::library_template("dining-01-fork-plate-knife"); }

TEST(TidinessLabel, ExactForSmallDenominators) {
  for (int T : {2, 3, 5, 9}) {
    for (int t = 1; t <= T; ++t) {
      EXPECT_EQ(tidiness_label(t, T), static_cast<double>(t - 1) / static_cast<double>(T - 1));
    }
  }
  EXPECT_EQ(tidiness_label(2, 5), 0.25);
  EXPECT_EQ(tidiness_label(5, 5), 1.0);
}

TEST(GenerateTrajectory, LabelsForT5AndT2) {
  const Trajectory t5 = generate_trajectory(dining(), 5, 1);
  ASSERT_EQ(t5.steps.size(), 5u);
  const std::vector<double> expected{0.0, 0.25, 0.5, 0.75, 1.0};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(t5.steps[i].label, expected[i]);
  const Trajectory t2 = generate_trajectory(dining(), 2, 1);
  ASSERT_EQ(t2.steps.size(), 2u);
  EXPECT_EQ(t2.steps[0].label, 0.0);
  EXPECT_EQ(t2.steps[1].label, 1.0);
  EXPECT_THROW(generate_trajectory(dining(), 1, 1), Error);
}

TEST(GenerateTrajectory, StructuralInvariants) {
  for (const auto& tmpl : testing::library()) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Trajectory traj = generate_trajectory(tmpl, 5, seed);
      ASSERT_EQ(traj.steps.size(), 5u);
      // Final step satisfies; every earlier step does not (unique label-1 state).
      EXPECT_TRUE(satisfies_template(traj.steps.back().scene, tmpl, traj.binding).satisfied);
      for (std::size_t t = 0; t + 1 < traj.steps.size(); ++t) {
        EXPECT_FALSE(satisfies_template(traj.steps[t].scene, tmpl, traj.binding).satisfied);
      }
      for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        EXPECT_TRUE(is_valid(traj.steps[t].scene)) << tmpl.id << " seed " << seed;
        if (t + 1 < traj.steps.size()) {
          int moved = 0;
          for (std::size_t i = 0; i < traj.steps[t].scene.objects.size(); ++i) {
            moved += traj.steps[t].scene.objects[i].pose != traj.steps[t + 1].scene.objects[i].pose;
          }
          EXPECT_EQ(moved, 1);
          EXPECT_LT(traj.steps[t].label, traj.steps[t + 1].label);
        }
      }
    }
  }
}

TEST(GenerateTrajectory, Deterministic) {
  const Trajectory a = generate_trajectory(dining(), 5, 42);
  const Trajectory b = generate_trajectory(dining(), 5, 42);
  for (std::size_t i = 0; i < a.steps.size(); ++i) EXPECT_EQ(a.steps[i].scene, b.steps[i].scene);
}

TEST(RLTransitions, RewardsAndActions) {
  const Trajectory t5 = generate_trajectory(dining(), 5, 3);
  const auto tr = to_rl_transitions(t5);
  ASSERT_EQ(tr.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(tr[i].reward, i == 3 ? 1.0 : 0.0);
    EXPECT_EQ(tr[i].terminal, i == 3);
    EXPECT_EQ(tr[i].reward == 1.0, tr[i].terminal);
    // The action picks the object that moved and the cell holding its destination.
    const ObjectInstance& dest = tr[i].next_state.object(tr[i].action.object_id);
    EXPECT_NE(tr[i].state.object(tr[i].action.object_id).pose, dest.pose);
    const auto cell = tr[i].state.workspace.snap_cell(dest.center());
    EXPECT_EQ(cell.first, tr[i].action.x_idx);
    EXPECT_EQ(cell.second, tr[i].action.y_idx);
    EXPECT_TRUE(action_in_bounds(tr[i].state.workspace, tr[i].action));
  }
  const auto one = to_rl_transitions(generate_trajectory(dining(), 2, 3));
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].reward, 1.0);
}

TEST(RLTransitions, MalformedTrajectory) {
  Trajectory t = generate_trajectory(dining(), 3, 5);
  // Move a second object in the middle step.
  auto& objs = t.steps[1].scene.objects;
  for (auto& o : objs) {
    if (o.pose == t.steps[0].scene.object(o.id).pose) {
      o.pose.x += 0.01;
      break;
    }
  }
  try {
    to_rl_transitions(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "malformed trajectory");
  }
}

TEST(SplitTemplates, DisjointDeterministicAndPerEnvironment) {
  const auto& lib = testing::library();
  const TemplateSplit a = split_templates(lib, 0);
  const TemplateSplit b = split_templates(lib, 0);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  std::set<std::string> tr(a.train.begin(), a.train.end());
  for (const auto& v : a.validation) EXPECT_FALSE(tr.contains(v));
  EXPECT_EQ(a.train.size() + a.validation.size(), lib.size());
  for (const auto env : kTemplateEnvironments) {
    int in_train = 0, in_val = 0;
    for (const auto& t : lib) {
      if (t.environment != env) continue;
      (a.is_train(t.id) ? in_train : in_val) += 1;
    }
    EXPECT_GE(in_train, 1);
    EXPECT_GE(in_val, 1);
  }
  // A different seed produces some different split.
  bool differs = false;
  for (std::uint64_t s = 1; s < 10 && !differs; ++s) differs = split_templates(lib, s).train != a.train;
  EXPECT_TRUE(differs);
}

TEST(SplitTemplates, TooFewTemplates) {
  std::vector<Template> lib{dining()};
  try {
    split_templates(lib, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "cannot split");
  }
}

class BuildDatasetTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    DatasetConfig cfg;
    cfg.trajectories_per_template = 50;
    cfg.T = 5;
    cfg.seed = 0;
    ds_ = new Dataset(build_dataset(testing::library(), cfg));
  }
  static void TearDownTestSuite() {
    delete ds_;
    ds_ = nullptr;
  }
  static Dataset* ds_;
};

Dataset* BuildDatasetTest::ds_ = nullptr;

TEST_F(BuildDatasetTest, Counts) {
  EXPECT_EQ(ds_->disc.size(), 24u * 50u * 5u);
  EXPECT_EQ(ds_->rl.size(), 24u * 50u * 4u);
  EXPECT_EQ(ds_->report.at("Total").data, 6000u);
  EXPECT_EQ(ds_->report.at("Total").trajectories, 1200u);
  EXPECT_EQ(ds_->report.at("Total").templates, 24u);
}

TEST_F(BuildDatasetTest, LabelMultisetIsUniform) {
  std::map<double, int> counts;
  for (const auto& r : ds_->disc) counts[r.label] += 1;
  ASSERT_EQ(counts.size(), 5u);
  for (const auto& [label, n] : counts) EXPECT_EQ(n, 1200) << label;
}

TEST_F(BuildDatasetTest, SplitTagsFollowTemplates) {
  std::map<std::string, Split> seen;
  for (const auto& r : ds_->disc) {
    const auto [it, inserted] = seen.emplace(r.template_id, r.split);
    EXPECT_EQ(it->second, r.split);
    EXPECT_EQ(r.split == Split::train, ds_->split.is_train(r.template_id));
  }
  for (const auto& r : ds_->rl) EXPECT_EQ(r.split, seen.at(r.template_id));
}

TEST_F(BuildDatasetTest, AllScenesValid) {
  for (const auto& r : ds_->disc) ASSERT_TRUE(is_valid(r.scene));
  for (const auto& r : ds_->rl) {
    ASSERT_TRUE(is_valid(r.transition.state));
    ASSERT_TRUE(is_valid(r.transition.next_state));
  }
}

TEST_F(BuildDatasetTest, FilesRoundTrip) {
  testing::TempDir dir("ds");
  write_dataset(*ds_, dir.path());
  const auto disc = load_disc_records(dir.path() / "disc.jsonl");
  const auto rl = load_rl_records(dir.path() / "rl.jsonl");
  ASSERT_EQ(disc.size(), ds_->disc.size());
  ASSERT_EQ(rl.size(), ds_->rl.size());
  for (std::size_t i = 0; i < disc.size(); i += 97) {
    EXPECT_EQ(disc[i].scene, ds_->disc[i].scene);
    EXPECT_EQ(disc[i].label, ds_->disc[i].label);
    EXPECT_EQ(disc[i].split, ds_->disc[i].split);
  }
  for (std::size_t i = 0; i < rl.size(); i += 97) {
    EXPECT_EQ(rl[i].transition.action, ds_->rl[i].transition.action);
    EXPECT_EQ(rl[i].transition.terminal, ds_->rl[i].transition.terminal);
  }
  const auto stats = compute_stats(disc, 5);
  EXPECT_EQ(stats.at("Total").data, 6000u);
  const std::string table = format_stats_table(stats);
  EXPECT_NE(table.find("Environment"), std::string::npos);
  EXPECT_NE(table.find("Total"), std::string::npos);
}

TEST(BuildDataset, SameSeedSameRecords) {
  DatasetConfig cfg;
  cfg.trajectories_per_template = 3;
  const Dataset a = build_dataset(testing::library(), cfg);
  const Dataset b = build_dataset(testing::library(), cfg);
  ASSERT_EQ(a.disc.size(), b.disc.size());
  for (std::size_t i = 0; i < a.disc.size(); ++i) {
    EXPECT_EQ(to_json(a.disc[i]).dump(), to_json(b.disc[i]).dump());
  }
  EXPECT_EQ(a.split.train, b.split.train);
}

}  // namespace
}  // namespace tidy
