#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "semctx/checkpoint.hpp"
#include "semctx/commands.hpp"
#include "semctx/dataset_io.hpp"
#include "semctx/hierarchy.hpp"
#include "test_util.hpp"

using namespace semctx;
using semctx::testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Tiny end-to-end configuration: 24-pixel synthetic images, 8-pixel patches.
ExperimentConfig tiny_config(const fs::path& dir) {
  ExperimentConfig cfg = default_config();
  cfg.seed = 17;
  cfg.out_dir = dir;
  cfg.classes = dir / "classes.txt";
  cfg.train_manifest = dir / "train.tsv";
  cfg.test_manifest = dir / "test.tsv";
  cfg.synth.size = 24;
  cfg.synth.train_images = 8;
  cfg.synth.test_images = 3;
  cfg.synth.rare_fraction = 0.1;
  cfg.pixels_per_cell = 16;
  cfg.architecture = "conv3x4s1,relu,pool2,fc8,relu";
  cfg.hyper.patch_size = 8;
  cfg.hyper.batch_size = 8;
  cfg.hierarchy_mode = HierarchyMode::SceneName;
  cfg.hyper.rho = 0.85;
  cfg.schedule.sequential_iterations = {3, 3, 2, 3};
  cfg.schedule.baseline_iterations = {2, 3};
  cfg.schedule.hierarchical_iterations = {3, 3};
  cfg.eval_stride = 6;
  return cfg;
}

// Class -> histogram of pixel counts per image, for geometry comparisons.
std::vector<long> label_histogram(const LabelMap& m, int num_classes) {
  std::vector<long> h(static_cast<std::size_t>(num_classes) + 1, 0);
  for (int v : m.data()) ++h[static_cast<std::size_t>(v + 1)];
  return h;
}

}  // namespace

TEST(Config, RoundTrip) {
  TempDir dir("cfg");
  ExperimentConfig cfg = default_config();
  cfg.seed = 99;
  cfg.hierarchy_mode = HierarchyMode::SceneName;
  cfg.hyper.rho = 0.7;
  cfg.hyper.roi_size.reset();
  cfg.augment.n_copies = 3;
  cfg.schedule.strategy = Strategy::Hierarchical;
  cfg.schedule.include_step3 = false;
  cfg.schedule.sequential_iterations = {1, 2, 3};
  cfg.synth.noise = 0.125;
  cfg.out_dir = dir.path() / "out";
  save_config(dir.path() / "run.ini", cfg);
  const auto back = load_config(dir.path() / "run.ini", false);
  EXPECT_EQ(back, cfg) << config_to_string(back);
}

TEST(Config, RelativePathsResolveAgainstConfigDir) {
  TempDir dir("cfgrel");
  spit(dir.path() / "run.ini", "[data]\nclasses = c.txt\n[run]\nseed = 1\nout = res\n");
  const auto cfg = load_config(dir.path() / "run.ini", false);
  EXPECT_EQ(cfg.classes, dir.path() / "c.txt");
  EXPECT_EQ(cfg.out_dir, dir.path() / "res");
  EXPECT_THROW(load_config(dir.path() / "run.ini", true), DataError);
}

TEST(Config, MissingSeedRejected) {
  EXPECT_THROW(parse_config("[run]\nout = x\n", ".", false), DataError);
}

TEST(Config, UnknownKeyOrSectionRejected) {
  EXPECT_THROW(parse_config("[run]\nseed = 1\nspeed = 2\n", ".", false), DataError);
  EXPECT_THROW(parse_config("[run]\nseed = 1\n[extra]\na = 1\n", ".", false), DataError);
}

TEST(Config, BadValuesRejected) {
  EXPECT_THROW(parse_config("[run]\nseed = 1\n[hierarchy]\nrho = 1.5\n", ".", false), DataError);
  EXPECT_THROW(parse_config("[run]\nseed = 1\n[hierarchy]\nroi = 32\n", ".", false), DataError);
  EXPECT_THROW(parse_config("[run]\nseed = 1\n[schedule]\nstrategy = fancy\n", ".", false), DataError);
  EXPECT_THROW(parse_config("[run]\nseed = x\n", ".", false), DataError);
  const auto cfg = parse_config("[run]\nseed = 1\n[hierarchy]\nroi = inf\nmode = label-cluster\n", ".", false);
  EXPECT_FALSE(cfg.hyper.roi_size.has_value());
  EXPECT_EQ(cfg.hierarchy_mode, HierarchyMode::LabelMap);
}

TEST(Synthetic, RoundRobinPairsEveryClassOncePerRound) {
  for (int C : {2, 3, 4, 5, 6}) {
    std::set<std::pair<int, int>> seen;
    for (int r = 0; r < round_robin_rounds(C); ++r) {
      for (int c = 0; c < C; ++c) {
        const int p = round_robin_partner(C, r, c);
        if (p < 0) continue;
        EXPECT_NE(p, c);
        EXPECT_EQ(round_robin_partner(C, r, p), c);
        seen.insert({std::min(c, p), std::max(c, p)});
      }
    }
    EXPECT_EQ(static_cast<int>(seen.size()), C * (C - 1) / 2) << C;
  }
}

TEST(Synthetic, PlantedPairsMatchLabels) {
  SynthSpec spec;
  spec.train_images = 12;
  spec.test_images = 2;
  spec.size = 32;
  spec.seed = 4;
  const auto d = generate_synthetic(spec);
  ASSERT_EQ(d.train.size(), 12u);
  ASSERT_EQ(d.catalog.size(), spec.num_classes());
  std::map<int, std::set<int>> contexts_of;
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    const auto& info = d.train_info[i];
    const auto& img = d.train[i];
    EXPECT_EQ(img.scene_name.value(), context_scene_name(info.context));
    EXPECT_EQ(info.class_b, round_robin_partner(spec.classes, info.context, info.class_a));
    const auto h = label_histogram(img.labels, spec.num_classes());
    EXPECT_GT(h[static_cast<std::size_t>(info.class_a + 1)], 0);
    if (info.class_b >= 0) EXPECT_GT(h[static_cast<std::size_t>(info.class_b + 1)], 0);
    for (int c = 0; c < spec.classes; ++c) {
      if (c == info.class_a || c == info.class_b) continue;
      EXPECT_EQ(h[static_cast<std::size_t>(c + 1)], 0);
    }
    contexts_of[info.class_a].insert(info.context);
    if (info.class_b >= 0) contexts_of[info.class_b].insert(info.context);
  }
  for (int c = 0; c < spec.classes; ++c) EXPECT_EQ(static_cast<int>(contexts_of[c].size()), spec.contexts);
}

TEST(Synthetic, NoiselessSingleContextHasFixedGeometry) {
  SynthSpec spec;
  spec.contexts = 1;
  spec.noise = 0.0;
  spec.train_images = 6;
  spec.test_images = 0;
  spec.size = 32;
  const auto d = generate_synthetic(spec);
  // Same pairing, so same label layout up to which pair is drawn.
  std::map<std::pair<int, int>, LabelMap> by_pair;
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    const auto key = std::make_pair(d.train_info[i].class_a, d.train_info[i].class_b);
    auto [it, inserted] = by_pair.emplace(key, d.train[i].labels);
    if (!inserted) EXPECT_EQ(it->second, d.train[i].labels);
  }
  EXPECT_GE(by_pair.size(), 2u);
}

TEST(Synthetic, UnlabeledFractionMasksRows) {
  SynthSpec spec;
  spec.unlabeled_fraction = 0.25;
  spec.train_images = 3;
  spec.test_images = 0;
  spec.size = 32;
  for (const auto& img : generate_synthetic(spec).train) {
    long unl = 0;
    for (int v : img.labels.data()) unl += v == kUnlabeled;
    EXPECT_EQ(unl, 8 * 32);
  }
}

TEST(Synthetic, DeterministicAndValidated) {
  SynthSpec spec;
  spec.train_images = 4;
  spec.test_images = 1;
  spec.size = 24;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train[i].pixels, b.train[i].pixels);
    EXPECT_EQ(a.train[i].labels, b.train[i].labels);
  }
  spec.contexts = 9;
  EXPECT_THROW(generate_synthetic(spec), std::invalid_argument);
}

TEST(Pipeline, SceneHierarchyRecoversPlantedContexts) {
  TempDir dir("scene");
  auto cfg = tiny_config(dir.path());
  cfg.synth.train_images = 12;
  cmd_generate_synthetic(cfg);
  const auto res = cmd_build_hierarchy(cfg);
  EXPECT_TRUE(fs::exists(cfg.hierarchy_file()));
  EXPECT_TRUE(fs::exists(cfg.samples_file()));
  EXPECT_TRUE(fs::exists(dir.path() / "subclass_frequency.csv"));
  for (int c : res.partition.common) {
    EXPECT_EQ(static_cast<int>(res.hierarchy.subclasses_of(c).size()), cfg.synth.contexts) << c;
  }
  for (int c : res.partition.rare) EXPECT_EQ(res.hierarchy.subclasses_of(c).size(), 1u);
  const auto loaded = read_hierarchy(cfg.hierarchy_file());
  EXPECT_EQ(loaded, res.hierarchy);
}

TEST(Pipeline, SceneModeNeedsSceneNames) {
  TempDir dir("noscene");
  auto cfg = tiny_config(dir.path());
  cmd_generate_synthetic(cfg);
  auto entries = read_manifest(cfg.train_manifest);
  for (auto& e : entries) e.scene_name.reset();
  write_manifest(cfg.train_manifest, entries);
  EXPECT_THROW(cmd_build_hierarchy(cfg), DataError);
  cfg.hierarchy_mode = HierarchyMode::LabelMap;
  cfg.hyper.roi_size = 7;
  EXPECT_NO_THROW(cmd_build_hierarchy(cfg));
}

TEST(Pipeline, TrainEvalIsDeterministic) {
  TempDir a("runa"), b("runb");
  for (const auto* d : {&a, &b}) {
    auto cfg = tiny_config(d->path());
    cmd_generate_synthetic(cfg);
    cmd_build_hierarchy(cfg);
    cmd_train(cfg);
    cmd_eval(cfg, cfg.checkpoint_file());
  }
  for (const char* f : {"model.ckpt", "schedule_report.csv", "metrics.csv", "confusion.csv", "per_class.csv",
                        "hierarchy.json", "samples.tsv"}) {
    ASSERT_TRUE(fs::exists(a.path() / f)) << f;
    EXPECT_EQ(slurp(a.path() / f), slurp(b.path() / f)) << f;
  }
  EXPECT_TRUE(fs::exists(a.path() / "predictions"));
}

TEST(Pipeline, EvalWithCompareWritesDeltas) {
  TempDir dir("cmp");
  auto cfg = tiny_config(dir.path());
  cmd_generate_synthetic(cfg);
  cfg.schedule.strategy = Strategy::Baseline;
  cmd_train(cfg);
  fs::copy_file(cfg.checkpoint_file(), dir.path() / "baseline.ckpt");
  cmd_build_hierarchy(cfg);
  cfg.schedule.strategy = Strategy::Hierarchical;
  cmd_train(cfg);
  cmd_eval(cfg, cfg.checkpoint_file(), dir.path() / "baseline.ckpt");
  const auto text = slurp(dir.path() / "delta.csv");
  EXPECT_EQ(text.rfind("class_id,class,delta\n", 0), 0u);
}

TEST(Pipeline, InfillFillsSparseImages) {
  TempDir dir("infill");
  auto cfg = tiny_config(dir.path() / "data");
  cfg.synth.unlabeled_fraction = 0.25;
  cmd_generate_synthetic(cfg);
  cfg.schedule.strategy = Strategy::Baseline;
  cmd_train(cfg);
  const auto before = load_images(cfg.train_manifest);
  auto out_cfg = cfg;
  out_cfg.out_dir = dir.path() / "filled";
  const auto manifest = cmd_infill(out_cfg, cfg.checkpoint_file());
  const auto after = load_images(manifest);
  ASSERT_EQ(after.size(), before.size());
  for (std::size_t i = 0; i < after.size(); ++i) {
    EXPECT_DOUBLE_EQ(labeled_fraction(after[i].labels), 1.0);
    for (std::size_t k = 0; k < after[i].labels.size(); ++k) {
      if (before[i].labels.data()[k] != kUnlabeled) EXPECT_EQ(after[i].labels.data()[k], before[i].labels.data()[k]);
    }
  }
  // Above the threshold nothing changes.
  out_cfg.infill_threshold = 0.5;
  out_cfg.out_dir = dir.path() / "kept";
  const auto kept = load_images(cmd_infill(out_cfg, cfg.checkpoint_file()));
  for (std::size_t i = 0; i < kept.size(); ++i) EXPECT_EQ(kept[i].labels, before[i].labels);
}

TEST(Pipeline, FreshHeadEvaluatesNearChance) {
  TempDir dir("chance");
  auto cfg = tiny_config(dir.path());
  cfg.synth.rare_classes = 0;
  cfg.synth.test_images = 12;
  cmd_generate_synthetic(cfg);
  cfg.schedule.strategy = Strategy::Baseline;
  cmd_train(cfg);
  Model model = load_model(cfg.checkpoint_file());
  model.replace_head(cfg.synth.classes, LabelSpace::Class, 12345);
  save_model(dir.path() / "fresh.ckpt", model);
  const double acc = accuracy(cmd_eval(cfg, dir.path() / "fresh.ckpt")).per_pixel;
  EXPECT_NEAR(acc, 1.0 / cfg.synth.classes, 3.0 / std::sqrt(static_cast<double>(cfg.synth.test_images)));
  // A model that never trained is refused outright.
  save_model(dir.path() / "raw.ckpt", Model(cfg.architecture, 8, cfg.synth.classes, LabelSpace::Class, 1));
  EXPECT_THROW(cmd_eval(cfg, dir.path() / "raw.ckpt"), DataError);
}

#ifdef SEMCTX_CLI_PATH
TEST(Cli, ExitCodes) {
  TempDir dir("cli");
  const std::string exe = SEMCTX_CLI_PATH;
  auto run = [&](const std::string& args) {
    const int status = std::system((exe + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  EXPECT_EQ(run("gen-synth"), 1);  // --config missing
  spit(dir.path() / "bad.ini", "[run]\nout = x\n");
  EXPECT_EQ(run("--config " + (dir.path() / "bad.ini").string() + " gen-synth"), 2);
  spit(dir.path() / "ok.ini", "[run]\nseed = 3\n[synth]\ntrain_images = 2\ntest_images = 1\nsize = 16\n");
  EXPECT_EQ(run("--config " + (dir.path() / "ok.ini").string() + " --out " + (dir.path() / "d").string() + " gen-synth"), 0);
  EXPECT_TRUE(fs::exists(dir.path() / "d" / "train.tsv"));
}
#endif
