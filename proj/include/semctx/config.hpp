#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semctx/augmentation.hpp"
#include "semctx/data_model.hpp"
#include "semctx/synthetic.hpp"

namespace semctx {

enum class HierarchyMode { LabelMap, SceneName, Identity };
enum class Strategy { Baseline, Sequential, Hierarchical };

std::string hierarchy_mode_name(HierarchyMode m);
HierarchyMode parse_hierarchy_mode(const std::string& s);
std::string strategy_name(Strategy s);
Strategy parse_strategy(const std::string& s);

struct ScheduleSettings {
  Strategy strategy = Strategy::Sequential;
  bool include_step3 = true;
  std::vector<long> sequential_iterations{2000, 2000, 500, 2000};
  std::vector<long> hierarchical_iterations{2000, 2000};
  std::vector<long> baseline_iterations{2500, 4000};
  long log_interval = 10;
  bool early_stop = false;

  friend bool operator==(const ScheduleSettings&, const ScheduleSettings&) = default;
};

/// Everything a command needs. Relative paths in the file resolve against the
/// config file's directory.
struct ExperimentConfig {
  std::filesystem::path classes;
  std::filesystem::path train_manifest;
  std::filesystem::path test_manifest;
  std::filesystem::path out_dir = ".";
  std::uint64_t seed = 0;

  HierarchyMode hierarchy_mode = HierarchyMode::LabelMap;
  /// Target pixels per sampling cell (grid stride is its square root).
  int pixels_per_cell = 64;
  double infill_threshold = 0.9;

  Hyperparameters hyper;
  AugmentationConfig augment;
  std::string architecture;
  ScheduleSettings schedule;
  int eval_stride = 4;
  SynthSpec synth;

  std::filesystem::path hierarchy_file() const { return out_dir / "hierarchy.json"; }
  std::filesystem::path samples_file() const { return out_dir / "samples.tsv"; }
  std::filesystem::path checkpoint_file() const { return out_dir / "model.ckpt"; }

  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Defaults sized for desk-scale runs (64-pixel patches, no augmentation copies).
ExperimentConfig default_config();

/// Parses INI text. Throws DataError on a missing seed, unknown keys or bad
/// values; with `check_paths`, also when a referenced dataset file is missing.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir, bool check_paths);
ExperimentConfig load_config(const std::filesystem::path& path, bool check_paths = true);
std::string config_to_string(const ExperimentConfig& cfg);
void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg);

}  // namespace semctx
