#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "semctx/config.hpp"
#include "semctx/evaluation.hpp"
#include "semctx/hierarchy.hpp"
#include "semctx/schedules.hpp"
#include "semctx/synthetic.hpp"

namespace semctx {

/// Training images after augmentation and their grid samples, class labels only.
struct PreparedTraining {
  Dataset dataset;
  std::vector<LabeledImage> images;
  std::vector<TrainingSample> samples;
};

/// Loads the training split, expands it with augmented copies and samples patch centers.
PreparedTraining prepare_training(const ExperimentConfig& cfg);

/// Writes the synthetic dataset described by cfg.synth into cfg.out_dir.
SynthDataset cmd_generate_synthetic(const ExperimentConfig& cfg);

struct HierarchyBuildResult {
  LabelHierarchy hierarchy;
  std::vector<TrainingSample> samples;
  ClassPartition partition;
  LabelClusterReport cluster_report;
};

/// Writes hierarchy.json, subclass_frequency.csv and samples.tsv into cfg.out_dir.
HierarchyBuildResult cmd_build_hierarchy(const ExperimentConfig& cfg);

/// Reads samples.tsv; image ids are resolved against `images`.
std::vector<TrainingSample> read_samples(const std::filesystem::path& path, const std::vector<LabeledImage>& images);
void write_samples(const std::filesystem::path& path, const std::vector<TrainingSample>& samples);

/// Trains with cfg.schedule.strategy and writes model.ckpt and
/// schedule_report.csv. On a numerical abort the partial report is written
/// before the exception propagates.
ScheduleReport cmd_train(const ExperimentConfig& cfg);

/// Evaluates `checkpoint` on the test split (the training split when no test
/// manifest is configured). Writes metrics.csv, confusion.csv, per_class.csv
/// and predictions/; with `compare`, also delta.csv holding per-class accuracy
/// of `checkpoint` minus that of `compare`.
ConfusionMatrix cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                         const std::optional<std::filesystem::path>& compare = std::nullopt);

/// Copies the training split into cfg.out_dir, filling unlabeled pixels of
/// images labeled below cfg.infill_threshold with the checkpoint's predictions.
/// Returns the path of the new manifest.
std::filesystem::path cmd_infill(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint);

}  // namespace semctx
