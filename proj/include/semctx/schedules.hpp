#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semctx/hierarchy.hpp"
#include "semctx/model.hpp"
#include "semctx/training.hpp"

namespace semctx {

enum class HeadActionKind { Keep, Replace, AddHierarchy };

struct HeadAction {
  HeadActionKind kind = HeadActionKind::Keep;
  /// Output size for Replace.
  int dim = 0;
  /// Aggregation layer for AddHierarchy; the head is first replaced when it
  /// does not already output one logit per subclass.
  std::optional<AggregationMatrix> aggregation;
};

struct Stage {
  std::string name;
  LabelSpace label_space = LabelSpace::Class;
  /// true = frozen; one entry per model layer (backbone + head).
  std::vector<bool> freeze_mask;
  HeadAction head_action;
  bool w_trainable = false;
  long iterations = 0;
};

/// Subclass head-only, subclass full, [class head-only], class full. The class
/// head is replaced at the first class stage. `iters` has one entry per stage
/// (3 or 4); with 4 entries and no step 3, the third is ignored.
std::vector<Stage> sequential_schedule(int layer_count, int num_subclasses, int num_classes, bool include_step3,
                                       std::span<const long> iters);

/// Joint subclass/class training with W fixed, then with W trainable.
std::vector<Stage> hierarchical_schedule(int layer_count, const AggregationMatrix& aggregation,
                                         std::span<const long> iters);

/// Class labels only: class head-only, then class full.
std::vector<Stage> baseline_schedule(int layer_count, int num_classes, std::span<const long> iters);

struct LossRecord {
  int stage = 0;
  std::string stage_name;
  long iteration = 0;
  double lr = 0.0;
  double total = 0.0;
  double subclass_ce = 0.0;
  double class_ce = 0.0;
};

struct ScheduleReport {
  std::vector<LossRecord> records;
  /// Iterations actually run per stage (early stop may cut a stage short).
  std::vector<long> iterations_run;

  std::vector<LossRecord> stage_records(int stage) const;
};

/// Columns: stage, iteration, lr, total, subclass_ce, class_ce. A CE column is
/// empty when the stage did not optimize that label space.
void write_report_csv(const std::filesystem::path& path, const ScheduleReport& report);
std::string report_csv(const ScheduleReport& report);

enum class StagePhase { Begin, End };

struct RunOptions {
  long log_interval = 10;
  /// Stop a stage once the 100-iteration moving-average loss improves by less than 0.1%.
  bool early_stop = false;
  /// Called after a stage's head action and flags are applied (Begin) and after its last iteration (End).
  std::function<void(int stage, StagePhase phase, const Model& model)> observer;
};

class TrainingAborted : public NumericalError {
 public:
  TrainingAborted(const std::string& what, ScheduleReport partial)
      : NumericalError(what), partial_(std::move(partial)) {}
  const ScheduleReport& partial() const { return partial_; }

 private:
  ScheduleReport partial_;
};

/// Executes stages in order. Each stage applies its head action, freeze mask
/// and W flag, then runs SGD on batches drawn from a shuffle seeded by
/// (seed, stage index). Throws TrainingAborted on a non-finite loss.
ScheduleReport run_schedule(Model& model, const std::vector<Stage>& stages, const TrainingData& data,
                            const Hyperparameters& hyper, std::uint64_t seed, const RunOptions& options = {});

/// Seed for the head initialized by stage `stage_index`.
std::uint64_t stage_head_seed(std::uint64_t seed, int stage_index);

}  // namespace semctx
