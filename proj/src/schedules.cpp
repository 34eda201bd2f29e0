#include "semctx/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "semctx/rng.hpp"

namespace semctx {
namespace {

std::vector<bool> head_only(int layer_count) {
  std::vector<bool> mask(static_cast<std::size_t>(layer_count), true);
  mask.back() = false;
  return mask;
}

std::vector<bool> all_trainable(int layer_count) { return std::vector<bool>(static_cast<std::size_t>(layer_count), false); }

void check_iters(std::span<const long> iters) {
  for (long it : iters) {
    if (it < 0) throw std::invalid_argument("stage iteration counts must be non-negative");
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::vector<Stage> sequential_schedule(int layer_count, int num_subclasses, int num_classes, bool include_step3,
                                       std::span<const long> iters) {
  check_iters(iters);
  const std::size_t expected = include_step3 ? 4 : 3;
  if (iters.size() != expected && iters.size() != 4) {
    throw std::invalid_argument("sequential schedule needs " + std::to_string(expected) + " iteration counts");
  }
  const long final_iters = iters.size() == 4 ? iters[3] : iters[2];
  std::vector<Stage> stages;
  stages.push_back({"subclass-head", LabelSpace::Subclass, head_only(layer_count),
                    {HeadActionKind::Replace, num_subclasses, std::nullopt}, false, iters[0]});
  stages.push_back({"subclass-full", LabelSpace::Subclass, all_trainable(layer_count), {}, false, iters[1]});
  if (include_step3) {
    stages.push_back({"class-head", LabelSpace::Class, head_only(layer_count),
                      {HeadActionKind::Replace, num_classes, std::nullopt}, false, iters[2]});
    stages.push_back({"class-full", LabelSpace::Class, all_trainable(layer_count), {}, false, final_iters});
  } else {
    stages.push_back({"class-full", LabelSpace::Class, all_trainable(layer_count),
                      {HeadActionKind::Replace, num_classes, std::nullopt}, false, final_iters});
  }
  return stages;
}

std::vector<Stage> hierarchical_schedule(int layer_count, const AggregationMatrix& aggregation,
                                         std::span<const long> iters) {
  check_iters(iters);
  if (iters.size() != 2) throw std::invalid_argument("hierarchical schedule needs 2 iteration counts");
  std::vector<Stage> stages;
  stages.push_back({"joint-fixed-W", LabelSpace::Subclass, all_trainable(layer_count),
                    {HeadActionKind::AddHierarchy, aggregation.num_subclasses(), aggregation}, false, iters[0]});
  stages.push_back({"joint-trainable-W", LabelSpace::Subclass, all_trainable(layer_count), {}, true, iters[1]});
  return stages;
}

std::vector<Stage> baseline_schedule(int layer_count, int num_classes, std::span<const long> iters) {
  check_iters(iters);
  if (iters.size() != 2) throw std::invalid_argument("baseline schedule needs 2 iteration counts");
  std::vector<Stage> stages;
  stages.push_back({"class-head", LabelSpace::Class, head_only(layer_count),
                    {HeadActionKind::Replace, num_classes, std::nullopt}, false, iters[0]});
  stages.push_back({"class-full", LabelSpace::Class, all_trainable(layer_count), {}, false, iters[1]});
  return stages;
}

std::vector<LossRecord> ScheduleReport::stage_records(int stage) const {
  std::vector<LossRecord> out;
  for (const auto& r : records) {
    if (r.stage == stage) out.push_back(r);
  }
  return out;
}

std::string report_csv(const ScheduleReport& report) {
  std::ostringstream os;
  os << "stage,iteration,lr,total,subclass_ce,class_ce\n";
  for (const auto& r : report.records) {
    os << r.stage_name << ',' << r.iteration << ',' << format_double(r.lr) << ',' << format_double(r.total) << ','
       << format_double(r.subclass_ce) << ',' << format_double(r.class_ce) << '\n';
  }
  return os.str();
}

void write_report_csv(const std::filesystem::path& path, const ScheduleReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << report_csv(report);
}

std::uint64_t stage_head_seed(std::uint64_t seed, int stage_index) {
  return derive_seed(seed, "stage-head", static_cast<std::uint64_t>(stage_index));
}

ScheduleReport run_schedule(Model& model, const std::vector<Stage>& stages, const TrainingData& data,
                            const Hyperparameters& hyper, std::uint64_t seed, const RunOptions& options) {
  for (const auto& st : stages) {
    if (st.label_space != LabelSpace::Subclass && !st.head_action.aggregation) continue;
    for (const auto& s : data.samples) {
      if (s.subclass_label == kUnassigned) {
        throw DataError("stage '" + st.name + "' needs subclass labels but a sample from '" + s.image_id +
                        "' has none");
      }
    }
  }
  if (data.samples.empty() && std::any_of(stages.begin(), stages.end(), [](const Stage& s) { return s.iterations > 0; })) {
    throw DataError("no training samples");
  }

  ScheduleReport report;
  std::vector<int> subclass_labels(static_cast<std::size_t>(hyper.batch_size));
  std::vector<int> class_labels(static_cast<std::size_t>(hyper.batch_size));
  std::vector<std::size_t> batch(static_cast<std::size_t>(hyper.batch_size));

  for (std::size_t si = 0; si < stages.size(); ++si) {
    const Stage& st = stages[si];
    const int stage_index = static_cast<int>(si);
    switch (st.head_action.kind) {
      case HeadActionKind::Keep:
        break;
      case HeadActionKind::Replace:
        model.replace_head(st.head_action.dim, st.label_space, stage_head_seed(seed, stage_index));
        break;
      case HeadActionKind::AddHierarchy: {
        const auto& w = st.head_action.aggregation.value();
        if (model.head_dim() != w.num_subclasses() || model.head_label_space() != LabelSpace::Subclass) {
          model.replace_head(w.num_subclasses(), LabelSpace::Subclass, stage_head_seed(seed, stage_index));
        }
        model.add_hierarchy_head(w);
        break;
      }
    }
    model.apply_freeze_mask(st.freeze_mask);
    if (model.has_hierarchy()) model.aggregation().trainable = st.w_trainable;
    if (options.observer) options.observer(stage_index, StagePhase::Begin, model);

    Rng rng(derive_seed(seed, "stage", static_cast<std::uint64_t>(stage_index)));
    std::vector<std::size_t> order(data.samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();
    std::vector<double> losses;
    long it = 0;
    for (; it < st.iterations; ++it) {
      for (std::size_t b = 0; b < batch.size(); ++b) {
        if (cursor == order.size()) {
          for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
          cursor = 0;
        }
        batch[b] = order[cursor++];
        const auto& s = data.samples[batch[b]];
        subclass_labels[b] = s.subclass_label;
        class_labels[b] = s.class_label;
      }
      const auto patches = gather_patches(data, batch, model.input_size());
      const double lr = learning_rate(hyper, it);
      StepLoss loss;
      try {
        loss = train_step(model, model.make_input(patches), subclass_labels, class_labels, hyper, lr);
      } catch (const NumericalError& e) {
        report.iterations_run.push_back(it);
        throw TrainingAborted("stage '" + st.name + "' iteration " + std::to_string(it) + ": " + e.what(), report);
      }
      losses.push_back(loss.total);
      if (it % options.log_interval == 0 || it + 1 == st.iterations) {
        report.records.push_back({stage_index, st.name, it, lr, loss.total, loss.subclass_ce, loss.class_ce});
      }
      if (options.early_stop && (it + 1) % 100 == 0 && it + 1 >= 200) {
        const auto end = losses.end();
        const double recent = std::accumulate(end - 100, end, 0.0) / 100.0;
        const double previous = std::accumulate(end - 200, end - 100, 0.0) / 100.0;
        if (previous - recent < 0.001 * std::abs(previous)) {
          if (report.records.empty() || report.records.back().iteration != it || report.records.back().stage != stage_index) {
            report.records.push_back({stage_index, st.name, it, lr, loss.total, loss.subclass_ce, loss.class_ce});
          }
          ++it;
          break;
        }
      }
    }
    report.iterations_run.push_back(it);
    if (options.observer) options.observer(stage_index, StagePhase::End, model);
  }
  return report;
}

}  // namespace semctx
