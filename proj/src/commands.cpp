#include "semctx/commands.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "semctx/augmentation.hpp"
#include "semctx/checkpoint.hpp"
#include "semctx/dataset_io.hpp"
#include "semctx/rng.hpp"
#include "semctx/training.hpp"

namespace semctx {
namespace {

namespace fs = std::filesystem;

void require(const fs::path& p, const char* what) {
  if (p.empty()) throw DataError(std::string("config does not set ") + what);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

AugmentationConfig seeded_augment(const ExperimentConfig& cfg) {
  AugmentationConfig a = cfg.augment;
  a.seed = derive_seed(cfg.seed, "augment");
  return a;
}

Model load_class_model(const fs::path& checkpoint) {
  Model model = load_model(checkpoint);
  if (!model.trained) throw DataError("checkpoint '" + checkpoint.string() + "' was never trained");
  if (!model.has_hierarchy() && model.head_label_space() != LabelSpace::Class) {
    throw DataError("checkpoint '" + checkpoint.string() + "' has a subclass head without an aggregation layer");
  }
  return model;
}

}  // namespace

PreparedTraining prepare_training(const ExperimentConfig& cfg) {
  require(cfg.classes, "[data] classes");
  require(cfg.train_manifest, "[data] train");
  Dataset ds = load_dataset(cfg.train_manifest, cfg.classes);
  auto images = expand_with_augmentation(ds.images(), seeded_augment(cfg));
  auto samples = collect_samples(images, cfg.pixels_per_cell);
  return {std::move(ds), std::move(images), std::move(samples)};
}

SynthDataset cmd_generate_synthetic(const ExperimentConfig& cfg) {
  SynthSpec spec = cfg.synth;
  spec.seed = derive_seed(cfg.seed, "synth");
  SynthDataset data = generate_synthetic(spec);
  write_synthetic(cfg.out_dir, data);
  return data;
}

void write_samples(const fs::path& path, const std::vector<TrainingSample>& samples) {
  auto out = open_out(path);
  out << "image_id\trow\tcol\tclass\tsubclass\n";
  for (const auto& s : samples) {
    out << s.image_id << '\t' << s.center.row << '\t' << s.center.col << '\t' << s.class_label << '\t'
        << s.subclass_label << '\n';
  }
}

std::vector<TrainingSample> read_samples(const fs::path& path, const std::vector<LabeledImage>& images) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read samples '" + path.string() + "'");
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < images.size(); ++i) index.emplace(images[i].id, i);
  std::vector<TrainingSample> samples;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    std::istringstream ls(line);
    TrainingSample s;
    if (!std::getline(ls, s.image_id, '\t') ||
        !(ls >> s.center.row >> s.center.col >> s.class_label >> s.subclass_label)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed sample row");
    }
    const auto it = index.find(s.image_id);
    if (it == index.end()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown image '" + s.image_id + "'");
    }
    s.image_index = it->second;
    const auto& img = images[s.image_index];
    if (!img.labels.contains(s.center.row, s.center.col) || img.labels(s.center.row, s.center.col) != s.class_label) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": sample does not match the dataset; rebuild the hierarchy with the same config");
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

HierarchyBuildResult cmd_build_hierarchy(const ExperimentConfig& cfg) {
  PreparedTraining prep = prepare_training(cfg);
  const int num_classes = prep.dataset.num_classes();
  const auto counts = count_samples_per_class(prep.samples, num_classes);

  HierarchyBuildResult result;
  result.partition = partition_classes(counts, cfg.hyper.rho);
  switch (cfg.hierarchy_mode) {
    case HierarchyMode::SceneName:
      result.hierarchy = build_scene_name_hierarchy(prep.samples, prep.images, result.partition, num_classes);
      break;
    case HierarchyMode::LabelMap:
      result.hierarchy = build_labelmap_hierarchy(prep.samples, prep.images, result.partition, num_classes,
                                                  cfg.hyper.roi_size,
                                                  largest_rare_class_size(counts, result.partition),
                                                  derive_seed(cfg.seed, "hierarchy"), &result.cluster_report);
      break;
    case HierarchyMode::Identity:
      result.hierarchy = LabelHierarchy::identity(num_classes);
      for (auto& s : prep.samples) s.subclass_label = s.class_label;
      break;
  }
  result.samples = std::move(prep.samples);

  write_hierarchy(cfg.hierarchy_file(), result.hierarchy);
  write_samples(cfg.samples_file(), result.samples);

  std::vector<long> freq(static_cast<std::size_t>(result.hierarchy.size()), 0);
  for (const auto& s : result.samples) ++freq.at(static_cast<std::size_t>(s.subclass_label));
  std::vector<int> order(freq.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return freq[a] > freq[b]; });
  auto out = open_out(cfg.out_dir / "subclass_frequency.csv");
  out << "subclass_id,parent_class,parent_name,count\n";
  for (int id : order) {
    const int parent = result.hierarchy.subclasses[static_cast<std::size_t>(id)].parent;
    out << id << ',' << parent << ',' << prep.dataset.catalog().names[static_cast<std::size_t>(parent)] << ','
        << freq[static_cast<std::size_t>(id)] << '\n';
  }
  return result;
}

ScheduleReport cmd_train(const ExperimentConfig& cfg) {
  PreparedTraining prep = prepare_training(cfg);
  const int num_classes = prep.dataset.num_classes();

  Model model(cfg.architecture, cfg.hyper.patch_size, num_classes, LabelSpace::Class, derive_seed(cfg.seed, "model"));
  model.input_mean = prep.dataset.channel_mean();
  const int layers = model.layer_count();

  std::vector<Stage> stages;
  std::vector<TrainingSample> samples;
  if (cfg.schedule.strategy == Strategy::Baseline) {
    stages = baseline_schedule(layers, num_classes, cfg.schedule.baseline_iterations);
    samples = std::move(prep.samples);
  } else {
    const LabelHierarchy hierarchy = read_hierarchy(cfg.hierarchy_file());
    if (hierarchy.num_classes != num_classes) {
      throw DataError("hierarchy covers " + std::to_string(hierarchy.num_classes) + " classes, the catalog " +
                      std::to_string(num_classes));
    }
    samples = read_samples(cfg.samples_file(), prep.images);
    for (const auto& s : samples) {
      if (s.subclass_label < 0 || s.subclass_label >= hierarchy.size() ||
          hierarchy.subclasses[static_cast<std::size_t>(s.subclass_label)].parent != s.class_label) {
        throw DataError("samples file does not match the hierarchy");
      }
    }
    model.hierarchy_id = hierarchy_id(hierarchy);
    if (cfg.schedule.strategy == Strategy::Sequential) {
      stages = sequential_schedule(layers, hierarchy.size(), num_classes, cfg.schedule.include_step3,
                                   cfg.schedule.sequential_iterations);
    } else {
      stages = hierarchical_schedule(layers, build_aggregation_matrix(hierarchy), cfg.schedule.hierarchical_iterations);
    }
  }

  const TrainingData data = TrainingData::from(std::move(prep.images), std::move(samples));
  RunOptions options;
  options.log_interval = cfg.schedule.log_interval;
  options.early_stop = cfg.schedule.early_stop;
  const fs::path report_path = cfg.out_dir / "schedule_report.csv";
  ScheduleReport report;
  try {
    report = run_schedule(model, stages, data, cfg.hyper, derive_seed(cfg.seed, "train"), options);
  } catch (const TrainingAborted& e) {
    write_report_csv(report_path, e.partial());
    throw;
  }
  write_report_csv(report_path, report);
  save_model(cfg.checkpoint_file(), model);
  return report;
}

ConfusionMatrix cmd_eval(const ExperimentConfig& cfg, const fs::path& checkpoint,
                         const std::optional<fs::path>& compare) {
  require(cfg.classes, "[data] classes");
  const fs::path manifest = cfg.test_manifest.empty() ? cfg.train_manifest : cfg.test_manifest;
  require(manifest, "[data] test");
  const Dataset ds = load_dataset(manifest, cfg.classes);
  const auto& names = ds.catalog().names;

  Model model = load_class_model(checkpoint);
  EvaluationResult result = evaluate_images(model, ds.images(), ds.num_classes(), cfg.eval_stride);
  write_metrics_csv(cfg.out_dir / "metrics.csv", result.confusion);
  write_confusion_csv(cfg.out_dir / "confusion.csv", result.confusion, names);
  write_per_class_csv(cfg.out_dir / "per_class.csv", result.confusion, names);
  fs::create_directories(cfg.out_dir / "predictions");
  for (std::size_t i = 0; i < ds.images().size(); ++i) {
    write_label_map(cfg.out_dir / "predictions" / (ds.images()[i].id + ".pgm"), result.predictions[i]);
  }

  if (compare) {
    Model other = load_class_model(*compare);
    const EvaluationResult base = evaluate_images(other, ds.images(), ds.num_classes(), cfg.eval_stride);
    write_delta_csv(cfg.out_dir / "delta.csv", per_class_delta(base.confusion, result.confusion), names);
  }
  return result.confusion;
}

fs::path cmd_infill(const ExperimentConfig& cfg, const fs::path& checkpoint) {
  require(cfg.classes, "[data] classes");
  require(cfg.train_manifest, "[data] train");
  const auto entries = read_manifest(cfg.train_manifest);
  const Dataset ds = load_dataset(cfg.train_manifest, cfg.classes);
  Model model = load_class_model(checkpoint);
  if ((model.has_hierarchy() ? model.aggregation().num_classes() : model.head_dim()) != ds.num_classes()) {
    throw DataError("checkpoint class outputs do not match the catalog");
  }
  const ModelPredictor predictor(std::move(model), cfg.eval_stride);
  const auto filled = infill_unlabeled(ds.images(), predictor, cfg.infill_threshold);

  fs::create_directories(cfg.out_dir / "images");
  fs::create_directories(cfg.out_dir / "labels");
  fs::copy_file(cfg.classes, cfg.out_dir / "classes.txt", fs::copy_options::overwrite_existing);
  std::vector<ManifestEntry> out_entries;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const auto idx = ds.find(e.image_id).value();
    const fs::path image_path = cfg.out_dir / "images" / e.image_path.filename();
    const fs::path label_path = cfg.out_dir / "labels" / e.labelmap_path.filename();
    fs::copy_file(e.image_path, image_path, fs::copy_options::overwrite_existing);
    if (filled[idx].labels == ds.images()[idx].labels) {
      fs::copy_file(e.labelmap_path, label_path, fs::copy_options::overwrite_existing);
    } else {
      write_label_map(label_path, filled[idx].labels);
    }
    out_entries.push_back({e.image_id, image_path, label_path, e.scene_name});
  }
  const fs::path manifest = cfg.out_dir / cfg.train_manifest.filename();
  write_manifest(manifest, out_entries);
  return manifest;
}

}  // namespace semctx
