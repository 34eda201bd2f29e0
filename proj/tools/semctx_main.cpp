#include <CLI11.hpp>
#include <iostream>

#include "semctx/commands.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace semctx;
  namespace fs = std::filesystem;

  CLI::App app{"Semantic-context label hierarchies and fine-tuning schedules for dense labeling"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  app.add_option("--config", config_path, "INI configuration file")->required();
  app.add_option("--seed", seed, "Override [run] seed");
  app.add_option("--out", out_dir, "Override [run] out");

  auto* gen = app.add_subcommand("gen-synth", "Write a planted-subclass synthetic dataset");

  auto* build = app.add_subcommand("build-hierarchy", "Build the label hierarchy and sample assignments");
  std::optional<double> rho;
  std::string roi;
  std::string mode;
  std::optional<double> threshold;
  build->add_option("--rho", rho, "Common-class mass fraction");
  build->add_option("--R", roi, "Histogram window side (odd) or 'inf'");
  build->add_option("--hierarchy-mode", mode, "labelmap (label-cluster), scene (scene-name) or identity");

  auto* train = app.add_subcommand("train", "Run a fine-tuning schedule");
  std::string strategy;
  train->add_option("--strategy", strategy, "baseline, sequential or hierarchical");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  std::string checkpoint;
  std::string compare;
  eval->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  eval->add_option("--compare", compare, "Reference checkpoint for per-class deltas");

  auto* infill = app.add_subcommand("infill", "Fill unlabeled training pixels with model predictions");
  infill->add_option("--checkpoint", checkpoint, "Class-level model checkpoint")->required();
  infill->add_option("--infill-threshold", threshold, "Images labeled at or above this fraction are kept as is");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    ExperimentConfig cfg = load_config(config_path, !gen->parsed());
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out_dir = fs::absolute(out_dir).lexically_normal();
    if (rho) cfg.hyper.rho = *rho;
    if (!roi.empty()) cfg.hyper.roi_size = roi == "inf" ? std::nullopt : std::optional<int>(std::stoi(roi));
    if (!mode.empty()) cfg.hierarchy_mode = parse_hierarchy_mode(mode);
    if (!strategy.empty()) cfg.schedule.strategy = parse_strategy(strategy);
    if (threshold) cfg.infill_threshold = *threshold;
    cfg.validate();

    if (gen->parsed()) {
      const auto data = cmd_generate_synthetic(cfg);
      std::cout << "wrote " << data.train.size() << " train and " << data.test.size() << " test images to "
                << cfg.out_dir.string() << '\n';
    } else if (build->parsed()) {
      const auto r = cmd_build_hierarchy(cfg);
      std::cout << "hierarchy: " << r.hierarchy.size() << " subclasses over " << r.hierarchy.num_classes
                << " classes (" << r.partition.common.size() << " common)\n";
    } else if (train->parsed()) {
      const auto report = cmd_train(cfg);
      if (!report.records.empty()) {
        const auto& last = report.records.back();
        std::cout << "final loss " << last.total << " (stage " << last.stage_name << ")\n";
      }
    } else if (eval->parsed()) {
      const auto conf = cmd_eval(cfg, checkpoint, compare.empty() ? std::nullopt : std::optional<fs::path>(compare));
      const auto acc = accuracy(conf);
      std::cout << "per_pixel " << acc.per_pixel << " per_class " << acc.per_class << '\n';
    } else if (infill->parsed()) {
      std::cout << "wrote " << cmd_infill(cfg, checkpoint).string() << '\n';
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
