#include "semctx/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "semctx/model.hpp"

namespace semctx {
namespace {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_list(const std::vector<long>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

// Reads typed values from one section and remembers which keys were used.
class Section {
 public:
  Section(const pt::ptree& root, std::string name) : name_(std::move(name)) {
    if (auto child = root.get_child_optional(name_)) tree_ = *child;
  }

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    auto v = tree_.get_optional<std::string>(key);
    if (!v) return std::nullopt;
    std::string s = *v;
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }

  void get(const std::string& key, std::string& out) {
    if (auto v = raw(key)) out = *v;
  }
  void get(const std::string& key, double& out) {
    if (auto v = raw(key)) out = parse<double>(key, *v);
  }
  void get(const std::string& key, int& out) {
    if (auto v = raw(key)) out = parse<int>(key, *v);
  }
  void get(const std::string& key, long& out) {
    if (auto v = raw(key)) out = parse<long>(key, *v);
  }
  void get(const std::string& key, std::uint64_t& out) {
    if (auto v = raw(key)) out = parse<std::uint64_t>(key, *v);
  }
  void get(const std::string& key, bool& out) {
    if (auto v = raw(key)) {
      if (*v == "true" || *v == "1" || *v == "yes") {
        out = true;
      } else if (*v == "false" || *v == "0" || *v == "no") {
        out = false;
      } else {
        fail(key, *v);
      }
    }
  }
  void get(const std::string& key, std::vector<long>& out) {
    if (auto v = raw(key)) {
      out.clear();
      std::stringstream ss(*v);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(parse<long>(key, item));
    }
  }

  void check_unknown() const {
    for (const auto& [key, value] : tree_) {
      if (!used_.count(key)) throw DataError("unknown config key [" + name_ + "] " + key);
    }
  }

  template <typename T>
  T parse(const std::string& key, std::string s) {
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
    T value{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(key, s);
    return value;
  }

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& value) const {
    throw DataError("bad value '" + value + "' for config key [" + name_ + "] " + key);
  }

  std::string name_;
  pt::ptree tree_;
  std::set<std::string> used_;
};

fs::path resolve(const fs::path& base, const std::string& value) {
  if (value.empty()) return {};
  const fs::path p(value);
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

}  // namespace

std::string hierarchy_mode_name(HierarchyMode m) {
  switch (m) {
    case HierarchyMode::LabelMap: return "labelmap";
    case HierarchyMode::SceneName: return "scene";
    default: return "identity";
  }
}

HierarchyMode parse_hierarchy_mode(const std::string& s) {
  if (s == "labelmap" || s == "label-cluster") return HierarchyMode::LabelMap;
  if (s == "scene" || s == "scene-name") return HierarchyMode::SceneName;
  if (s == "identity") return HierarchyMode::Identity;
  throw DataError("unknown hierarchy mode '" + s + "' (expected label-cluster, scene-name or identity)");
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Baseline: return "baseline";
    case Strategy::Sequential: return "sequential";
    default: return "hierarchical";
  }
}

Strategy parse_strategy(const std::string& s) {
  if (s == "baseline") return Strategy::Baseline;
  if (s == "sequential") return Strategy::Sequential;
  if (s == "hierarchical") return Strategy::Hierarchical;
  throw DataError("unknown strategy '" + s + "' (expected baseline, sequential or hierarchical)");
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.hyper.patch_size = kDefaultInputSize;
  cfg.hyper.lr0 = 0.01;
  cfg.hyper.lr_step = 4000;
  cfg.hyper.roi_size = 33;
  cfg.augment.n_copies = 0;
  cfg.architecture = kDefaultArchitecture;
  return cfg;
}

void ExperimentConfig::validate() const {
  hyper.validate();
  if (pixels_per_cell < 1) throw DataError("pixels_per_cell must be positive");
  if (infill_threshold < 0.0 || infill_threshold > 1.0) throw DataError("infill_threshold must be in [0, 1]");
  if (eval_stride < 1) throw DataError("eval stride must be positive");
  if (augment.n_copies < 0) throw DataError("augmentation copies must be non-negative");
  if (augment.scale_min <= 0.0 || augment.scale_min > augment.scale_max) throw DataError("bad augmentation scale range");
  if (augment.rotation_min_deg > augment.rotation_max_deg) throw DataError("bad augmentation rotation range");
  if (schedule.log_interval < 1) throw DataError("log_interval must be positive");
}

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir, bool check_paths) {
  pt::ptree root;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  static const std::set<std::string> known{"data", "run", "hierarchy", "augment", "network", "schedule", "eval", "synth"};
  for (const auto& [name, child] : root) {
    if (!known.count(name)) {
      throw DataError(child.empty() ? "config key '" + name + "' outside any section"
                                    : "unknown config section [" + name + "]");
    }
  }

  ExperimentConfig cfg = default_config();

  Section data(root, "data");
  std::string classes, train, test;
  data.get("classes", classes);
  data.get("train", train);
  data.get("test", test);
  cfg.classes = resolve(base_dir, classes);
  cfg.train_manifest = resolve(base_dir, train);
  cfg.test_manifest = resolve(base_dir, test);
  data.check_unknown();

  Section run(root, "run");
  const auto seed = run.raw("seed");
  if (!seed) throw DataError("config needs [run] seed");
  cfg.seed = run.parse<std::uint64_t>("seed", *seed);
  std::string out = ".";
  run.get("out", out);
  cfg.out_dir = resolve(base_dir, out);
  run.check_unknown();

  Section hier(root, "hierarchy");
  if (auto mode = hier.raw("mode")) cfg.hierarchy_mode = parse_hierarchy_mode(*mode);
  hier.get("rho", cfg.hyper.rho);
  if (auto roi = hier.raw("roi")) {
    cfg.hyper.roi_size = (*roi == "inf") ? std::nullopt : std::optional<int>(hier.parse<int>("roi", *roi));
  }
  hier.get("pixels_per_cell", cfg.pixels_per_cell);
  hier.get("infill_threshold", cfg.infill_threshold);
  hier.check_unknown();

  Section aug(root, "augment");
  aug.get("copies", cfg.augment.n_copies);
  aug.get("scale_min", cfg.augment.scale_min);
  aug.get("scale_max", cfg.augment.scale_max);
  aug.get("rotation_min", cfg.augment.rotation_min_deg);
  aug.get("rotation_max", cfg.augment.rotation_max_deg);
  aug.get("flip_probability", cfg.augment.flip_probability);
  aug.check_unknown();

  Section net(root, "network");
  net.get("architecture", cfg.architecture);
  net.get("patch_size", cfg.hyper.patch_size);
  net.get("batch_size", cfg.hyper.batch_size);
  net.get("lr0", cfg.hyper.lr0);
  net.get("lr_step", cfg.hyper.lr_step);
  net.get("lr_factor", cfg.hyper.lr_factor);
  net.get("alpha", cfg.hyper.alpha);
  net.get("beta", cfg.hyper.beta);
  net.check_unknown();

  Section sched(root, "schedule");
  if (auto s = sched.raw("strategy")) cfg.schedule.strategy = parse_strategy(*s);
  sched.get("include_step3", cfg.schedule.include_step3);
  sched.get("sequential_iterations", cfg.schedule.sequential_iterations);
  sched.get("hierarchical_iterations", cfg.schedule.hierarchical_iterations);
  sched.get("baseline_iterations", cfg.schedule.baseline_iterations);
  sched.get("log_interval", cfg.schedule.log_interval);
  sched.get("early_stop", cfg.schedule.early_stop);
  sched.check_unknown();

  Section ev(root, "eval");
  ev.get("stride", cfg.eval_stride);
  ev.check_unknown();

  Section syn(root, "synth");
  syn.get("classes", cfg.synth.classes);
  syn.get("contexts", cfg.synth.contexts);
  syn.get("rare_classes", cfg.synth.rare_classes);
  syn.get("train_images", cfg.synth.train_images);
  syn.get("test_images", cfg.synth.test_images);
  syn.get("size", cfg.synth.size);
  syn.get("noise", cfg.synth.noise);
  syn.get("rare_fraction", cfg.synth.rare_fraction);
  syn.get("unlabeled_fraction", cfg.synth.unlabeled_fraction);
  syn.check_unknown();

  if (check_paths) {
    for (const fs::path* p : {&cfg.classes, &cfg.train_manifest, &cfg.test_manifest}) {
      if (!p->empty() && !fs::exists(*p)) throw DataError("config references missing file '" + p->string() + "'");
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path, bool check_paths) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), fs::absolute(path).parent_path(), check_paths);
}

std::string config_to_string(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "[data]\n"
     << "classes = " << cfg.classes.string() << '\n'
     << "train = " << cfg.train_manifest.string() << '\n'
     << "test = " << cfg.test_manifest.string() << "\n\n";
  os << "[run]\n"
     << "seed = " << cfg.seed << '\n'
     << "out = " << cfg.out_dir.string() << "\n\n";
  os << "[hierarchy]\n"
     << "mode = " << hierarchy_mode_name(cfg.hierarchy_mode) << '\n'
     << "rho = " << fmt(cfg.hyper.rho) << '\n'
     << "roi = " << (cfg.hyper.roi_size ? std::to_string(*cfg.hyper.roi_size) : "inf") << '\n'
     << "pixels_per_cell = " << cfg.pixels_per_cell << '\n'
     << "infill_threshold = " << fmt(cfg.infill_threshold) << "\n\n";
  os << "[augment]\n"
     << "copies = " << cfg.augment.n_copies << '\n'
     << "scale_min = " << fmt(cfg.augment.scale_min) << '\n'
     << "scale_max = " << fmt(cfg.augment.scale_max) << '\n'
     << "rotation_min = " << fmt(cfg.augment.rotation_min_deg) << '\n'
     << "rotation_max = " << fmt(cfg.augment.rotation_max_deg) << '\n'
     << "flip_probability = " << fmt(cfg.augment.flip_probability) << "\n\n";
  os << "[network]\n"
     << "architecture = " << cfg.architecture << '\n'
     << "patch_size = " << cfg.hyper.patch_size << '\n'
     << "batch_size = " << cfg.hyper.batch_size << '\n'
     << "lr0 = " << fmt(cfg.hyper.lr0) << '\n'
     << "lr_step = " << cfg.hyper.lr_step << '\n'
     << "lr_factor = " << fmt(cfg.hyper.lr_factor) << '\n'
     << "alpha = " << fmt(cfg.hyper.alpha) << '\n'
     << "beta = " << fmt(cfg.hyper.beta) << "\n\n";
  os << "[schedule]\n"
     << "strategy = " << strategy_name(cfg.schedule.strategy) << '\n'
     << "include_step3 = " << (cfg.schedule.include_step3 ? "true" : "false") << '\n'
     << "sequential_iterations = " << fmt_list(cfg.schedule.sequential_iterations) << '\n'
     << "hierarchical_iterations = " << fmt_list(cfg.schedule.hierarchical_iterations) << '\n'
     << "baseline_iterations = " << fmt_list(cfg.schedule.baseline_iterations) << '\n'
     << "log_interval = " << cfg.schedule.log_interval << '\n'
     << "early_stop = " << (cfg.schedule.early_stop ? "true" : "false") << "\n\n";
  os << "[eval]\n"
     << "stride = " << cfg.eval_stride << "\n\n";
  os << "[synth]\n"
     << "classes = " << cfg.synth.classes << '\n'
     << "contexts = " << cfg.synth.contexts << '\n'
     << "rare_classes = " << cfg.synth.rare_classes << '\n'
     << "train_images = " << cfg.synth.train_images << '\n'
     << "test_images = " << cfg.synth.test_images << '\n'
     << "size = " << cfg.synth.size << '\n'
     << "noise = " << fmt(cfg.synth.noise) << '\n'
     << "rare_fraction = " << fmt(cfg.synth.rare_fraction) << '\n'
     << "unlabeled_fraction = " << fmt(cfg.synth.unlabeled_fraction) << '\n';
  return os.str();
}

void save_config(const fs::path& path, const ExperimentConfig& cfg) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write config '" + path.string() + "'");
  out << config_to_string(cfg);
}

}  // namespace semctx
