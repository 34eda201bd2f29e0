#include "semctx/evaluation.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "semctx/augmentation.hpp"

namespace semctx {
namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.precision(17);
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

void check_names(const ConfusionMatrix& conf, const std::vector<std::string>& names) {
  if (static_cast<int>(names.size()) != conf.num_classes()) {
    throw std::invalid_argument("class name list does not match the confusion matrix");
  }
}

}  // namespace

std::vector<int> grid_positions(int extent, int stride) {
  if (stride < 1) throw std::invalid_argument("stride must be positive");
  std::vector<int> out;
  for (int p = stride / 2; p < extent; p += stride) out.push_back(p);
  if (out.empty() && extent > 0) out.push_back(extent / 2);
  return out;
}

std::vector<int> nearest_grid_index(int extent, int stride) {
  const auto grid = grid_positions(extent, stride);
  std::vector<int> out(static_cast<std::size_t>(extent), 0);
  std::size_t k = 0;
  for (int x = 0; x < extent; ++x) {
    // Advance only while the next center is strictly closer.
    while (k + 1 < grid.size() && std::abs(grid[k + 1] - x) < std::abs(grid[k] - x)) ++k;
    out[static_cast<std::size_t>(x)] = static_cast<int>(k);
  }
  return out;
}

LabelMap predict_label_map(Model& model, const RgbImage& image, int stride, int batch_size) {
  if (!model.trained) throw std::logic_error("cannot predict with an untrained model");
  const int h = image.rows();
  const int w = image.cols();
  const auto rows = grid_positions(h, stride);
  const auto cols = grid_positions(w, stride);
  const Rgb mean = image.mean();
  std::vector<int> center_labels;
  center_labels.reserve(rows.size() * cols.size());
  std::vector<Patch> batch;
  auto flush = [&] {
    if (batch.empty()) return;
    const auto labels = model.predict_classes(model.make_input(batch));
    center_labels.insert(center_labels.end(), labels.begin(), labels.end());
    batch.clear();
  };
  for (int r : rows) {
    for (int c : cols) {
      batch.push_back(extract_patch(image, {r, c}, model.input_size(), mean));
      if (static_cast<int>(batch.size()) == batch_size) flush();
    }
  }
  flush();

  const auto near_r = nearest_grid_index(h, stride);
  const auto near_c = nearest_grid_index(w, stride);
  LabelMap out(h, w, kUnassigned);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out(y, x) = center_labels[static_cast<std::size_t>(near_r[static_cast<std::size_t>(y)]) * cols.size() +
                                static_cast<std::size_t>(near_c[static_cast<std::size_t>(x)])];
    }
  }
  return out;
}

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : num_classes_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
  if (num_classes < 0) throw std::invalid_argument("class count must be non-negative");
}

long ConfusionMatrix::at(int truth, int predicted) const {
  if (truth < 0 || truth >= num_classes_ || predicted < 0 || predicted >= num_classes_) {
    throw std::out_of_range("confusion index out of range");
  }
  return counts_[static_cast<std::size_t>(truth) * num_classes_ + predicted];
}

void ConfusionMatrix::add(int truth, int predicted, long count) {
  if (truth == kUnlabeled) {
    ignored_ += count;
    return;
  }
  if (truth < 0 || truth >= num_classes_ || predicted < 0 || predicted >= num_classes_) {
    throw DataError("label pair (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                    ") outside the class catalog");
  }
  counts_[static_cast<std::size_t>(truth) * num_classes_ + predicted] += count;
}

void ConfusionMatrix::accumulate(const LabelMap& truth, const LabelMap& predicted) {
  if (truth.rows() != predicted.rows() || truth.cols() != predicted.cols()) {
    throw DataError("prediction and ground truth differ in size");
  }
  for (int y = 0; y < truth.rows(); ++y) {
    for (int x = 0; x < truth.cols(); ++x) add(truth(y, x), predicted(y, x));
  }
}

long ConfusionMatrix::total() const {
  long t = 0;
  for (long c : counts_) t += c;
  return t;
}

long ConfusionMatrix::row_total(int cls) const {
  long t = 0;
  for (int j = 0; j < num_classes_; ++j) t += at(cls, j);
  return t;
}

Accuracy accuracy(const ConfusionMatrix& conf, bool divide_by_all_classes) {
  const long total = conf.total();
  if (total == 0) throw DataError("no labeled pixels to evaluate");
  long trace = 0;
  double class_sum = 0.0;
  int present = 0;
  for (int i = 0; i < conf.num_classes(); ++i) {
    trace += conf.correct(i);
    const long t = conf.row_total(i);
    if (t > 0) {
      class_sum += static_cast<double>(conf.correct(i)) / static_cast<double>(t);
      ++present;
    }
  }
  Accuracy acc;
  acc.per_pixel = static_cast<double>(trace) / static_cast<double>(total);
  acc.per_class = class_sum / (divide_by_all_classes ? conf.num_classes() : present);
  return acc;
}

std::vector<ClassDelta> per_class_delta(const ConfusionMatrix& a, const ConfusionMatrix& b) {
  if (a.num_classes() != b.num_classes()) {
    throw std::invalid_argument("confusion matrices cover " + std::to_string(a.num_classes()) + " and " +
                                std::to_string(b.num_classes()) + " classes");
  }
  std::vector<ClassDelta> out;
  for (int i = 0; i < a.num_classes(); ++i) {
    const long ta = a.row_total(i);
    const long tb = b.row_total(i);
    if (ta == 0 || tb == 0) continue;
    const double acc_a = static_cast<double>(a.correct(i)) / static_cast<double>(ta);
    const double acc_b = static_cast<double>(b.correct(i)) / static_cast<double>(tb);
    out.push_back({i, acc_b - acc_a});
  }
  return out;
}

std::vector<ClassDelta> sort_deltas_descending(std::vector<ClassDelta> deltas) {
  std::stable_sort(deltas.begin(), deltas.end(),
                   [](const ClassDelta& x, const ClassDelta& y) { return x.delta > y.delta; });
  return deltas;
}

EvaluationResult evaluate_images(Model& model, const std::vector<LabeledImage>& images, int num_classes,
                                 int stride) {
  if (model.has_hierarchy() ? model.aggregation().num_classes() != num_classes
                            : (model.head_label_space() != LabelSpace::Class || model.head_dim() != num_classes)) {
    throw DataError("model class outputs do not match the " + std::to_string(num_classes) + "-class catalog");
  }
  EvaluationResult result{ConfusionMatrix(num_classes), {}};
  for (const auto& img : images) {
    result.predictions.push_back(predict_label_map(model, img.pixels, stride));
    result.confusion.accumulate(img.labels, result.predictions.back());
  }
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, const ConfusionMatrix& conf) {
  const Accuracy acc = accuracy(conf);
  const Accuracy all = accuracy(conf, true);
  auto out = open_csv(path);
  out << "metric,value\n";
  out << "per_pixel," << acc.per_pixel << '\n';
  out << "per_class," << acc.per_class << '\n';
  out << "per_class_all," << all.per_class << '\n';
  out << "counted_pixels," << conf.total() << '\n';
  out << "ignored_pixels," << conf.ignored() << '\n';
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& conf,
                         const std::vector<std::string>& class_names) {
  check_names(conf, class_names);
  auto out = open_csv(path);
  out << "truth";
  for (const auto& n : class_names) out << ',' << csv_field(n);
  out << '\n';
  for (int i = 0; i < conf.num_classes(); ++i) {
    out << csv_field(class_names[static_cast<std::size_t>(i)]);
    for (int j = 0; j < conf.num_classes(); ++j) out << ',' << conf.at(i, j);
    out << '\n';
  }
}

void write_per_class_csv(const std::filesystem::path& path, const ConfusionMatrix& conf,
                         const std::vector<std::string>& class_names) {
  check_names(conf, class_names);
  auto out = open_csv(path);
  out << "class_id,class,correct,total,accuracy\n";
  for (int i = 0; i < conf.num_classes(); ++i) {
    const long t = conf.row_total(i);
    out << i << ',' << csv_field(class_names[static_cast<std::size_t>(i)]) << ',' << conf.correct(i) << ',' << t
        << ',';
    if (t > 0) out << static_cast<double>(conf.correct(i)) / static_cast<double>(t);
    out << '\n';
  }
}

void write_delta_csv(const std::filesystem::path& path, const std::vector<ClassDelta>& deltas,
                     const std::vector<std::string>& class_names) {
  auto out = open_csv(path);
  out << "class_id,class,delta\n";
  for (const auto& d : sort_deltas_descending(deltas)) {
    out << d.class_id << ',' << csv_field(class_names.at(static_cast<std::size_t>(d.class_id))) << ',' << d.delta
        << '\n';
  }
}

LabelMap ModelPredictor::predict(const LabeledImage& image) const {
  return predict_label_map(model_, image.pixels, stride_);
}

}  // namespace semctx
