#include "semctx/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "semctx/rng.hpp"

namespace semctx {

using ordered_json = nlohmann::ordered_json;

std::vector<int> LabelHierarchy::parents() const {
  std::vector<int> out;
  out.reserve(subclasses.size());
  for (const auto& s : subclasses) out.push_back(s.parent);
  return out;
}

std::vector<int> LabelHierarchy::subclasses_of(int class_id) const {
  std::vector<int> out;
  for (const auto& s : subclasses) {
    if (s.parent == class_id) out.push_back(s.id);
  }
  return out;
}

void LabelHierarchy::validate() const {
  if (num_classes < 1) throw DataError("hierarchy has no classes");
  std::vector<int> per_class(static_cast<std::size_t>(num_classes), 0);
  std::set<std::string> scene_names;
  bool has_scene = false;
  for (std::size_t i = 0; i < subclasses.size(); ++i) {
    const auto& s = subclasses[i];
    if (s.id != static_cast<int>(i)) throw DataError("hierarchy subclass ids must be 0..n-1 in order");
    if (s.parent < 0 || s.parent >= num_classes) {
      throw DataError("subclass " + std::to_string(s.id) + " has parent " + std::to_string(s.parent) +
                      " outside [0, " + std::to_string(num_classes) + ")");
    }
    ++per_class[static_cast<std::size_t>(s.parent)];
    if (s.provenance == Provenance::Cluster) {
      if (static_cast<int>(s.center.size()) != num_classes) {
        throw DataError("cluster subclass " + std::to_string(s.id) + " has a center of the wrong dimension");
      }
      double norm = 0.0;
      for (double v : s.center) norm += v * v;
      if (std::abs(std::sqrt(norm) - 1.0) > 1e-9) {
        throw DataError("cluster subclass " + std::to_string(s.id) + " center is not unit norm");
      }
    }
    if (s.provenance == Provenance::SceneName) {
      if (!s.scene_name) throw DataError("scene-name subclass " + std::to_string(s.id) + " lacks a scene name");
      has_scene = true;
      scene_names.insert(*s.scene_name);
    }
  }
  for (int j = 0; j < num_classes; ++j) {
    if (per_class[static_cast<std::size_t>(j)] == 0) {
      throw DataError("class " + std::to_string(j) + " has no subclass in the hierarchy");
    }
  }
  std::set<int> common(common_classes.begin(), common_classes.end());
  for (int j : rare_classes) {
    if (common.count(j)) throw DataError("class " + std::to_string(j) + " is both common and rare");
    const auto subs = subclasses_of(j);
    if (subs.size() != 1 || subclasses[static_cast<std::size_t>(subs[0])].provenance != Provenance::Identity) {
      throw DataError("rare class " + std::to_string(j) + " must have exactly one identity subclass");
    }
  }
  if (has_scene && size() > num_classes * static_cast<int>(scene_names.size())) {
    throw DataError("scene-name hierarchy has more subclasses than classes x scene names");
  }
}

LabelHierarchy LabelHierarchy::identity(int num_classes) {
  LabelHierarchy h;
  h.num_classes = num_classes;
  for (int j = 0; j < num_classes; ++j) {
    h.subclasses.push_back({j, j, Provenance::Identity, std::nullopt, {}});
    h.rare_classes.push_back(j);
  }
  return h;
}

ClassPartition partition_classes(std::span<const long> counts, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in (0, 1]");
  std::vector<int> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return counts[a] > counts[b]; });
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("class counts sum to zero");

  ClassPartition part;
  double cumulative = 0.0;
  std::size_t i = 0;
  for (; i < order.size(); ++i) {
    part.common.push_back(order[i]);
    cumulative += static_cast<double>(counts[static_cast<std::size_t>(order[i])]);
    if (cumulative > rho * total) {
      ++i;
      break;
    }
  }
  for (; i < order.size(); ++i) part.rare.push_back(order[i]);
  std::sort(part.common.begin(), part.common.end());
  std::sort(part.rare.begin(), part.rare.end());
  return part;
}

long largest_rare_class_size(std::span<const long> counts, const ClassPartition& partition) {
  long best = 0;
  for (int j : partition.rare) best = std::max(best, counts[static_cast<std::size_t>(j)]);
  return best;
}

namespace {

std::vector<std::vector<std::size_t>> samples_by_class(const std::vector<TrainingSample>& samples, int num_classes) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int c = samples[i].class_label;
    if (c < 0 || c >= num_classes) {
      throw DataError("sample from '" + samples[i].image_id + "' has class " + std::to_string(c) + " out of range");
    }
    by_class[static_cast<std::size_t>(c)].push_back(i);
  }
  return by_class;
}

void check_partition(const ClassPartition& partition, int num_classes) {
  std::vector<int> seen(static_cast<std::size_t>(num_classes), 0);
  for (int j : partition.common) ++seen.at(static_cast<std::size_t>(j));
  for (int j : partition.rare) ++seen.at(static_cast<std::size_t>(j));
  for (int v : seen) {
    if (v != 1) throw DataError("class partition must cover every class exactly once");
  }
}

Subclass identity_subclass(int id, int parent) { return {id, parent, Provenance::Identity, std::nullopt, {}}; }

}  // namespace

LabelHierarchy build_scene_name_hierarchy(std::vector<TrainingSample>& samples,
                                          const std::vector<LabeledImage>& images,
                                          const ClassPartition& partition, int num_classes) {
  check_partition(partition, num_classes);
  const auto by_class = samples_by_class(samples, num_classes);
  const std::set<int> common(partition.common.begin(), partition.common.end());

  LabelHierarchy h;
  h.num_classes = num_classes;
  h.common_classes = partition.common;
  h.rare_classes = partition.rare;
  for (int j = 0; j < num_classes; ++j) {
    const auto& members = by_class[static_cast<std::size_t>(j)];
    if (!common.count(j) || members.empty()) {
      const int id = h.size();
      h.subclasses.push_back(identity_subclass(id, j));
      for (auto i : members) samples[i].subclass_label = id;
      continue;
    }
    std::map<std::string, std::vector<std::size_t>> by_scene;
    for (auto i : members) {
      const auto& img = images.at(samples[i].image_index);
      if (!img.scene_name) {
        throw DataError("image '" + img.id + "' has a sample of common class " + std::to_string(j) +
                        " but no scene name");
      }
      by_scene[*img.scene_name].push_back(i);
    }
    for (const auto& [scene, idx] : by_scene) {
      const int id = h.size();
      h.subclasses.push_back({id, j, Provenance::SceneName, scene, {}});
      for (auto i : idx) samples[i].subclass_label = id;
    }
  }
  h.validate();
  return h;
}

HistogramDescriptor compute_label_histogram(const LabelMap& labels, PixelPos center, std::optional<int> roi,
                                            int num_classes) {
  if (!labels.contains(center.row, center.col)) throw std::out_of_range("histogram center outside the label map");
  if (roi && (*roi < 1 || *roi % 2 == 0)) {
    throw std::invalid_argument("ROI size must be odd, got " + std::to_string(*roi));
  }
  int r0 = 0, r1 = labels.rows() - 1, c0 = 0, c1 = labels.cols() - 1;
  if (roi) {
    const int half = *roi / 2;
    r0 = std::max(r0, center.row - half);
    r1 = std::min(r1, center.row + half);
    c0 = std::max(c0, center.col - half);
    c1 = std::min(c1, center.col + half);
  }
  HistogramDescriptor h;
  h.values.assign(static_cast<std::size_t>(num_classes), 0.0);
  long counted = 0;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const int v = labels(r, c);
      if (v == kUnlabeled) continue;
      if (v < 0 || v >= num_classes) throw DataError("label " + std::to_string(v) + " out of range in histogram");
      h.values[static_cast<std::size_t>(v)] += 1.0;
      ++counted;
    }
  }
  if (counted == 0) return h;
  double norm = 0.0;
  for (double v : h.values) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : h.values) v /= norm;
  h.empty = false;
  return h;
}

LabelHierarchy build_labelmap_hierarchy(std::vector<TrainingSample>& samples, const std::vector<LabeledImage>& images,
                                        const ClassPartition& partition, int num_classes, std::optional<int> roi,
                                        long n_star, std::uint64_t seed, LabelClusterReport* report) {
  check_partition(partition, num_classes);
  const auto by_class = samples_by_class(samples, num_classes);
  const std::set<int> common(partition.common.begin(), partition.common.end());

  LabelClusterReport local;
  local.n_star = n_star;
  local.clusters_per_class.assign(static_cast<std::size_t>(num_classes), 0);

  // The whole-map histogram does not depend on the center.
  std::map<std::size_t, HistogramDescriptor> whole_map;
  auto descriptor = [&](const TrainingSample& s) {
    const auto& labels = images.at(s.image_index).labels;
    if (roi) return compute_label_histogram(labels, s.center, roi, num_classes);
    auto it = whole_map.find(s.image_index);
    if (it == whole_map.end()) {
      it = whole_map.emplace(s.image_index, compute_label_histogram(labels, s.center, std::nullopt, num_classes)).first;
    }
    return it->second;
  };

  LabelHierarchy h;
  h.num_classes = num_classes;
  h.common_classes = partition.common;
  h.rare_classes = partition.rare;
  for (int j = 0; j < num_classes; ++j) {
    const auto& members = by_class[static_cast<std::size_t>(j)];
    if (!common.count(j)) {
      const int id = h.size();
      h.subclasses.push_back(identity_subclass(id, j));
      for (auto i : members) samples[i].subclass_label = id;
      continue;
    }
    std::vector<Point> points;
    std::vector<std::size_t> owners;
    std::vector<std::size_t> empties;
    for (auto i : members) {
      auto d = descriptor(samples[i]);
      if (d.empty) {
        empties.push_back(i);
        continue;
      }
      points.push_back(std::move(d.values));
      owners.push_back(i);
    }
    if (points.empty()) {
      throw DataError("common class " + std::to_string(j) + " has no usable samples for label-map clustering");
    }
    local.dropped_empty += static_cast<long>(empties.size());

    const std::uint64_t class_seed = derive_seed(seed, "class", static_cast<std::uint64_t>(j));
    const int k = choose_cluster_count(points, n_star, class_seed).k;
    local.clusters_per_class[static_cast<std::size_t>(j)] = k;
    const auto clusters = kmeans(points, k, kClusterMaxIterations, cluster_run_seed(class_seed, k));

    // Clusters without members never become subclasses.
    const auto sizes = clusters.cluster_sizes();
    std::vector<int> remap(sizes.size(), -1);
    for (std::size_t c = 0; c < sizes.size(); ++c) {
      if (sizes[c] == 0) continue;
      remap[c] = h.size();
      h.subclasses.push_back({h.size(), j, Provenance::Cluster, std::nullopt, clusters.centers[c]});
    }
    for (std::size_t p = 0; p < owners.size(); ++p) {
      samples[owners[p]].subclass_label = remap[static_cast<std::size_t>(clusters.assignments[p])];
    }
    if (!empties.empty()) {
      const int id = h.size();
      h.subclasses.push_back(identity_subclass(id, j));
      for (auto i : empties) samples[i].subclass_label = id;
    }
  }
  h.validate();
  if (report) *report = std::move(local);
  return h;
}

std::vector<double> AggregationMatrix::apply(std::span<const double> subclass_scores) const {
  if (static_cast<int>(subclass_scores.size()) != weights.cols()) {
    throw std::invalid_argument("aggregation input has the wrong length");
  }
  std::vector<double> out(static_cast<std::size_t>(weights.rows()), 0.0);
  for (int j = 0; j < weights.rows(); ++j) {
    double sum = 0.0;
    for (int s = 0; s < weights.cols(); ++s) sum += weights(j, s) * subclass_scores[static_cast<std::size_t>(s)];
    out[static_cast<std::size_t>(j)] = sum;
  }
  return out;
}

AggregationMatrix build_aggregation_matrix(const LabelHierarchy& hierarchy) {
  hierarchy.validate();
  AggregationMatrix w;
  w.weights = Matrix(hierarchy.num_classes, hierarchy.size(), 0.0);
  w.parents = hierarchy.parents();
  for (const auto& s : hierarchy.subclasses) w.weights(s.parent, s.id) = 1.0;
  w.trainable = false;
  return w;
}

std::vector<LabeledImage> infill_unlabeled(const std::vector<LabeledImage>& images, const DensePredictor& predictor,
                                           double labeled_threshold) {
  if (!predictor.ready()) throw DataError("infill needs a trained predictor");
  std::vector<LabeledImage> out = images;
  for (auto& img : out) {
    if (labeled_fraction(img.labels) >= labeled_threshold) continue;
    const LabelMap predicted = predictor.predict(img);
    if (predicted.rows() != img.rows() || predicted.cols() != img.cols()) {
      throw DataError("predictor returned a label map of the wrong size for '" + img.id + "'");
    }
    for (std::size_t i = 0; i < img.labels.size(); ++i) {
      if (img.labels.data()[i] == kUnlabeled) img.labels.data()[i] = predicted.data()[i];
    }
  }
  return out;
}

std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::SceneName:
      return "scene-name";
    case Provenance::Cluster:
      return "cluster";
    case Provenance::Identity:
      return "identity";
  }
  return "identity";
}

Provenance parse_provenance(const std::string& name) {
  if (name == "scene-name") return Provenance::SceneName;
  if (name == "cluster") return Provenance::Cluster;
  if (name == "identity") return Provenance::Identity;
  throw DataError("unknown subclass provenance '" + name + "'");
}

std::string serialize_hierarchy(const LabelHierarchy& hierarchy) {
  ordered_json j;
  j["format"] = "semctx-hierarchy";
  j["version"] = 1;
  j["num_classes"] = hierarchy.num_classes;
  j["n_SC"] = hierarchy.size();
  j["common_classes"] = hierarchy.common_classes;
  j["rare_classes"] = hierarchy.rare_classes;
  ordered_json subs = ordered_json::array();
  for (const auto& s : hierarchy.subclasses) {
    ordered_json e;
    e["id"] = s.id;
    e["parent"] = s.parent;
    e["provenance"] = provenance_name(s.provenance);
    if (s.scene_name) e["scene_name"] = *s.scene_name;
    if (!s.center.empty()) e["center"] = s.center;
    subs.push_back(std::move(e));
  }
  j["subclasses"] = std::move(subs);
  return j.dump(1) + "\n";
}

LabelHierarchy parse_hierarchy(const std::string& text) {
  LabelHierarchy h;
  try {
    const auto j = ordered_json::parse(text);
    if (j.at("format") != "semctx-hierarchy") throw DataError("not a hierarchy file");
    if (j.at("version") != 1) throw DataError("unsupported hierarchy version");
    h.num_classes = j.at("num_classes").get<int>();
    h.common_classes = j.at("common_classes").get<std::vector<int>>();
    h.rare_classes = j.at("rare_classes").get<std::vector<int>>();
    for (const auto& e : j.at("subclasses")) {
      Subclass s;
      s.id = e.at("id").get<int>();
      s.parent = e.at("parent").get<int>();
      s.provenance = parse_provenance(e.at("provenance").get<std::string>());
      if (e.contains("scene_name")) s.scene_name = e.at("scene_name").get<std::string>();
      if (e.contains("center")) s.center = e.at("center").get<std::vector<double>>();
      h.subclasses.push_back(std::move(s));
    }
    if (j.at("n_SC").get<int>() != h.size()) throw DataError("hierarchy n_SC does not match its subclass list");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed hierarchy file: ") + e.what());
  }
  h.validate();
  return h;
}

void write_hierarchy(const std::filesystem::path& path, const LabelHierarchy& hierarchy) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << serialize_hierarchy(hierarchy);
}

LabelHierarchy read_hierarchy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_hierarchy(buf.str());
}

std::string hierarchy_id(const LabelHierarchy& hierarchy) {
  const auto h = derive_seed(0, "hierarchy", serialize_hierarchy(hierarchy));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace semctx
