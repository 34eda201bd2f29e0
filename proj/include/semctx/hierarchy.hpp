#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semctx/data_model.hpp"
#include "semctx/kmeans.hpp"
#include "semctx/tensor.hpp"

namespace semctx {

enum class Provenance { SceneName, Cluster, Identity };

struct Subclass {
  int id = 0;
  int parent = 0;
  Provenance provenance = Provenance::Identity;
  /// Set for Provenance::SceneName.
  std::optional<std::string> scene_name;
  /// Unit-norm cluster center for Provenance::Cluster; empty otherwise.
  std::vector<double> center;

  friend bool operator==(const Subclass&, const Subclass&) = default;
};

/// Two-level label hierarchy: subclasses grouped under the original classes.
struct LabelHierarchy {
  int num_classes = 0;
  std::vector<Subclass> subclasses;
  std::vector<int> common_classes;
  std::vector<int> rare_classes;

  int size() const { return static_cast<int>(subclasses.size()); }
  std::vector<int> parents() const;
  std::vector<int> subclasses_of(int class_id) const;
  /// Throws DataError if any structural invariant is violated.
  void validate() const;

  /// One Identity subclass per class.
  static LabelHierarchy identity(int num_classes);

  friend bool operator==(const LabelHierarchy&, const LabelHierarchy&) = default;
};

struct ClassPartition {
  std::vector<int> common;
  std::vector<int> rare;
};

/// Sorts classes by count (descending, ties by index) and takes the shortest
/// prefix whose cumulative count exceeds rho * total as the common set.
ClassPartition partition_classes(std::span<const long> counts, double rho);

/// Sample count of the largest rare class, 0 when there are none.
long largest_rare_class_size(std::span<const long> counts, const ClassPartition& partition);

/// One subclass per (common class, scene name) pair with at least one sample and
/// one Identity subclass per rare class. Assigns every sample's subclass label.
LabelHierarchy build_scene_name_hierarchy(std::vector<TrainingSample>& samples,
                                          const std::vector<LabeledImage>& images,
                                          const ClassPartition& partition, int num_classes);

struct HistogramDescriptor {
  std::vector<double> values;
  /// No labeled pixel fell inside the window.
  bool empty = true;
};

/// L2-normalized label histogram over the roi x roi window around `center`
/// (clipped to the map, unlabeled pixels skipped); nullopt uses the whole map.
HistogramDescriptor compute_label_histogram(const LabelMap& labels, PixelPos center, std::optional<int> roi,
                                            int num_classes);

struct LabelClusterReport {
  /// Cluster count chosen per class (0 for rare classes).
  std::vector<int> clusters_per_class;
  long dropped_empty = 0;
  long n_star = 0;
};

/// Clusters the label histograms of each common class's samples. Rare classes
/// keep a single Identity subclass. Assigns every sample's subclass label.
LabelHierarchy build_labelmap_hierarchy(std::vector<TrainingSample>& samples, const std::vector<LabeledImage>& images,
                                        const ClassPartition& partition, int num_classes, std::optional<int> roi,
                                        long n_star, std::uint64_t seed, LabelClusterReport* report = nullptr);

/// Fixed L x n 0/1 matrix that sums subclass scores into class scores.
struct AggregationMatrix {
  Matrix weights;
  /// Parent class of each column at construction time.
  std::vector<int> parents;
  bool trainable = false;

  int num_classes() const { return weights.rows(); }
  int num_subclasses() const { return weights.cols(); }
  /// W * p.
  std::vector<double> apply(std::span<const double> subclass_scores) const;
};

AggregationMatrix build_aggregation_matrix(const LabelHierarchy& hierarchy);

/// Dense per-pixel class predictions for whole images.
class DensePredictor {
 public:
  virtual ~DensePredictor() = default;
  virtual bool ready() const = 0;
  virtual LabelMap predict(const LabeledImage& image) const = 0;
};

/// Images labeled below `labeled_threshold` get every unlabeled pixel replaced by
/// the predictor's label; all other pixels and images are left untouched.
std::vector<LabeledImage> infill_unlabeled(const std::vector<LabeledImage>& images, const DensePredictor& predictor,
                                           double labeled_threshold = 0.9);

std::string provenance_name(Provenance p);
Provenance parse_provenance(const std::string& name);

/// Stable text form of the hierarchy.
std::string serialize_hierarchy(const LabelHierarchy& hierarchy);
LabelHierarchy parse_hierarchy(const std::string& text);
void write_hierarchy(const std::filesystem::path& path, const LabelHierarchy& hierarchy);
LabelHierarchy read_hierarchy(const std::filesystem::path& path);
/// Short content hash identifying a hierarchy, stored in checkpoints.
std::string hierarchy_id(const LabelHierarchy& hierarchy);

}  // namespace semctx
