#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semctx/data_model.hpp"

namespace semctx {

/// Planted-subclass dataset. Every banded class appears in `contexts` distinct
/// contexts; context k pairs classes according to round k of a round-robin
/// tournament and draws the pair as alternating bands (horizontal for even k,
/// vertical for odd k). Class c in context k is painted with palette color
/// (c + k) mod classes and a checker texture of cell size k + 2, so color alone
/// does not identify the class. Rare classes are small squares painted on top.
struct SynthSpec {
  int classes = 4;
  int contexts = 2;
  int rare_classes = 1;
  int train_images = 200;
  int test_images = 50;
  int size = 64;
  /// Standard deviation of additive pixel noise. Zero also fixes the geometry
  /// (band width, phase and square positions).
  double noise = 0.05;
  /// Approximate pixel share of all rare classes together.
  double rare_fraction = 0.08;
  /// Share of each image's rows whose labels are masked as unlabeled.
  double unlabeled_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  int num_classes() const { return classes + rare_classes; }
  friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

struct SynthImageInfo {
  std::string image_id;
  int context = 0;
  int class_a = 0;
  /// -1 when class_a has no partner in this round.
  int class_b = -1;
};

struct SynthDataset {
  ClassCatalog catalog;
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> test;
  std::vector<SynthImageInfo> train_info;
  std::vector<SynthImageInfo> test_info;
};

/// Partner of `cls` in round `round` of the tournament over `classes`
/// classes, or -1 for a bye.
int round_robin_partner(int classes, int round, int cls);
/// Number of distinct rounds available for `classes` classes.
int round_robin_rounds(int classes);

/// Scene name recorded for context k.
std::string context_scene_name(int context);

SynthDataset generate_synthetic(const SynthSpec& spec);

/// Writes classes.txt, train.tsv, test.tsv, contexts.tsv, images/ and labels/.
void write_synthetic(const std::filesystem::path& dir, const SynthDataset& data);

}  // namespace semctx
