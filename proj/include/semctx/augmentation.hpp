#pragma once

#include <cstdint>
#include <vector>

#include "semctx/data_model.hpp"

namespace semctx {

struct AugmentationConfig {
  int n_copies = 5;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double rotation_min_deg = -8.0;
  double rotation_max_deg = 8.0;
  double flip_probability = 0.5;
  std::uint64_t seed = 0;

  friend bool operator==(const AugmentationConfig&, const AugmentationConfig&) = default;
};

/// One concrete draw of the augmentation transform.
struct AugmentParams {
  double scale = 1.0;
  double rotation_deg = 0.0;
  bool flip = false;
};

/// Draw for copy `copy_index` of `image_id`; depends only on (cfg.seed, image_id, copy_index).
AugmentParams draw_augment_params(const AugmentationConfig& cfg, const std::string& image_id, int copy_index);

/// Applies scale about the image center, rotation, then horizontal flip. The
/// output is round(H*scale) x round(W*scale). Raster values are bilinear,
/// labels nearest-neighbor; output pixels whose source falls outside the input
/// get the input's mean color and kUnlabeled.
LabeledImage apply_augmentation(const LabeledImage& img, const AugmentParams& params);

/// Augmented copy `copy_index`. Its id is "<id>#aug<copy_index>".
LabeledImage augment_image(const LabeledImage& img, const AugmentationConfig& cfg, int copy_index);

/// Originals followed by cfg.n_copies augmented copies of each, image-major.
std::vector<LabeledImage> expand_with_augmentation(const std::vector<LabeledImage>& images,
                                                   const AugmentationConfig& cfg);

/// Grid of patch centers with stride round(sqrt(target_pixels_per_cell)), centered
/// in the image. Centers on unlabeled pixels are dropped. A dimension shorter
/// than one stride contributes a single center at its midpoint.
std::vector<PixelPos> sample_centers(const LabeledImage& img, int target_pixels_per_cell);

/// Training samples for every image, in image order then grid order.
std::vector<TrainingSample> collect_samples(const std::vector<LabeledImage>& images, int target_pixels_per_cell);

struct Patch {
  int size = 0;
  /// size x size x 3, interleaved like RgbImage.
  std::vector<double> pixels;
  Grid<unsigned char> valid_mask;

  double at(int r, int c, int ch) const { return pixels[(static_cast<std::size_t>(r) * size + c) * 3 + ch]; }
};

/// S x S crop whose pixel (S/2, S/2) sits on `center`; outside positions get `mean`.
Patch extract_patch(const RgbImage& image, PixelPos center, int patch_size, const Rgb& mean);

}  // namespace semctx
