#include "semctx/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "semctx/rng.hpp"

namespace semctx {

AugmentParams draw_augment_params(const AugmentationConfig& cfg, const std::string& image_id, int copy_index) {
  if (copy_index < 0 || copy_index >= cfg.n_copies) {
    throw std::out_of_range("augmentation copy index " + std::to_string(copy_index) + " outside [0, " +
                            std::to_string(cfg.n_copies) + ")");
  }
  Rng rng(derive_seed(derive_seed(cfg.seed, "augment", image_id), "copy", static_cast<std::uint64_t>(copy_index)));
  AugmentParams p;
  p.scale = rng.uniform(cfg.scale_min, cfg.scale_max);
  p.rotation_deg = rng.uniform(cfg.rotation_min_deg, cfg.rotation_max_deg);
  p.flip = rng.bernoulli(cfg.flip_probability);
  return p;
}

LabeledImage apply_augmentation(const LabeledImage& img, const AugmentParams& params) {
  const int in_rows = img.rows();
  const int in_cols = img.cols();
  const int out_rows = std::max(1, static_cast<int>(std::lround(in_rows * params.scale)));
  const int out_cols = std::max(1, static_cast<int>(std::lround(in_cols * params.scale)));
  const Rgb mean = img.pixels.mean();

  LabeledImage out;
  out.id = img.id;
  out.scene_name = img.scene_name;
  out.pixels = RgbImage(out_rows, out_cols, mean);
  out.labels = LabelMap(out_rows, out_cols, kUnlabeled);

  const double theta = params.rotation_deg * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double in_cr = (in_rows - 1) / 2.0;
  const double in_cc = (in_cols - 1) / 2.0;
  const double out_cr = (out_rows - 1) / 2.0;
  const double out_cc = (out_cols - 1) / 2.0;

  for (int r = 0; r < out_rows; ++r) {
    for (int c = 0; c < out_cols; ++c) {
      const int cc = params.flip ? out_cols - 1 - c : c;
      // Inverse map: undo rotation, then scale, around the centers.
      const double dy = r - out_cr;
      const double dx = cc - out_cc;
      const double sy = (cos_t * dy - sin_t * dx) / params.scale + in_cr;
      const double sx = (sin_t * dy + cos_t * dx) / params.scale + in_cc;
      const long nr = std::lround(sy);
      const long nc = std::lround(sx);
      if (nr < 0 || nc < 0 || nr >= in_rows || nc >= in_cols) continue;
      out.labels(r, c) = img.labels(static_cast<int>(nr), static_cast<int>(nc));

      const double y = std::clamp(sy, 0.0, static_cast<double>(in_rows - 1));
      const double x = std::clamp(sx, 0.0, static_cast<double>(in_cols - 1));
      const int y0 = static_cast<int>(std::floor(y));
      const int x0 = static_cast<int>(std::floor(x));
      const int y1 = std::min(y0 + 1, in_rows - 1);
      const int x1 = std::min(x0 + 1, in_cols - 1);
      const double fy = y - y0;
      const double fx = x - x0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = img.pixels.at(y0, x0, ch) * (1.0 - fx) + img.pixels.at(y0, x1, ch) * fx;
        const double bottom = img.pixels.at(y1, x0, ch) * (1.0 - fx) + img.pixels.at(y1, x1, ch) * fx;
        out.pixels.at(r, c, ch) = fy == 0.0 ? top : top * (1.0 - fy) + bottom * fy;
      }
    }
  }
  return out;
}

LabeledImage augment_image(const LabeledImage& img, const AugmentationConfig& cfg, int copy_index) {
  auto out = apply_augmentation(img, draw_augment_params(cfg, img.id, copy_index));
  out.id = img.id + "#aug" + std::to_string(copy_index);
  return out;
}

std::vector<LabeledImage> expand_with_augmentation(const std::vector<LabeledImage>& images,
                                                   const AugmentationConfig& cfg) {
  std::vector<LabeledImage> out;
  out.reserve(images.size() * static_cast<std::size_t>(1 + cfg.n_copies));
  for (const auto& img : images) {
    out.push_back(img);
    for (int k = 0; k < cfg.n_copies; ++k) out.push_back(augment_image(img, cfg, k));
  }
  return out;
}

std::vector<PixelPos> sample_centers(const LabeledImage& img, int target_pixels_per_cell) {
  if (target_pixels_per_cell < 1) throw std::invalid_argument("target_pixels_per_cell must be >= 1");
  const int stride = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(target_pixels_per_cell)))));
  auto axis = [stride](int extent) {
    std::vector<int> pos;
    const int cells = extent / stride;
    if (cells == 0) {
      pos.push_back(extent / 2);
      return pos;
    }
    const int offset = (extent - cells * stride) / 2 + stride / 2;
    for (int i = 0; i < cells; ++i) pos.push_back(offset + i * stride);
    return pos;
  };
  std::vector<PixelPos> centers;
  for (int r : axis(img.rows())) {
    for (int c : axis(img.cols())) {
      if (img.labels(r, c) != kUnlabeled) centers.push_back({r, c});
    }
  }
  return centers;
}

std::vector<TrainingSample> collect_samples(const std::vector<LabeledImage>& images, int target_pixels_per_cell) {
  std::vector<TrainingSample> samples;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (const auto& p : sample_centers(images[i], target_pixels_per_cell)) {
      TrainingSample s;
      s.image_id = images[i].id;
      s.image_index = i;
      s.center = p;
      s.class_label = images[i].labels(p.row, p.col);
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

Patch extract_patch(const RgbImage& image, PixelPos center, int patch_size, const Rgb& mean) {
  Patch p;
  p.size = patch_size;
  p.pixels.resize(static_cast<std::size_t>(patch_size) * patch_size * 3);
  p.valid_mask = Grid<unsigned char>(patch_size, patch_size, 0);
  const int half = patch_size / 2;
  for (int i = 0; i < patch_size; ++i) {
    const int r = center.row - half + i;
    for (int j = 0; j < patch_size; ++j) {
      const int c = center.col - half + j;
      double* dst = &p.pixels[(static_cast<std::size_t>(i) * patch_size + j) * 3];
      if (r >= 0 && c >= 0 && r < image.rows() && c < image.cols()) {
        for (int ch = 0; ch < 3; ++ch) dst[ch] = image.at(r, c, ch);
        p.valid_mask(i, j) = 1;
      } else {
        for (int ch = 0; ch < 3; ++ch) dst[ch] = mean[ch];
      }
    }
  }
  return p;
}

}  // namespace semctx
