#include "semctx/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "semctx/dataset_io.hpp"
#include "semctx/rng.hpp"

namespace semctx {
namespace {

constexpr int kFixedBandWidth = 9;
constexpr int kMinBandWidth = 6;
constexpr int kMaxBandWidth = 12;

Rgb hue_color(double hue) {
  // Fully saturated color at 0.85 value.
  const double h = 6.0 * (hue - std::floor(hue));
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double v = 0.85;
  const double lo = 0.15;
  const double up = lo + (v - lo) * f;
  const double down = v - (v - lo) * f;
  switch (sector) {
    case 0: return {v, up, lo};
    case 1: return {down, v, lo};
    case 2: return {lo, v, up};
    case 3: return {lo, down, v};
    case 4: return {up, lo, v};
    default: return {v, lo, down};
  }
}

Rgb band_color(int palette_size, int index) { return hue_color(static_cast<double>(index) / palette_size); }

Rgb rare_color(int rare_index, int rare_count) {
  const double g = 0.35 + 0.4 * (rare_count > 1 ? static_cast<double>(rare_index) / (rare_count - 1) : 0.5);
  return {g, g, g};
}

double checker(int r, int c, int cell) { return ((r / cell + c / cell) % 2 == 0) ? 1.1 : 0.9; }

LabeledImage render(const SynthSpec& spec, const std::string& id, std::uint64_t stream, SynthImageInfo& info) {
  Rng rng(stream);
  const int n = spec.size;
  const bool jitter = spec.noise > 0.0;
  const int rounds = std::min(spec.contexts, round_robin_rounds(spec.classes));
  const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(rounds)));

  // Classes that lead a pair (or a bye) in round k.
  std::vector<int> leaders;
  for (int c = 0; c < spec.classes; ++c) {
    const int p = round_robin_partner(spec.classes, k, c);
    if (p < 0 || c < p) leaders.push_back(c);
  }
  const int a = leaders[rng.below(leaders.size())];
  const int b = round_robin_partner(spec.classes, k, a);
  info = {id, k, a, b};

  LabeledImage img;
  img.id = id;
  img.scene_name = context_scene_name(k);
  img.pixels = RgbImage(n, n);
  img.labels = LabelMap(n, n, a);

  // Band boundaries along the axis perpendicular to the bands.
  std::vector<int> band_of(static_cast<std::size_t>(n));
  {
    int pos = jitter ? -static_cast<int>(rng.below(kMaxBandWidth)) : 0;
    int band = jitter ? static_cast<int>(rng.below(2)) : 0;
    while (pos < n) {
      const int width = jitter ? kMinBandWidth + static_cast<int>(rng.below(kMaxBandWidth - kMinBandWidth + 1))
                               : kFixedBandWidth;
      for (int i = std::max(pos, 0); i < std::min(pos + width, n); ++i) band_of[static_cast<std::size_t>(i)] = band;
      pos += width;
      band ^= 1;
    }
  }
  const bool horizontal = k % 2 == 0;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const int band = band_of[static_cast<std::size_t>(horizontal ? r : c)];
      const int cls = (band == 1 && b >= 0) ? b : a;
      img.labels(r, c) = cls;
      const Rgb base = band_color(spec.classes, (cls + k) % spec.classes);
      const double t = checker(r, c, k + 2);
      for (int ch = 0; ch < 3; ++ch) img.pixels.at(r, c, ch) = base[static_cast<std::size_t>(ch)] * t;
    }
  }

  if (spec.rare_classes > 0 && spec.rare_fraction > 0.0) {
    const int side = std::max(2, n / 8);
    const int squares = std::max(1, static_cast<int>(std::lround(spec.rare_fraction * n * n / (side * side))));
    const int per_row = std::max(1, n / (2 * side));
    for (int s = 0; s < squares; ++s) {
      int r0, c0;
      if (jitter) {
        r0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - side + 1)));
        c0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - side + 1)));
      } else {
        r0 = std::min(n - side, (s / per_row) * 2 * side + side / 2);
        c0 = std::min(n - side, (s % per_row) * 2 * side + side / 2);
      }
      const int rare = spec.classes + s % spec.rare_classes;
      const Rgb color = rare_color(s % spec.rare_classes, spec.rare_classes);
      for (int r = r0; r < r0 + side; ++r) {
        for (int c = c0; c < c0 + side; ++c) {
          img.labels(r, c) = rare;
          img.pixels.set(r, c, color);
        }
      }
    }
  }

  if (jitter) {
    for (double& v : img.pixels.data()) v = std::clamp(v + spec.noise * rng.normal(), 0.0, 1.0);
  } else {
    for (double& v : img.pixels.data()) v = std::clamp(v, 0.0, 1.0);
  }

  const int masked = static_cast<int>(std::lround(spec.unlabeled_fraction * n));
  if (masked > 0) {
    const int r0 = jitter ? static_cast<int>(rng.below(static_cast<std::uint64_t>(n - masked + 1))) : 0;
    for (int r = r0; r < r0 + masked; ++r) {
      for (int c = 0; c < n; ++c) img.labels(r, c) = kUnlabeled;
    }
  }
  return img;
}

std::string padded(int i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

}  // namespace

void SynthSpec::validate() const {
  if (classes < 1) throw std::invalid_argument("need at least one banded class");
  if (contexts < 1) throw std::invalid_argument("contexts must be at least 1");
  if (contexts > round_robin_rounds(classes)) {
    throw std::invalid_argument(std::to_string(classes) + " classes allow at most " +
                                std::to_string(round_robin_rounds(classes)) + " contexts per class");
  }
  if (rare_classes < 0) throw std::invalid_argument("rare class count must be non-negative");
  if (train_images < 0 || test_images < 0) throw std::invalid_argument("image counts must be non-negative");
  if (size < 16) throw std::invalid_argument("image size must be at least 16");
  if (noise < 0.0) throw std::invalid_argument("noise must be non-negative");
  if (rare_fraction < 0.0 || rare_fraction >= 1.0) throw std::invalid_argument("rare_fraction must be in [0, 1)");
  if (unlabeled_fraction < 0.0 || unlabeled_fraction >= 1.0) {
    throw std::invalid_argument("unlabeled_fraction must be in [0, 1)");
  }
}

int round_robin_rounds(int classes) { return classes % 2 == 0 ? std::max(classes - 1, 1) : classes; }

int round_robin_partner(int classes, int round, int cls) {
  if (classes < 2) return -1;
  // Circle method: slot m is fixed, the rest rotate; an odd count adds a bye slot.
  const int m = classes % 2 == 0 ? classes : classes + 1;
  const int rot = m - 1;
  const int r = round % rot;
  int partner;
  if (cls == m - 1) {
    partner = r;
  } else if (cls == r) {
    partner = m - 1;
  } else {
    partner = ((2 * r - cls) % rot + rot) % rot;
  }
  return partner >= classes ? -1 : partner;
}

std::string context_scene_name(int context) { return "ctx" + std::to_string(context); }

SynthDataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  SynthDataset out;
  for (int c = 0; c < spec.classes; ++c) out.catalog.names.push_back("class" + std::to_string(c));
  for (int c = 0; c < spec.rare_classes; ++c) out.catalog.names.push_back("rare" + std::to_string(c));
  auto make = [&](const std::string& split, int count, std::vector<LabeledImage>& images,
                  std::vector<SynthImageInfo>& info) {
    for (int i = 0; i < count; ++i) {
      const std::string id = split + "_" + padded(i);
      SynthImageInfo meta;
      images.push_back(render(spec, id, derive_seed(spec.seed, "synth-" + split, static_cast<std::uint64_t>(i)), meta));
      info.push_back(meta);
    }
  };
  make("train", spec.train_images, out.train, out.train_info);
  make("test", spec.test_images, out.test, out.test_info);
  return out;
}

void write_synthetic(const std::filesystem::path& dir, const SynthDataset& data) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");
  write_class_list(dir / "classes.txt", data.catalog);
  auto write_split = [&](const std::string& name, const std::vector<LabeledImage>& images) {
    std::vector<ManifestEntry> entries;
    for (const auto& img : images) {
      const fs::path image_path = dir / "images" / (img.id + ".ppm");
      const fs::path label_path = dir / "labels" / (img.id + ".pgm");
      write_ppm(image_path, img.pixels);
      write_label_map(label_path, img.labels);
      entries.push_back({img.id, image_path, label_path, img.scene_name});
    }
    write_manifest(dir / (name + ".tsv"), entries);
  };
  write_split("train", data.train);
  write_split("test", data.test);
  std::ofstream ctx(dir / "contexts.tsv", std::ios::binary);
  if (!ctx) throw DataError("cannot write '" + (dir / "contexts.tsv").string() + "'");
  ctx << "image_id\tcontext\tclass_a\tclass_b\n";
  for (const auto* infos : {&data.train_info, &data.test_info}) {
    for (const auto& i : *infos) ctx << i.image_id << '\t' << i.context << '\t' << i.class_a << '\t' << i.class_b << '\n';
  }
}

}  // namespace semctx
