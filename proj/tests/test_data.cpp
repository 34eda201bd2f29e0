#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "semctx/augmentation.hpp"
#include "semctx/dataset_io.hpp"
#include "semctx/rng.hpp"
#include "test_util.hpp"

using namespace semctx;
using semctx::testing::TempDir;
using semctx::testing::uniform_image;

namespace {

ClassCatalog catalog(int n) {
  ClassCatalog c;
  for (int i = 0; i < n; ++i) c.names.push_back("c" + std::to_string(i));
  return c;
}

LabeledImage random_image(const std::string& id, int rows, int cols, int classes, std::uint64_t seed,
                          double unlabeled = 0.0) {
  Rng rng(seed);
  LabeledImage img;
  img.id = id;
  img.pixels = RgbImage(rows, cols);
  img.labels = LabelMap(rows, cols);
  for (double& v : img.pixels.data()) v = std::round(rng.uniform() * 255.0) / 255.0;
  for (int& l : img.labels.data()) {
    l = rng.bernoulli(unlabeled) ? kUnlabeled : static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  }
  return img;
}

}  // namespace

TEST(DataModel, FullyLabeledImageAccepted) {
  auto ds = Dataset::validate({uniform_image("a", 8, 8, 1)}, catalog(3));
  EXPECT_DOUBLE_EQ(ds.labeled_fraction(0), 1.0);
  EXPECT_EQ(ds.find("a"), std::optional<std::size_t>(0));
  EXPECT_FALSE(ds.find("b").has_value());
}

TEST(DataModel, OutOfRangeLabelRejectedWithPixel) {
  auto img = uniform_image("bad", 8, 8, 0);
  img.labels(3, 5) = 3;
  try {
    Dataset::validate({img}, catalog(3));
    FAIL() << "expected rejection";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("bad"), std::string::npos);
    EXPECT_NE(msg.find("3"), std::string::npos);
    EXPECT_NE(msg.find("5"), std::string::npos);
  }
}

TEST(DataModel, ShapeMismatchAndDuplicatesRejected) {
  auto img = uniform_image("a", 8, 8, 0);
  img.labels = LabelMap(8, 7, 0);
  EXPECT_THROW(Dataset::validate({img}, catalog(2)), DataError);
  EXPECT_THROW(Dataset::validate({uniform_image("a", 4, 4, 0), uniform_image("a", 4, 4, 0)}, catalog(2)), DataError);
  EXPECT_THROW(Dataset::validate({}, catalog(2)), DataError);
}

TEST(DataModel, CatalogNamesMustBeUnique) {
  ClassCatalog c;
  c.names = {"sky", "sky"};
  EXPECT_THROW(c.validate(), DataError);
}

TEST(DataModel, SiftFlowLikeMetadataAccepted) {
  std::vector<LabeledImage> images;
  for (int i = 0; i < 3; ++i) images.push_back(random_image("img" + std::to_string(i), 256, 256, 33, 10 + i, 0.08));
  EXPECT_NO_THROW(Dataset::validate(images, catalog(33)));
}

TEST(DataModel, LabeledFractionMatchesBruteForce) {
  auto img = random_image("x", 13, 17, 4, 5, 0.3);
  long labeled = 0;
  for (int r = 0; r < 13; ++r) {
    for (int c = 0; c < 17; ++c) labeled += img.labels(r, c) != kUnlabeled;
  }
  auto ds = Dataset::validate({img}, catalog(4));
  EXPECT_DOUBLE_EQ(ds.labeled_fraction(0), static_cast<double>(labeled) / (13 * 17));
}

TEST(DataModel, ValidationIsOrderIndependent) {
  std::vector<LabeledImage> images;
  for (int i = 0; i < 5; ++i) images.push_back(random_image("i" + std::to_string(i), 9, 11, 3, 100 + i));
  auto a = Dataset::validate(images, catalog(3));
  std::reverse(images.begin(), images.end());
  auto b = Dataset::validate(images, catalog(3));
  EXPECT_EQ(a.channel_mean(), b.channel_mean());
  for (int i = 0; i < 5; ++i) {
    const std::string id = "i" + std::to_string(i);
    EXPECT_EQ(a.labeled_fraction(*a.find(id)), b.labeled_fraction(*b.find(id)));
  }
}

TEST(DataModel, HyperparameterDefaults) {
  Hyperparameters h;
  EXPECT_EQ(h.rho, 0.93);
  EXPECT_EQ(h.roi_size, std::optional<int>(129));
  EXPECT_EQ(h.alpha, 1.0);
  EXPECT_EQ(h.beta, 0.00025);
  EXPECT_EQ(h.patch_size, 227);
  EXPECT_EQ(h.batch_size, 64);
  EXPECT_EQ(h.lr0, 0.001);
  EXPECT_EQ(h.lr_step, 20000);
  EXPECT_EQ(h.lr_factor, 10.0);
  h.roi_size = 128;
  EXPECT_THROW(h.validate(), DataError);
}

TEST(Rng, DerivedStreamsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(1, "a", 2), derive_seed(1, "a", 2));
  EXPECT_NE(derive_seed(1, "a", 2), derive_seed(1, "a", 3));
  EXPECT_NE(derive_seed(1, "a", 2), derive_seed(1, "b", 2));
  EXPECT_NE(derive_seed(1, "a", 2), derive_seed(2, "a", 2));
  Rng r1(42), r2(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(r1.next(), r2.next());
  Rng r(7);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto v = r.below(5);
    ASSERT_LT(v, 5u);
    seen.insert(v);
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  EXPECT_EQ(seen.size(), 5u);
}

TEST(DatasetIo, PpmAndLabelMapsRoundTrip) {
  TempDir dir("io");
  auto img = random_image("r", 7, 9, 5, 3, 0.2);
  write_ppm(dir.path() / "a.ppm", img.pixels);
  EXPECT_EQ(read_ppm(dir.path() / "a.ppm"), img.pixels);
  write_label_map(dir.path() / "a.pgm", img.labels);
  EXPECT_EQ(read_label_map(dir.path() / "a.pgm"), img.labels);
  write_label_map(dir.path() / "a.txt", img.labels);
  EXPECT_EQ(read_label_map(dir.path() / "a.txt"), img.labels);
}

TEST(DatasetIo, ManifestRoundTripAndLoad) {
  TempDir dir("manifest");
  auto a = random_image("a", 6, 5, 3, 1);
  auto b = random_image("b", 4, 8, 3, 2);
  a.scene_name = "coast";
  write_ppm(dir.path() / "a.ppm", a.pixels);
  write_ppm(dir.path() / "b.ppm", b.pixels);
  write_label_map(dir.path() / "a.pgm", a.labels);
  write_label_map(dir.path() / "b.txt", b.labels);
  write_class_list(dir.path() / "classes.txt", catalog(3));
  std::vector<ManifestEntry> entries{{"a", dir.path() / "a.ppm", dir.path() / "a.pgm", "coast"},
                                     {"b", dir.path() / "b.ppm", dir.path() / "b.txt", std::nullopt}};
  write_manifest(dir.path() / "m.tsv", entries);
  const auto back = read_manifest(dir.path() / "m.tsv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].scene_name, std::optional<std::string>("coast"));
  EXPECT_FALSE(back[1].scene_name.has_value());
  const auto ds = load_dataset(dir.path() / "m.tsv", dir.path() / "classes.txt");
  ASSERT_EQ(ds.images().size(), 2u);
  EXPECT_EQ(ds.images()[0].labels, a.labels);
  EXPECT_EQ(ds.images()[1].pixels, b.pixels);
  EXPECT_EQ(ds.images()[0].scene_name, a.scene_name);
  EXPECT_EQ(ds.catalog().names, catalog(3).names);
}

TEST(DatasetIo, MissingFileIsDataError) {
  TempDir dir("missing");
  EXPECT_THROW(read_ppm(dir.path() / "none.ppm"), DataError);
  EXPECT_THROW(read_manifest(dir.path() / "none.tsv"), DataError);
}

TEST(Augmentation, DefaultsMatchReferenceRanges) {
  AugmentationConfig cfg;
  EXPECT_EQ(cfg.n_copies, 5);
  EXPECT_EQ(cfg.scale_min, 0.9);
  EXPECT_EQ(cfg.scale_max, 1.1);
  EXPECT_EQ(cfg.rotation_min_deg, -8.0);
  EXPECT_EQ(cfg.rotation_max_deg, 8.0);
  EXPECT_EQ(cfg.flip_probability, 0.5);
}

TEST(Augmentation, IdentityDrawReturnsInput) {
  auto img = random_image("x", 12, 15, 3, 9);
  const auto out = apply_augmentation(img, AugmentParams{1.0, 0.0, false});
  EXPECT_EQ(out.pixels, img.pixels);
  EXPECT_EQ(out.labels, img.labels);
}

TEST(Augmentation, FlipMirrorsLabels) {
  auto img = random_image("x", 12, 15, 3, 9);
  const auto out = apply_augmentation(img, AugmentParams{1.0, 0.0, true});
  for (int r = 0; r < 12; ++r) {
    for (int c = 0; c < 15; ++c) {
      ASSERT_EQ(out.labels(r, c), img.labels(r, 14 - c));
      ASSERT_EQ(out.pixels.get(r, c), img.pixels.get(r, 14 - c));
    }
  }
}

TEST(Augmentation, ScaleGrowsLabelCountsQuadratically) {
  LabeledImage img = uniform_image("two", 100, 100, 0);
  for (int r = 20; r < 70; ++r) {
    for (int c = 30; c < 90; ++c) img.labels(r, c) = 1;
  }
  const auto out = apply_augmentation(img, AugmentParams{1.1, 0.0, false});
  ASSERT_EQ(out.rows(), 110);
  ASSERT_EQ(out.cols(), 110);
  long before[2] = {0, 0}, after[2] = {0, 0};
  for (int l : img.labels.data()) ++before[l];
  for (int l : out.labels.data()) {
    ASSERT_NE(l, kUnlabeled);
    ++after[l];
  }
  for (int k = 0; k < 2; ++k) {
    const double ratio = static_cast<double>(after[k]) / before[k];
    EXPECT_NEAR(ratio, 1.21, 1.21 * 0.05) << "class " << k;
  }
}

TEST(Augmentation, OutsidePixelsAreUnlabeledAndMean) {
  auto img = random_image("x", 20, 20, 2, 4);
  const auto out = apply_augmentation(img, AugmentParams{0.9, 8.0, false});
  const Rgb mean = img.pixels.mean();
  long unlabeled = 0;
  for (int r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < out.cols(); ++c) {
      if (out.labels(r, c) == kUnlabeled) {
        ++unlabeled;
        EXPECT_EQ(out.pixels.get(r, c), mean);
      }
    }
  }
  EXPECT_GT(unlabeled, 0);
}

TEST(Augmentation, DeterministicPerImageAndCopy) {
  AugmentationConfig cfg;
  cfg.seed = 77;
  auto img = random_image("img", 16, 16, 3, 1);
  const auto a = augment_image(img, cfg, 2);
  const auto b = augment_image(img, cfg, 2);
  EXPECT_EQ(a.pixels, b.pixels);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.id, "img#aug2");
  const auto p = draw_augment_params(cfg, "img", 2);
  EXPECT_GE(p.scale, 0.9);
  EXPECT_LE(p.scale, 1.1);
  EXPECT_GE(p.rotation_deg, -8.0);
  EXPECT_LE(p.rotation_deg, 8.0);
  EXPECT_THROW(draw_augment_params(cfg, "img", 5), std::out_of_range);
}

TEST(Augmentation, ExpansionKeepsOriginals) {
  AugmentationConfig cfg;
  cfg.n_copies = 2;
  std::vector<LabeledImage> images{random_image("a", 8, 8, 2, 1), random_image("b", 8, 8, 2, 2)};
  const auto out = expand_with_augmentation(images, cfg);
  ASSERT_EQ(out.size(), 6u);
  EXPECT_EQ(out[0].id, "a");
  EXPECT_EQ(out[0].labels, images[0].labels);
  EXPECT_EQ(out[2].id, "a#aug1");
  EXPECT_EQ(out[3].id, "b");
}

TEST(Sampling, StrideSeventeenGivesFifteenSquared) {
  const auto img = uniform_image("s", 256, 256, 0);
  const auto centers = sample_centers(img, 300);
  EXPECT_EQ(centers.size(), 225u);
  for (const auto& c : centers) {
    EXPECT_TRUE(img.labels.contains(c.row, c.col));
  }
}

TEST(Sampling, FullyUnlabeledGivesNothing) {
  EXPECT_TRUE(sample_centers(uniform_image("u", 64, 64, kUnlabeled), 300).empty());
}

TEST(Sampling, SmallImageGivesCenter) {
  const auto centers = sample_centers(uniform_image("s", 10, 10, 0), 300);
  ASSERT_EQ(centers.size(), 1u);
  EXPECT_EQ(centers[0], (PixelPos{5, 5}));
}

TEST(Sampling, CollectSamplesCarriesClassLabels) {
  auto img = random_image("r", 40, 40, 3, 6, 0.2);
  const auto samples = collect_samples({img}, 16);
  for (const auto& s : samples) {
    EXPECT_EQ(s.class_label, img.labels(s.center.row, s.center.col));
    EXPECT_NE(s.class_label, kUnlabeled);
    EXPECT_EQ(s.subclass_label, kUnassigned);
  }
}

TEST(Patch, InteriorCropOfUniformImage) {
  const auto img = uniform_image("u", 64, 64, 0, 0.5);
  const auto p = extract_patch(img.pixels, {32, 32}, 31, {0.5, 0.5, 0.5});
  for (double v : p.pixels) ASSERT_EQ(v, 0.5);
  for (auto m : p.valid_mask.data()) ASSERT_EQ(m, 1);
}

TEST(Patch, CornerMaskCount) {
  for (int s : {5, 31, 227}) {
    const auto img = uniform_image("u", 300, 300, 0);
    const auto p = extract_patch(img.pixels, {0, 0}, s, {0.1, 0.2, 0.3});
    long valid = 0;
    for (auto m : p.valid_mask.data()) valid += m;
    EXPECT_EQ(valid, static_cast<long>((s + 1) / 2) * ((s + 1) / 2)) << "S=" << s;
    EXPECT_EQ(p.at(0, 0, 2), 0.3);
  }
}

TEST(Patch, ValidCountEqualsOverlapArea) {
  Rng rng(3);
  const auto img = random_image("r", 23, 31, 2, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const int s = 1 + static_cast<int>(rng.below(40));
    const PixelPos c{static_cast<int>(rng.below(23)), static_cast<int>(rng.below(31))};
    const auto p = extract_patch(img.pixels, c, s, {0, 0, 0});
    const int top = c.row - s / 2, left = c.col - s / 2;
    const long rows = std::max(0, std::min(top + s, 23) - std::max(top, 0));
    const long cols = std::max(0, std::min(left + s, 31) - std::max(left, 0));
    long valid = 0;
    for (auto m : p.valid_mask.data()) valid += m;
    ASSERT_EQ(valid, rows * cols);
  }
}
