#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

#include "semctx/data_model.hpp"

namespace semctx::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("semctx_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline LabeledImage uniform_image(const std::string& id, int rows, int cols, int label, double value = 0.5) {
  LabeledImage img;
  img.id = id;
  img.pixels = RgbImage(rows, cols, {value, value, value});
  img.labels = LabelMap(rows, cols, label);
  return img;
}

}  // namespace semctx::testing
