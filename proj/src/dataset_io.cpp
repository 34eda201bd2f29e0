#include "semctx/dataset_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace semctx {
namespace fs = std::filesystem;
namespace {

constexpr int kPgmUnlabeled = 255;

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

// Reads the next header token of a netpbm file, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

struct PnmHeader {
  std::string magic;
  int cols = 0;
  int rows = 0;
};

PnmHeader read_pnm_header(std::istream& in, const fs::path& path, const std::string& expected) {
  PnmHeader h;
  h.magic = pnm_token(in);
  if (h.magic != expected) throw DataError("'" + path.string() + "' is not a " + expected + " file");
  try {
    h.cols = std::stoi(pnm_token(in));
    h.rows = std::stoi(pnm_token(in));
    if (std::stoi(pnm_token(in)) != 255) throw DataError("'" + path.string() + "': only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw DataError("'" + path.string() + "': malformed header");
  }
  if (h.cols <= 0 || h.rows <= 0) throw DataError("'" + path.string() + "': bad dimensions");
  return h;
}

std::vector<unsigned char> read_bytes(std::istream& in, std::size_t n, const fs::path& path) {
  std::vector<unsigned char> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw DataError("'" + path.string() + "': truncated pixel data");
  return buf;
}

LabelMap read_pgm_labels(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  const auto h = read_pnm_header(in, path, "P5");
  const auto buf = read_bytes(in, static_cast<std::size_t>(h.rows) * h.cols, path);
  LabelMap labels(h.rows, h.cols);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    labels.data()[i] = buf[i] == kPgmUnlabeled ? kUnlabeled : static_cast<int>(buf[i]);
  }
  return labels;
}

LabelMap read_text_labels(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<int>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<int> row;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stoi(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::logic_error&) {
        throw DataError("'" + path.string() + "': bad label token '" + tok + "'");
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("'" + path.string() + "': empty label grid");
  LabelMap labels(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) throw DataError("'" + path.string() + "': ragged label grid");
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const int v = rows[r][c];
      labels(static_cast<int>(r), static_cast<int>(c)) = v < 0 ? kUnlabeled : v;
    }
  }
  return labels;
}

std::string trim_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

RgbImage read_ppm(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  const auto h = read_pnm_header(in, path, "P6");
  const auto buf = read_bytes(in, static_cast<std::size_t>(h.rows) * h.cols * 3, path);
  RgbImage img(h.rows, h.cols);
  for (std::size_t i = 0; i < buf.size(); ++i) img.data()[i] = static_cast<double>(buf[i]) / 255.0;
  return img;
}

void write_ppm(const fs::path& path, const RgbImage& image) {
  auto out = open_out(path, std::ios::binary);
  out << "P6\n" << image.cols() << " " << image.rows() << "\n255\n";
  std::vector<unsigned char> buf(image.data().size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const double v = std::clamp(image.data()[i], 0.0, 1.0);
    buf[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

LabelMap read_label_map(const fs::path& path) {
  if (path.extension() == ".txt") return read_text_labels(path);
  return read_pgm_labels(path);
}

void write_label_map(const fs::path& path, const LabelMap& labels) {
  if (path.extension() == ".txt") {
    auto out = open_out(path);
    for (int r = 0; r < labels.rows(); ++r) {
      for (int c = 0; c < labels.cols(); ++c) {
        if (c) out << ' ';
        out << labels(r, c);
      }
      out << '\n';
    }
    return;
  }
  auto out = open_out(path, std::ios::binary);
  out << "P5\n" << labels.cols() << " " << labels.rows() << "\n255\n";
  std::vector<unsigned char> buf(labels.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const int v = labels.data()[i];
    if (v == kUnlabeled) {
      buf[i] = kPgmUnlabeled;
    } else if (v < 0 || v >= kPgmUnlabeled) {
      throw DataError("label " + std::to_string(v) + " does not fit a PGM label map; use a .txt grid");
    } else {
      buf[i] = static_cast<unsigned char>(v);
    }
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

ClassCatalog read_class_list(const fs::path& path) {
  auto in = open_in(path);
  ClassCatalog catalog;
  std::string line;
  while (std::getline(in, line)) {
    line = trim_cr(line);
    if (line.empty()) continue;
    catalog.names.push_back(line);
  }
  catalog.validate();
  return catalog;
}

void write_class_list(const fs::path& path, const ClassCatalog& catalog) {
  auto out = open_out(path);
  for (const auto& n : catalog.names) out << n << '\n';
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  auto in = open_in(path);
  const fs::path base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_cr(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4) {
      throw DataError("'" + path.string() + "' line " + std::to_string(line_no) + ": expected 4 tab-separated fields");
    }
    ManifestEntry e;
    e.image_id = fields[0];
    e.image_path = base / fields[1];
    e.labelmap_path = base / fields[2];
    if (fields[3] != "-") e.scene_name = fields[3];
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  auto out = open_out(path);
  const fs::path base = fs::absolute(path).parent_path();
  auto rel = [&](const fs::path& p) {
    const auto r = fs::absolute(p).lexically_relative(base);
    return r.empty() ? p.generic_string() : r.generic_string();
  };
  for (const auto& e : entries) {
    out << e.image_id << '\t' << rel(e.image_path) << '\t' << rel(e.labelmap_path) << '\t'
        << e.scene_name.value_or("-") << '\n';
  }
}

std::vector<LabeledImage> load_images(const fs::path& manifest) {
  std::vector<LabeledImage> images;
  for (const auto& e : read_manifest(manifest)) {
    LabeledImage img;
    img.id = e.image_id;
    img.pixels = read_ppm(e.image_path);
    img.labels = read_label_map(e.labelmap_path);
    img.scene_name = e.scene_name;
    images.push_back(std::move(img));
  }
  return images;
}

Dataset load_dataset(const fs::path& manifest, const fs::path& classes) {
  return Dataset::validate(load_images(manifest), read_class_list(classes));
}

}  // namespace semctx
