#include "drgrad/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "drgrad/rng.hpp"

namespace drgrad {
namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4))
    throw IoError("truncated IDX file: " + path);
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(buf), 4);
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void finalize_dataset(Dataset& ds) {
  ds.per_class_index.assign(ds.num_classes, {});
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int i = 0; i < ds.size(); ++i) {
    Example& e = ds.examples[i];
    if (e.label < 0 || e.label >= ds.num_classes)
      throw DataError("label out of range at index " + std::to_string(i));
    e.index = i;
    ds.per_class_index[e.label].push_back(i);
    h = fnv1a(h, &e.label, sizeof(e.label));
    h = fnv1a(h, e.features.data(), sizeof(double) * e.features.size());
  }
  ds.source_digest = h;
}

IdxHeader read_idx_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  IdxHeader hdr;
  hdr.magic = read_be32(in, path);
  const std::uint32_t ndims = hdr.magic & 0xff;
  if ((hdr.magic >> 8) != 0x08 || ndims == 0 || ndims > 4)
    throw FormatError("bad IDX magic in " + path);
  for (std::uint32_t d = 0; d < ndims; ++d)
    hdr.dims.push_back(read_be32(in, path));
  return hdr;
}

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot open " + labels_path);

  if (read_be32(img, images_path) != kImagesMagic)
    throw FormatError("wrong magic in images file " + images_path);
  const std::uint32_t n = read_be32(img, images_path);
  const std::uint32_t rows = read_be32(img, images_path);
  const std::uint32_t cols = read_be32(img, images_path);

  if (read_be32(lab, labels_path) != kLabelsMagic)
    throw FormatError("wrong magic in labels file " + labels_path);
  const std::uint32_t n_lab = read_be32(lab, labels_path);
  if (n != n_lab)
    throw DataError("image/label count mismatch: " + std::to_string(n) +
                    " vs " + std::to_string(n_lab));

  const std::size_t dim = std::size_t(rows) * cols;
  std::vector<unsigned char> pix(dim);
  Dataset ds;
  ds.name = images_path;
  ds.examples.reserve(n);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!img.read(reinterpret_cast<char*>(pix.data()), dim))
      throw IoError("truncated IDX file: " + images_path);
    char c;
    if (!lab.read(&c, 1)) throw IoError("truncated IDX file: " + labels_path);
    Example e;
    e.label = static_cast<unsigned char>(c);
    max_label = std::max(max_label, e.label);
    e.features = Vector(dim);
    for (std::size_t k = 0; k < dim; ++k)
      e.features[k] = pix[k] / 255.0;
    ds.examples.push_back(std::move(e));
  }
  ds.num_classes = max_label + 1;
  finalize_dataset(ds);
  return ds;
}

void write_idx(const Dataset& ds, int rows, int cols,
               const std::string& images_path,
               const std::string& labels_path) {
  if (ds.feature_dim() != rows * cols)
    throw DimensionError("write_idx: feature dim != rows*cols");
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot open " + images_path + " for writing");
  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot open " + labels_path + " for writing");

  write_be32(img, kImagesMagic);
  write_be32(img, static_cast<std::uint32_t>(ds.size()));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  write_be32(lab, kLabelsMagic);
  write_be32(lab, static_cast<std::uint32_t>(ds.size()));

  std::vector<unsigned char> pix(ds.feature_dim());
  for (const Example& e : ds.examples) {
    for (int k = 0; k < ds.feature_dim(); ++k)
      pix[k] = static_cast<unsigned char>(std::lround(e.features[k] * 255.0));
    img.write(reinterpret_cast<char*>(pix.data()), pix.size());
    char c = static_cast<char>(e.label);
    lab.write(&c, 1);
  }
}

Dataset subsample(const Dataset& ds, int per_class_count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> chosen;
  for (int c = 0; c < ds.num_classes; ++c) {
    const auto& pool = ds.per_class_index[c];
    if (static_cast<int>(pool.size()) < per_class_count)
      throw DataError("class " + std::to_string(c) + " has only " +
                      std::to_string(pool.size()) + " examples, need " +
                      std::to_string(per_class_count));
    // partial Fisher-Yates over a copy of the class pool
    std::vector<int> idx = pool;
    for (int k = 0; k < per_class_count; ++k) {
      const std::size_t j = k + rng.index(idx.size() - k);
      std::swap(idx[k], idx[j]);
    }
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + per_class_count);
  }
  std::sort(chosen.begin(), chosen.end());
  Dataset out;
  out.name = ds.name + "#sub" + std::to_string(per_class_count);
  out.num_classes = ds.num_classes;
  out.examples.reserve(chosen.size());
  for (int i : chosen) out.examples.push_back(ds.examples[i]);
  finalize_dataset(out);
  return out;
}

Dataset synth_blobs(int num_classes, int n_per_class, int dim,
                    double separation, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("synth_blobs: dim must be >= 1");
  if (separation <= 0.0)
    throw ConfigError("synth_blobs: separation must be > 0");
  Rng rng(seed);
  Dataset ds;
  ds.name = "synth_blobs";
  ds.num_classes = num_classes;
  // Raw values live in [-4, separation + 4]; one fixed affine map keeps
  // the geometry linear while landing in [0, 1].
  const double lo = -4.0, hi = separation + 4.0;
  for (int c = 0; c < num_classes; ++c) {
    for (int k = 0; k < n_per_class; ++k) {
      Example e;
      e.label = c;
      e.features = Vector(dim);
      for (int j = 0; j < dim; ++j) {
        const double center = (j == c % dim) ? separation : 0.0;
        const double noise = std::clamp(rng.gaussian(), -4.0, 4.0);
        e.features[j] = (center + noise - lo) / (hi - lo);
      }
      ds.examples.push_back(std::move(e));
    }
  }
  finalize_dataset(ds);
  return ds;
}

}  // namespace drgrad
