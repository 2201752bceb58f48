#ifndef DRGRAD_DATA_IO_HPP
#define DRGRAD_DATA_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "drgrad/model.hpp"

namespace drgrad {

struct Dataset {
  std::vector<Example> examples;
  int num_classes = 0;
  std::vector<std::vector<int>> per_class_index;  // class -> dataset indices
  std::string name;
  std::uint64_t source_digest = 0;

  int size() const { return static_cast<int>(examples.size()); }
  int feature_dim() const {
    return examples.empty() ? 0 : static_cast<int>(examples[0].features.size());
  }
};

// Rebuilds per_class_index and the content digest from examples/num_classes.
void finalize_dataset(Dataset& ds);

struct IdxHeader {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
};

// Reads just the big-endian header of an IDX file.
IdxHeader read_idx_header(const std::string& path);

// Big-endian IDX pair: images magic 0x00000803 with dims [n, rows, cols],
// labels magic 0x00000801 with dims [n]. Pixels are scaled by 1/255.
Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path);

// Inverse of load_idx for datasets whose features are multiples of 1/255.
void write_idx(const Dataset& ds, int rows, int cols,
               const std::string& images_path, const std::string& labels_path);

// Deterministic stratified subsample with per_class_count examples per class.
Dataset subsample(const Dataset& ds, int per_class_count, std::uint64_t seed);

// Gaussian blobs: class c centered at separation * e_(c mod dim), unit
// variance, noise clipped at +-4 sigma, affinely rescaled into [0, 1].
Dataset synth_blobs(int num_classes, int n_per_class, int dim,
                    double separation, std::uint64_t seed);

}  // namespace drgrad

#endif  // DRGRAD_DATA_IO_HPP
