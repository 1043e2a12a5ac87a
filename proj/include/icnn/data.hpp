#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "icnn/tensor.hpp"

namespace icnn {

struct LabeledDataset {
  Tensor images;  // [N,C,H,W], values in [0,1] before normalization
  std::vector<int> labels;
  int num_classes = 0;
  std::string name;

  int64_t size() const { return images.defined() ? images.dim(0) : 0; }
};

// The four XOR points as [4,2,1,1] with labels (0,1,1,0).
LabeledDataset xor_dataset();

// IDX pair (big-endian magics 0x803 images / 0x801 labels); pixel bytes are
// scaled to [0,1].
LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path);
void write_idx(const LabeledDataset& ds, const std::string& images_path,
               const std::string& labels_path);

// Concatenated 3073-byte records: 1 label byte + 3x32x32 channel-planar
// pixels.
LabeledDataset load_cifar10_bin(const std::vector<std::string>& paths);
void write_cifar10_bin(const LabeledDataset& ds, const std::string& path);

// Per-channel statistics over all pixels (population standard deviation).
std::pair<std::vector<double>, std::vector<double>> compute_mean_std(
    const LabeledDataset& ds);

LabeledDataset normalize(const LabeledDataset& ds,
                         const std::vector<double>& mean,
                         const std::vector<double>& std);
LabeledDataset denormalize(const LabeledDataset& ds,
                           const std::vector<double>& mean,
                           const std::vector<double>& std);

// First-k subset; k == 0 or k >= size keeps the whole set.
LabeledDataset subset(const LabeledDataset& ds, int64_t k);

// Zero-pad-then-crop plus horizontal flip, decided per (seed, epoch, sample
// index) so augmented streams replay exactly.
struct Augmenter {
  int64_t pad = 0;
  double flip_prob = 0.0;
  uint64_t seed = 0;

  bool active() const { return pad > 0 || flip_prob > 0.0; }
  // sample: [C,H,W] values copied out of the dataset tensor
  void apply(std::vector<double>& sample, int64_t c, int64_t h, int64_t w,
             int64_t epoch, int64_t index) const;
};

// Procedurally drawn digit glyphs in MNIST geometry ([n,1,28,28], labels
// 0..9), with per-sample placement, intensity, and noise jitter. Stands in
// when no real corpus is on disk; pair with write_idx to exercise loaders.
LabeledDataset synthetic_digits(int64_t n, uint64_t seed);

}  // namespace icnn
