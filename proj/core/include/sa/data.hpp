#ifndef SA_DATA_HPP
#define SA_DATA_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sa/tensor.hpp"

namespace sa {

// Per-channel normalization applied at load time; the community CIFAR-10
// statistics are the defaults. identity() leaves pixels in [0,1].
struct Normalization {
  std::array<double, 3> mean = {0.4914, 0.4822, 0.4465};
  std::array<double, 3> std = {0.2470, 0.2435, 0.2616};

  static Normalization identity() { return {{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}}; }
};

enum class Split { kTrain, kTest };

struct Dataset {
  Tensor<float> images;  // (n, 3, h, w), normalized
  std::vector<int> labels;
  int class_count = 0;
  Split split = Split::kTrain;
  Normalization norm;

  int size() const { return images.shape().n; }
  int dim() const { return images.shape().h; }
};

// Standard CIFAR-10 binary layout: 3073-byte records, one label byte then
// 1024 R, 1024 G, 1024 B bytes; 10,000 records per official file.
Dataset load_cifar10_binary(const std::vector<std::string>& paths,
                            const Normalization& norm = Normalization(),
                            Split split = Split::kTrain);

// Inverse of the loader, for fixture reuse: de-normalizes, quantizes to
// bytes and writes records in order.
void write_cifar10_binary(const Dataset& dataset, const std::string& path);

// Synthetic classification set: class templates are Gaussian blobs at
// class-specific positions with class-specific channel intensities (so they
// stay linearly separable after pooling), plus seeded noise.
Dataset synth_dataset(int classes, int per_class, int dim, std::uint64_t seed,
                      double noise_sigma = 0.1);

Dataset take(const Dataset& dataset, int n);

struct Batch {
  Tensor<float> images;
  std::vector<int> labels;
};

struct AugmentOptions {
  bool hflip = false;
  bool random_crop = false;
  int crop_pad = 4;  // reflect padding before the crop
};

// Seeded batch stream: one permutation per (shuffle_seed, epoch), the final
// partial batch kept. Augmentation draws are seeded too.
class BatchIterator {
 public:
  BatchIterator(const Dataset& dataset, int batch_size, std::uint64_t shuffle_seed,
                int epoch, bool shuffle = true, AugmentOptions augment = {});

  std::optional<Batch> next();
  int batches_total() const;
  void reset();

 private:
  const Dataset& dataset_;
  int batch_size_;
  std::vector<int> order_;
  std::size_t cursor_ = 0;
  AugmentOptions augment_;
  Rng aug_rng_;
};

}  // namespace sa

#endif  // SA_DATA_HPP
