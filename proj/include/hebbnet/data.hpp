#ifndef HEBBNET_DATA_HPP
#define HEBBNET_DATA_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hebbnet/tensor.hpp"

namespace hebbnet {

struct Dataset {
    Tensor images;                // (n, c, h, w)
    std::vector<int> labels;      // empty for unlabeled use
    int num_classes = 0;
    std::vector<float> mean, stddev;  // per-channel stats from the training split
    bool normalized = false;
};

// IDX files, optionally gzip-compressed (sniffed by magic bytes).
// Pixels are scaled to [0,1].
Dataset load_mnist(const std::string& images_path, const std::string& labels_path);

// CIFAR-10 binary batches: 3073-byte records, channel-planar RGB 32x32.
Dataset load_cifar10(const std::vector<std::string>& batch_files);

// Standard scores per channel. With stats supplied (test split) they are
// applied verbatim; otherwise they are computed and stored on the dataset.
void normalize(Dataset& ds, const std::vector<float>* mean = nullptr,
               const std::vector<float>* stddev = nullptr);

struct AugmentFlags {
    bool hflip = false;
    int crop_pad = 0;  // reflective padding before random crop
};
void augment(Tensor& batch, const AugmentFlags& flags, std::mt19937_64& rng);

// Seeded permutation per epoch; final partial batch is yielded.
class BatchIterator {
public:
    BatchIterator(const Dataset& ds, int batch_size, std::uint64_t shuffle_seed,
                  bool shuffle = true);
    bool next(Tensor& images, std::vector<int>& labels);
    void reset(std::uint64_t epoch_seed);
    long batches_total() const;

private:
    const Dataset& ds_;
    int batch_size_;
    std::vector<int> order_;
    long pos_ = 0;
};

Tensor subset_images(const Dataset& ds, const std::vector<int>& indices);

}  // namespace hebbnet

#endif
