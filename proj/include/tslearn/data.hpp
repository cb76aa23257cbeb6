#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "tslearn/tensor.hpp"

namespace tsl {

// Images are n x c x h x w with values in [0,1]; labels index [0, classes).
struct Dataset {
    Tensor<float> images;
    std::vector<std::uint32_t> labels;
    std::size_t classes = 0;

    std::size_t size() const noexcept { return labels.size(); }
    Shape image_shape() const { return {images.dim(1), images.dim(2), images.dim(3)}; }
};

// One training step's worth of samples. The first `real_count` rows come from
// the dataset; any rows after that are appended augmentation samples.
struct Batch {
    Tensor<float> images;
    Tensor<float> targets;  // one-hot, rows x classes
    std::vector<std::uint32_t> labels;
    std::size_t real_count = 0;

    std::size_t size() const noexcept { return labels.size(); }
};

struct BatchPlan {
    std::uint64_t seed = 0;
    std::size_t batch_size = 128;
    bool drop_last = false;
};

inline const Shape kCifarImageShape{3, 32, 32};

// Record file: per sample one label byte followed by c*h*w pixel bytes,
// channel-planar and row-major (CIFAR-10 binary layout for 3x32x32).
// Pixels are scaled by 1/255.
Dataset load_cifar10(const std::filesystem::path& path, std::size_t classes = 10,
                     const Shape& image_shape = kCifarImageShape);
// Concatenates several record files (e.g. data_batch_1..5).
Dataset load_cifar10(const std::vector<std::filesystem::path>& paths, std::size_t classes = 10,
                     const Shape& image_shape = kCifarImageShape);
// Quantizes pixels with round(v*255) and writes the record layout.
void save_records(const Dataset& dataset, const std::filesystem::path& path);

struct SyntheticConfig {
    std::size_t classes = 4;
    std::size_t per_class = 100;
    Shape image_shape{3, 32, 32};
    std::uint32_t seed = 1;
    double noise = 0.2;     // uniform pixel noise in [-noise, noise]
    double contrast = 0.25;  // pattern amplitude around mid-grey
};

// Class k is a sinusoid whose frequency ramps across the image, with
// class-dependent base frequency and orientation, plus LCG pixel noise.
// Samples are interleaved by class: sample i has label i % classes.
Dataset make_synthetic(const SyntheticConfig& config);

Tensor<float> one_hot(const std::vector<std::uint32_t>& labels, std::size_t classes);

// Seeded Fisher-Yates permutation of [0, n) for the given epoch.
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch);
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, const BatchPlan& plan, std::size_t epoch);
Batch gather(const Dataset& dataset, const std::vector<std::size_t>& indices);
std::vector<Batch> batches(const Dataset& dataset, const BatchPlan& plan, std::size_t epoch);

// The full dataset as one batch, in stored order.
Batch whole(const Dataset& dataset);

}  // namespace tsl
