#include "tslearn/augment.hpp"

#include <algorithm>
#include <string>

namespace tsl {

std::pair<Tensor<float>, LcgState> generate_random_image(LcgState state, const Shape& shape) {
    validate(state);
    Tensor<float> image(shape);
    for (auto& v : image.values()) v = static_cast<float>(lcg_unit(state));
    return {std::move(image), state};
}

Tensor<float> pseudo_label(const ModelState<float>& teacher, const Tensor<float>& images) {
    if (!teacher.frozen()) throw UsageError("pseudo_label requires a frozen teacher");
    const auto logits = teacher.infer(images).logits;
    const std::size_t rows = logits.dim(0), classes = logits.dim(1);
    Tensor<float> targets({rows, classes});
    for (std::size_t i = 0; i < rows; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < classes; ++j) {
            if (logits[i * classes + j] > logits[i * classes + best]) best = j;
        }
        targets[i * classes + best] = 1.0f;
    }
    return targets;
}

std::pair<Batch, LcgState> expand_batch(const Batch& batch, const AugmentConfig& config, LcgState state,
                                        const ModelState<float>& teacher) {
    const std::size_t classes = batch.targets.dim(1);
    if (teacher.spec().num_classes != classes) {
        throw DimensionError("teacher predicts " + std::to_string(teacher.spec().num_classes) +
                             " classes but batch targets have " + std::to_string(classes));
    }
    const Shape sample{batch.images.dim(1), batch.images.dim(2), batch.images.dim(3)};
    if (config.image_shape != sample || teacher.spec().input != sample) {
        throw DimensionError("augmentation image shape " + shape_str(config.image_shape) + ", batch " +
                             shape_str(sample) + " and teacher input " + shape_str(teacher.spec().input) +
                             " must agree");
    }
    const std::size_t n = config.images_per_batch;
    if (n == 0) return {batch, state};

    const std::size_t pixels = shape_numel(sample);
    Tensor<float> extra({n, sample[0], sample[1], sample[2]});
    for (std::size_t i = 0; i < n; ++i) {
        auto [image, next] = generate_random_image(state, sample);
        state = next;
        std::copy(image.values().begin(), image.values().end(), extra.values().begin() + static_cast<std::ptrdiff_t>(i * pixels));
    }
    const Tensor<float> labels = pseudo_label(teacher, extra);

    const std::size_t m = batch.size();
    std::vector<float> images(batch.images.values());
    images.insert(images.end(), extra.values().begin(), extra.values().end());
    std::vector<float> targets(batch.targets.values());
    targets.insert(targets.end(), labels.values().begin(), labels.values().end());

    Batch out;
    out.images = Tensor<float>({m + n, sample[0], sample[1], sample[2]}, std::move(images));
    out.targets = Tensor<float>({m + n, classes}, std::move(targets));
    out.labels = batch.labels;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < classes; ++j) {
            if (labels[i * classes + j] == 1.0f) out.labels.push_back(static_cast<std::uint32_t>(j));
        }
    }
    out.real_count = batch.real_count;
    return {std::move(out), state};
}

}  // namespace tsl
