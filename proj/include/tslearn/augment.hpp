#pragma once

#include <cstddef>
#include <utility>

#include "tslearn/data.hpp"
#include "tslearn/lcg.hpp"
#include "tslearn/model.hpp"

namespace tsl {

enum class LabelMode { Hard };

struct AugmentConfig {
    std::size_t images_per_batch = 0;  // N extra images appended to every real batch
    Shape image_shape;                  // c x h x w
    LabelMode label_mode = LabelMode::Hard;
};

// c*h*w pixels drawn row-major as X/(m-1); consumes exactly c*h*w draws.
std::pair<Tensor<float>, LcgState> generate_random_image(LcgState state, const Shape& shape);

// One-hot rows at the first maximal logit of the frozen teacher.
Tensor<float> pseudo_label(const ModelState<float>& teacher, const Tensor<float>& images);

// Appends N teacher-labelled random images after the original samples.
std::pair<Batch, LcgState> expand_batch(const Batch& batch, const AugmentConfig& config, LcgState state,
                                        const ModelState<float>& teacher);

}  // namespace tsl
