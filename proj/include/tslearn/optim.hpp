#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tslearn/model.hpp"
#include "tslearn/tensor.hpp"

namespace tsl {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam with bias correction. Moments are created on the first step and bound
// to the parameter order seen then; gradients are cleared after every step.
template <class T>
class Adam {
public:
    explicit Adam(AdamConfig config = {});

    void step(std::span<Tensor<T>* const> params, double lr);
    // Throws UsageError on a frozen model.
    void step(ModelState<T>& model, double lr);

    std::size_t steps() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return config_; }
    std::span<const std::vector<T>> first_moments() const noexcept { return m_; }
    std::span<const std::vector<T>> second_moments() const noexcept { return v_; }

private:
    AdamConfig config_;
    std::size_t t_ = 0;
    double beta1_power_ = 1.0;
    double beta2_power_ = 1.0;
    std::vector<std::vector<T>> m_;
    std::vector<std::vector<T>> v_;
};

// Piecewise-constant step decay: base_lr * decay_factor^floor(epoch / decay_every).
struct LrSchedule {
    double base_lr = 0.001;
    std::size_t decay_every = 50;
    double decay_factor = 0.1;
};

double lr_at(const LrSchedule& schedule, std::size_t epoch);
void validate(const LrSchedule& schedule);

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace tsl
