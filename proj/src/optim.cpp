#include "tslearn/optim.hpp"

#include <cmath>
#include <string>

namespace tsl {

template <class T>
Adam<T>::Adam(AdamConfig config) : config_(config) {
    if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0) ||
        !(config.epsilon > 0.0)) {
        throw ConfigError("adam: betas must lie in [0,1) and epsilon must be positive");
    }
}

template <class T>
void Adam<T>::step(std::span<Tensor<T>* const> params, double lr) {
    if (!(lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
    if (t_ == 0) {
        m_.clear();
        v_.clear();
        for (const Tensor<T>* p : params) {
            m_.emplace_back(p->numel(), T{0});
            v_.emplace_back(p->numel(), T{0});
        }
    }
    if (params.size() != m_.size()) {
        throw UsageError("adam: parameter list changed between steps (" + std::to_string(m_.size()) + " vs " +
                         std::to_string(params.size()) + ")");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->numel() != m_[i].size()) throw UsageError("adam: parameter " + std::to_string(i) + " changed size");
        if (!params[i]->has_grad()) {
            throw UsageError("adam: parameter " + std::to_string(i) + " has no gradient; run backward first");
        }
    }

    ++t_;
    beta1_power_ *= config_.beta1;
    beta2_power_ *= config_.beta2;
    const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
    const T one_b1 = static_cast<T>(1.0 - config_.beta1), one_b2 = static_cast<T>(1.0 - config_.beta2);
    const T bc1 = static_cast<T>(1.0 - beta1_power_), bc2 = static_cast<T>(1.0 - beta2_power_);
    const T rate = static_cast<T>(lr), eps = static_cast<T>(config_.epsilon);

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor<T>& p = *params[i];
        auto theta = p.data();
        const auto g = p.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m[j] = b1 * m[j] + one_b1 * g[j];
            v[j] = b2 * v[j] + one_b2 * (g[j] * g[j]);
            const T m_hat = m[j] / bc1;
            const T v_hat = v[j] / bc2;
            theta[j] -= rate * m_hat / (std::sqrt(v_hat) + eps);
        }
        p.clear_grad();
    }
}

template <class T>
void Adam<T>::step(ModelState<T>& model, double lr) {
    auto& params = model.mutable_parameters();
    std::vector<Tensor<T>*> ptrs;
    ptrs.reserve(params.size());
    for (auto& p : params) ptrs.push_back(&p.tensor);
    step(std::span<Tensor<T>* const>(ptrs), lr);
}

void validate(const LrSchedule& s) {
    if (!(s.base_lr >= 0.0)) throw ConfigError("base learning rate must be non-negative");
    if (s.decay_every == 0) throw ConfigError("decay_every must be a positive number of epochs");
    if (!(s.decay_factor > 0.0 && s.decay_factor <= 1.0)) throw ConfigError("decay_factor must lie in (0, 1]");
}

double lr_at(const LrSchedule& s, std::size_t epoch) {
    double lr = s.base_lr;
    for (std::size_t k = epoch / s.decay_every; k > 0; --k) lr *= s.decay_factor;
    return lr;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace tsl
