#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tslearn/autodiff.hpp"
#include "tslearn/tensor.hpp"

namespace tsl {

enum class LayerKind { Conv2d, Linear, Relu, MaxPool2d, Flatten };

struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    std::size_t channels = 0;  // conv2d output channels
    std::size_t kernel = 0;    // conv2d kernel side, maxpool2d window
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t width = 0;     // linear output features

    static LayerSpec conv2d(std::size_t channels, std::size_t kernel, std::size_t stride = 1,
                            std::size_t padding = 0) {
        return {LayerKind::Conv2d, channels, kernel, stride, padding, 0};
    }
    static LayerSpec linear(std::size_t width) { return {LayerKind::Linear, 0, 0, 1, 0, width}; }
    static LayerSpec relu() { return {LayerKind::Relu}; }
    static LayerSpec maxpool2d(std::size_t window, std::size_t stride) {
        return {LayerKind::MaxPool2d, 0, window, stride, 0, 0};
    }
    static LayerSpec flatten() { return {LayerKind::Flatten}; }

    bool has_parameters() const { return kind == LayerKind::Conv2d || kind == LayerKind::Linear; }
    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Layer stack g(x) producing `feature_dim` features, followed by an implicit
// linear head feature_dim -> num_classes.
struct NetworkSpec {
    Shape input;  // c x h x w
    std::vector<LayerSpec> layers;
    std::size_t feature_dim = 0;
    std::size_t num_classes = 0;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

// Canonical one-line form, e.g.
//   input=3x24x24 layers=conv2d(8,3,1,1);relu;maxpool2d(2,2);flatten;linear(32);relu features=32 classes=6
std::string format_spec(const NetworkSpec& spec);
NetworkSpec parse_spec(const std::string& text);
std::string format_layers(const std::vector<LayerSpec>& layers);
std::vector<LayerSpec> parse_layers(const std::string& text);
Shape parse_shape(const std::string& text);
std::string format_shape(const Shape& shape);

// Per-sample output shape of every layer. Throws ConfigError naming the
// offending layer when propagation fails or the stack does not end in a flat
// vector of length feature_dim.
std::vector<Shape> propagate_shapes(const NetworkSpec& spec);
std::size_t parameter_count(const NetworkSpec& spec);

struct CompatibilityReport {
    bool compatible = true;
    std::vector<std::string> violations;
};

CompatibilityReport validate_pair(const NetworkSpec& teacher, const NetworkSpec& student);

template <class T>
struct NamedParameter {
    std::string name;
    Tensor<T> tensor;
};

template <class T>
struct ForwardVars {
    Var features;
    Var logits;
};

template <class T>
struct ForwardResult {
    Tensor<T> features;
    Tensor<T> logits;
};

enum class ModelMode { Training, Frozen };

template <class T>
class ModelState {
public:
    ModelState(NetworkSpec spec, std::vector<NamedParameter<T>> parameters);

    const NetworkSpec& spec() const noexcept { return spec_; }
    std::span<const NamedParameter<T>> parameters() const noexcept { return params_; }
    // Throws UsageError on a frozen model.
    std::vector<NamedParameter<T>>& mutable_parameters();
    ModelMode mode() const noexcept { return mode_; }
    bool frozen() const noexcept { return mode_ == ModelMode::Frozen; }

    void freeze();
    void thaw() { mode_ = ModelMode::Training; }

    // Records the forward pass on `graph`. Not available on frozen models.
    ForwardVars<T> forward(Graph<T>& graph, Var batch);
    // Graph-free forward; same kernels, same numbers.
    ForwardResult<T> infer(const Tensor<T>& batch) const;

    template <class U>
    ModelState<U> cast() const {
        std::vector<NamedParameter<U>> out;
        for (const auto& p : params_) out.push_back({p.name, p.tensor.template cast<U>()});
        ModelState<U> m(spec_, std::move(out));
        if (frozen()) m.freeze();
        return m;
    }

private:
    void check_batch(const Tensor<T>& batch) const;

    NetworkSpec spec_;
    std::vector<NamedParameter<T>> params_;
    ModelMode mode_ = ModelMode::Training;
};

// Kaiming-uniform (fan-in) weights, zero biases; bitwise determined by (spec, seed).
template <class T>
ModelState<T> build_model(const NetworkSpec& spec, std::uint64_t init_seed);

template <class T>
ModelState<T> freeze(ModelState<T> model) {
    model.freeze();
    return model;
}

extern template class ModelState<float>;
extern template class ModelState<double>;

}  // namespace tsl
