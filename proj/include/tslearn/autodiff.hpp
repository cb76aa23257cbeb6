#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "tslearn/tensor.hpp"

namespace tsl {

// How the per-sample cross-entropy terms are reduced over the batch.
enum class Reduction { Mean, Sum };

struct Var {
    std::size_t id;
};

// Scalar loss recorded in a Graph.
template <class T>
struct LossValue {
    std::size_t id;
    T value;
};

// Numerically stable row-wise softmax of an m x c tensor (c >= 2).
template <class T>
Tensor<T> softmax(const Tensor<T>& logits);

// Tape of forward operations over one batch. Backward may run once; parameter
// gradients are written into the bound parameter tensors' grad buffers.
template <class T>
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    Var constant(Tensor<T> value);
    // Leaf bound to `param`, which must outlive the graph and stay unmodified until backward.
    Var parameter(Tensor<T>& param);

    Var linear(Var input, Var weight, Var bias);
    Var conv2d(Var input, Var kernel, Var bias, std::size_t stride, std::size_t padding);
    Var relu(Var input);
    Var maxpool2d(Var input, std::size_t window, std::size_t stride);
    Var flatten(Var input);

    LossValue<T> cross_entropy(Var logits, const Tensor<T>& targets, Reduction reduction = Reduction::Mean);
    // Teacher features are a constant: gradient reaches only `student`.
    LossValue<T> mse_feature(Var student, const Tensor<T>& teacher);
    LossValue<T> combined(LossValue<T> mse, LossValue<T> xent, T lambda_mse, T lambda_xent);
    LossValue<T> scale(LossValue<T> loss, T weight);

    void backward(LossValue<T> loss);

    const Tensor<T>& value(Var v) const;
    // Gradient accumulated on an intermediate node (empty when none flowed). Valid after backward.
    std::span<const T> grad(Var v) const;
    bool consumed() const noexcept { return consumed_; }
    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T>* param = nullptr;
        std::vector<T> grad;
        bool requires_grad = false;
        std::function<void(Graph&, const std::vector<T>&)> backward;
    };

    std::size_t push(Tensor<T> value, bool requires_grad,
                     std::function<void(Graph&, const std::vector<T>&)> backward);
    const Node& node(std::size_t id) const;
    bool needs_grad(Var v) const { return node(v.id).requires_grad; }
    void accumulate(std::size_t id, std::span<const T> g);
    LossValue<T> scalar_node(T value, bool requires_grad,
                             std::function<void(Graph&, const std::vector<T>&)> backward);

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace tsl
