#include "tslearn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "tslearn/kernels.hpp"

namespace tsl {

namespace {

constexpr double kLogFloor = 1e-12;

template <class T>
void softmax_rows(std::span<const T> logits, std::size_t rows, std::size_t cols, std::span<T> out) {
    for (std::size_t i = 0; i < rows; ++i) {
        const T* a = logits.data() + i * cols;
        T* p = out.data() + i * cols;
        const T peak = *std::max_element(a, a + cols);
        T total{0};
        for (std::size_t j = 0; j < cols; ++j) {
            p[j] = std::exp(a[j] - peak);
            total += p[j];
        }
        for (std::size_t j = 0; j < cols; ++j) p[j] /= total;
    }
}

}  // namespace

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

template <class T>
Tensor<T> softmax(const Tensor<T>& logits) {
    if (logits.rank() != 2 || logits.dim(1) < 2) {
        throw DimensionError("softmax expects m x c logits with c >= 2, got " + shape_str(logits.shape()));
    }
    Tensor<T> out(logits.shape());
    softmax_rows<T>(logits.data(), logits.dim(0), logits.dim(1), out.data());
    return out;
}

template <class T>
std::size_t Graph<T>::push(Tensor<T> value, bool requires_grad,
                           std::function<void(Graph&, const std::vector<T>&)> backward) {
    if (consumed_) throw UsageError("graph already consumed by backward; record a new graph");
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

template <class T>
const typename Graph<T>::Node& Graph<T>::node(std::size_t id) const {
    if (id >= nodes_.size()) throw UsageError("variable does not belong to this graph");
    return nodes_[id];
}

template <class T>
const Tensor<T>& Graph<T>::value(Var v) const {
    const Node& n = node(v.id);
    return n.param ? *n.param : n.value;
}

template <class T>
std::span<const T> Graph<T>::grad(Var v) const {
    return node(v.id).grad;
}

template <class T>
void Graph<T>::accumulate(std::size_t id, std::span<const T> g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.empty()) {
        n.grad.assign(g.begin(), g.end());
    } else {
        for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
    }
}

template <class T>
Var Graph<T>::constant(Tensor<T> value) {
    return {push(std::move(value), false, nullptr)};
}

template <class T>
Var Graph<T>::parameter(Tensor<T>& param) {
    const std::size_t id = push(Tensor<T>{}, true, [](Graph&, const std::vector<T>&) {});
    nodes_[id].param = &param;
    return {id};
}

template <class T>
Var Graph<T>::linear(Var input, Var weight, Var bias) {
    const Tensor<T>& x = value(input);
    const Tensor<T>& w = value(weight);
    const Tensor<T>& b = value(bias);
    if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || x.dim(1) != w.dim(0) || b.dim(0) != w.dim(1)) {
        throw DimensionError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                             shape_str(w.shape()) + " and bias " + shape_str(b.shape()));
    }
    const kernels::LinearGeometry geo{x.dim(0), x.dim(1), w.dim(1)};
    Tensor<T> y({geo.rows, geo.columns});
    kernels::linear_forward<T>(geo, x.data(), w.data(), b.data(), y.data());

    const bool rg = needs_grad(input) || needs_grad(weight) || needs_grad(bias);
    return {push(std::move(y), rg, [=](Graph& g, const std::vector<T>& gy) {
        const bool need_x = g.needs_grad(input), need_w = g.needs_grad(weight), need_b = g.needs_grad(bias);
        std::vector<T> gx(need_x ? geo.rows * geo.inner : 0);
        std::vector<T> gw(need_w ? geo.inner * geo.columns : 0);
        std::vector<T> gb(need_b ? geo.columns : 0);
        kernels::linear_backward<T>(geo, g.value(input).data(), g.value(weight).data(), gy, gx, gw, gb);
        if (need_x) g.accumulate(input.id, gx);
        if (need_w) g.accumulate(weight.id, gw);
        if (need_b) g.accumulate(bias.id, gb);
    })};
}

template <class T>
Var Graph<T>::conv2d(Var input, Var kernel, Var bias, std::size_t stride, std::size_t padding) {
    const Tensor<T>& x = value(input);
    const Tensor<T>& k = value(kernel);
    const Tensor<T>& b = value(bias);
    if (x.rank() != 4 || k.rank() != 4 || b.rank() != 1 || x.dim(1) != k.dim(1) || b.dim(0) != k.dim(0)) {
        throw DimensionError("conv2d: input " + shape_str(x.shape()) + " incompatible with kernel " +
                             shape_str(k.shape()) + " and bias " + shape_str(b.shape()));
    }
    const kernels::ConvGeometry geo{x.dim(0), x.dim(1), x.dim(2), x.dim(3), k.dim(0),
                                    k.dim(2), k.dim(3), stride, padding};
    const std::size_t oh = kernels::window_extent(geo.height, geo.kernel_h, stride, padding, "conv2d");
    const std::size_t ow = kernels::window_extent(geo.width, geo.kernel_w, stride, padding, "conv2d");
    Tensor<T> y({geo.batch, geo.out_channels, oh, ow});
    kernels::conv2d_forward<T>(geo, x.data(), k.data(), b.data(), y.data());

    const bool rg = needs_grad(input) || needs_grad(kernel) || needs_grad(bias);
    return {push(std::move(y), rg, [=](Graph& g, const std::vector<T>& gy) {
        const bool need_x = g.needs_grad(input), need_k = g.needs_grad(kernel), need_b = g.needs_grad(bias);
        std::vector<T> gx(need_x ? g.value(input).numel() : 0);
        std::vector<T> gk(need_k ? g.value(kernel).numel() : 0);
        std::vector<T> gb(need_b ? geo.out_channels : 0);
        kernels::conv2d_backward<T>(geo, g.value(input).data(), g.value(kernel).data(), gy, gx, gk, gb);
        if (need_x) g.accumulate(input.id, gx);
        if (need_k) g.accumulate(kernel.id, gk);
        if (need_b) g.accumulate(bias.id, gb);
    })};
}

template <class T>
Var Graph<T>::relu(Var input) {
    const Tensor<T>& x = value(input);
    Tensor<T> y(x.shape());
    kernels::relu_forward<T>(x.data(), y.data());
    return {push(std::move(y), needs_grad(input), [=](Graph& g, const std::vector<T>& gy) {
        std::vector<T> gx(gy.size());
        kernels::relu_backward<T>(g.value(input).data(), gy, gx);
        g.accumulate(input.id, gx);
    })};
}

template <class T>
Var Graph<T>::maxpool2d(Var input, std::size_t window, std::size_t stride) {
    const Tensor<T>& x = value(input);
    if (x.rank() != 4) throw DimensionError("maxpool2d expects m x c x h x w input, got " + shape_str(x.shape()));
    const kernels::PoolGeometry geo{x.dim(0), x.dim(1), x.dim(2), x.dim(3), window, stride};
    const std::size_t oh = kernels::window_extent(geo.height, window, stride, 0, "maxpool2d");
    const std::size_t ow = kernels::window_extent(geo.width, window, stride, 0, "maxpool2d");
    Tensor<T> y({geo.batch, geo.channels, oh, ow});
    std::vector<std::size_t> argmax(y.numel());
    kernels::maxpool2d_forward<T>(geo, x.data(), y.data(), argmax);
    const std::size_t in_size = x.numel();
    return {push(std::move(y), needs_grad(input),
                 [=, argmax = std::move(argmax)](Graph& g, const std::vector<T>& gy) {
                     std::vector<T> gx(in_size);
                     kernels::maxpool2d_backward<T>(geo, argmax, gy, gx);
                     g.accumulate(input.id, gx);
                 })};
}

template <class T>
Var Graph<T>::flatten(Var input) {
    const Tensor<T>& x = value(input);
    if (x.rank() < 2) throw DimensionError("flatten expects a batched tensor, got " + shape_str(x.shape()));
    Tensor<T> y = x.reshaped({x.dim(0), x.numel() / x.dim(0)});
    return {push(std::move(y), needs_grad(input),
                 [=](Graph& g, const std::vector<T>& gy) { g.accumulate(input.id, gy); })};
}

template <class T>
LossValue<T> Graph<T>::scalar_node(T value, bool requires_grad,
                                   std::function<void(Graph&, const std::vector<T>&)> backward) {
    const std::size_t id = push(Tensor<T>({1}, value), requires_grad, std::move(backward));
    return {id, value};
}

template <class T>
LossValue<T> Graph<T>::cross_entropy(Var logits, const Tensor<T>& targets, Reduction reduction) {
    const Tensor<T>& a = value(logits);
    if (a.rank() != 2 || a.shape() != targets.shape()) {
        throw DimensionError("cross_entropy: logits " + shape_str(a.shape()) + " vs targets " +
                             shape_str(targets.shape()));
    }
    const std::size_t rows = a.dim(0), cols = a.dim(1);
    if (cols < 2) throw DimensionError("cross_entropy needs at least 2 classes");
    std::vector<std::size_t> label(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        std::size_t ones = 0;
        for (std::size_t j = 0; j < cols; ++j) {
            const T y = targets[i * cols + j];
            if (y == T{1}) {
                ++ones;
                label[i] = j;
            } else if (y != T{0}) {
                ones = 2;
            }
        }
        if (ones != 1) throw ValidationError("cross_entropy: target row " + std::to_string(i) + " is not one-hot");
    }

    std::vector<T> p(a.numel());
    softmax_rows<T>(a.data(), rows, cols, p);
    T total{0};
    for (std::size_t i = 0; i < rows; ++i) {
        total += -std::log(std::max(p[i * cols + label[i]], static_cast<T>(kLogFloor)));
    }
    const T scale = reduction == Reduction::Mean ? T{1} / static_cast<T>(rows) : T{1};
    if (reduction == Reduction::Mean) total /= static_cast<T>(rows);

    return scalar_node(total, needs_grad(logits),
                       [=, p = std::move(p), label = std::move(label)](Graph& g, const std::vector<T>& up) {
                           std::vector<T> ga(p.size());
                           const T s = up[0] * scale;
                           for (std::size_t i = 0; i < rows; ++i) {
                               for (std::size_t j = 0; j < cols; ++j) {
                                   const T y = j == label[i] ? T{1} : T{0};
                                   ga[i * cols + j] = (p[i * cols + j] - y) * s;
                               }
                           }
                           g.accumulate(logits.id, ga);
                       });
}

template <class T>
LossValue<T> Graph<T>::mse_feature(Var student, const Tensor<T>& teacher) {
    const Tensor<T>& g_feat = value(student);
    if (g_feat.shape() != teacher.shape() || g_feat.rank() != 2) {
        throw DimensionError("mse_feature: student features " + shape_str(g_feat.shape()) +
                             " vs teacher features " + shape_str(teacher.shape()));
    }
    const std::size_t count = g_feat.numel();
    T total{0};
    for (std::size_t i = 0; i < count; ++i) {
        const T diff = teacher[i] - g_feat[i];
        total += diff * diff;
    }
    const T denom = static_cast<T>(count);
    total /= denom;
    std::vector<T> f(teacher.values());
    return scalar_node(total, needs_grad(student), [=, f = std::move(f)](Graph& g, const std::vector<T>& up) {
        const auto gs = g.value(student).data();
        std::vector<T> grad(count);
        for (std::size_t i = 0; i < count; ++i) grad[i] = T{-2} * (f[i] - gs[i]) / denom * up[0];
        g.accumulate(student.id, grad);
    });
}

template <class T>
LossValue<T> Graph<T>::combined(LossValue<T> mse, LossValue<T> xent, T lambda_mse, T lambda_xent) {
    if (!(lambda_mse >= T{0}) || !(lambda_xent >= T{0})) {
        throw ConfigError("loss weights must be non-negative (lambda_mse=" + std::to_string(lambda_mse) +
                          ", lambda_xent=" + std::to_string(lambda_xent) + ")");
    }
    node(mse.id);
    node(xent.id);
    const T total = lambda_mse * mse.value + lambda_xent * xent.value;
    const bool rg = nodes_[mse.id].requires_grad || nodes_[xent.id].requires_grad;
    return scalar_node(total, rg, [=](Graph& g, const std::vector<T>& up) {
        // Zero-weighted branches are skipped so the surviving gradient is bitwise the single-loss one.
        if (lambda_mse != T{0}) {
            const T gm = lambda_mse * up[0];
            g.accumulate(mse.id, std::span<const T>(&gm, 1));
        }
        if (lambda_xent != T{0}) {
            const T gx = lambda_xent * up[0];
            g.accumulate(xent.id, std::span<const T>(&gx, 1));
        }
    });
}

template <class T>
LossValue<T> Graph<T>::scale(LossValue<T> loss, T weight) {
    if (!(weight >= T{0})) throw ConfigError("loss weight must be non-negative");
    node(loss.id);
    return scalar_node(weight * loss.value, nodes_[loss.id].requires_grad,
                       [=](Graph& g, const std::vector<T>& up) {
                           const T gl = weight * up[0];
                           g.accumulate(loss.id, std::span<const T>(&gl, 1));
                       });
}

template <class T>
void Graph<T>::backward(LossValue<T> loss) {
    if (consumed_) throw UsageError("backward called twice on the same graph");
    const Node& root = node(loss.id);
    if (root.value.numel() != 1 || root.param) throw UsageError("backward expects a scalar loss node");
    for (const Node& n : nodes_) {
        if (n.param && n.param->has_grad()) {
            throw UsageError("parameter gradient already populated; run an optimizer step or clear it first");
        }
    }
    consumed_ = true;
    if (root.requires_grad) {
        nodes_[loss.id].grad.assign(1, T{1});
        for (std::size_t id = loss.id + 1; id-- > 0;) {
            Node& n = nodes_[id];
            if (n.grad.empty() || !n.backward || n.param) continue;
            n.backward(*this, n.grad);
        }
    }
    for (Node& n : nodes_) {
        if (!n.param) continue;
        auto dst = n.param->ensure_grad();
        if (!n.grad.empty()) std::copy(n.grad.begin(), n.grad.end(), dst.begin());
    }
}

template Tensor<float> softmax<float>(const Tensor<float>&);
template Tensor<double> softmax<double>(const Tensor<double>&);
template class Graph<float>;
template class Graph<double>;

}  // namespace tsl
