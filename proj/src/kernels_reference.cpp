// Serial reference kernels. Written straight from the per-element definitions
// in kernels.hpp; kept for cross-checking the OpenMP kernels and benchmarking.

#include <cstddef>

#include "tslearn/kernels.hpp"

namespace tsl::kernels::reference {

using index_t = std::ptrdiff_t;

template <class T>
void linear_forward(const LinearGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> b, std::span<T> y) {
    for (std::size_t i = 0; i < g.rows; ++i) {
        for (std::size_t j = 0; j < g.columns; ++j) {
            T acc{0};
            for (std::size_t k = 0; k < g.inner; ++k) acc += x[i * g.inner + k] * w[k * g.columns + j];
            y[i * g.columns + j] = acc + b[j];
        }
    }
}

template <class T>
void linear_backward(const LinearGeometry& g, std::span<const T> x, std::span<const T> w,
                     std::span<const T> gy, std::span<T> gx, std::span<T> gw, std::span<T> gb) {
    if (!gx.empty()) {
        for (std::size_t i = 0; i < g.rows; ++i) {
            for (std::size_t k = 0; k < g.inner; ++k) {
                T acc{0};
                for (std::size_t j = 0; j < g.columns; ++j) acc += gy[i * g.columns + j] * w[k * g.columns + j];
                gx[i * g.inner + k] = acc;
            }
        }
    }
    if (!gw.empty()) {
        for (std::size_t k = 0; k < g.inner; ++k) {
            for (std::size_t j = 0; j < g.columns; ++j) {
                T acc{0};
                for (std::size_t i = 0; i < g.rows; ++i) acc += x[i * g.inner + k] * gy[i * g.columns + j];
                gw[k * g.columns + j] = acc;
            }
        }
    }
    if (!gb.empty()) {
        for (std::size_t j = 0; j < g.columns; ++j) {
            T acc{0};
            for (std::size_t i = 0; i < g.rows; ++i) acc += gy[i * g.columns + j];
            gb[j] = acc;
        }
    }
}

template <class T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> k,
                    std::span<const T> b, std::span<T> y) {
    const std::size_t oh = g.out_h(), ow = g.out_w();
    for (std::size_t n = 0; n < g.batch; ++n)
        for (std::size_t co = 0; co < g.out_channels; ++co)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    T acc{0};
                    for (std::size_t ci = 0; ci < g.in_channels; ++ci)
                        for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
                            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                                const index_t iy = static_cast<index_t>(oy * g.stride + ky) -
                                                   static_cast<index_t>(g.padding);
                                const index_t ix = static_cast<index_t>(ox * g.stride + kx) -
                                                   static_cast<index_t>(g.padding);
                                if (iy < 0 || ix < 0 || iy >= static_cast<index_t>(g.height) ||
                                    ix >= static_cast<index_t>(g.width))
                                    continue;
                                acc += x[((n * g.in_channels + ci) * g.height + iy) * g.width + ix] *
                                       k[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx];
                            }
                    y[((n * g.out_channels + co) * oh + oy) * ow + ox] = acc + b[co];
                }
}

template <class T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> x, std::span<const T> k,
                     std::span<const T> gy, std::span<T> gx, std::span<T> gk, std::span<T> gb) {
    const std::size_t oh = g.out_h(), ow = g.out_w();
    auto gy_at = [&](std::size_t n, std::size_t co, std::size_t oy, std::size_t ox) {
        return gy[((n * g.out_channels + co) * oh + oy) * ow + ox];
    };
    // Output coordinate fed by input coordinate `in` through kernel tap `tap`, or -1.
    auto source = [&](std::size_t in, std::size_t tap, std::size_t out_extent) -> index_t {
        const index_t num = static_cast<index_t>(in + g.padding) - static_cast<index_t>(tap);
        if (num < 0 || num % static_cast<index_t>(g.stride) != 0) return -1;
        const index_t o = num / static_cast<index_t>(g.stride);
        return o < static_cast<index_t>(out_extent) ? o : -1;
    };

    if (!gx.empty()) {
        for (std::size_t n = 0; n < g.batch; ++n)
            for (std::size_t ci = 0; ci < g.in_channels; ++ci)
                for (std::size_t iy = 0; iy < g.height; ++iy)
                    for (std::size_t ix = 0; ix < g.width; ++ix) {
                        T acc{0};
                        for (std::size_t co = 0; co < g.out_channels; ++co)
                            for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
                                for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                                    const index_t oy = source(iy, ky, oh);
                                    const index_t ox = source(ix, kx, ow);
                                    if (oy < 0 || ox < 0) continue;
                                    acc += gy_at(n, co, static_cast<std::size_t>(oy), static_cast<std::size_t>(ox)) *
                                           k[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx];
                                }
                        gx[((n * g.in_channels + ci) * g.height + iy) * g.width + ix] = acc;
                    }
    }
    if (!gk.empty()) {
        for (std::size_t co = 0; co < g.out_channels; ++co)
            for (std::size_t ci = 0; ci < g.in_channels; ++ci)
                for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
                    for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                        T acc{0};
                        for (std::size_t n = 0; n < g.batch; ++n)
                            for (std::size_t oy = 0; oy < oh; ++oy)
                                for (std::size_t ox = 0; ox < ow; ++ox) {
                                    const index_t iy = static_cast<index_t>(oy * g.stride + ky) -
                                                       static_cast<index_t>(g.padding);
                                    const index_t ix = static_cast<index_t>(ox * g.stride + kx) -
                                                       static_cast<index_t>(g.padding);
                                    if (iy < 0 || ix < 0 || iy >= static_cast<index_t>(g.height) ||
                                        ix >= static_cast<index_t>(g.width))
                                        continue;
                                    acc += gy_at(n, co, oy, ox) *
                                           x[((n * g.in_channels + ci) * g.height + iy) * g.width + ix];
                                }
                        gk[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx] = acc;
                    }
    }
    if (!gb.empty()) {
        for (std::size_t co = 0; co < g.out_channels; ++co) {
            T acc{0};
            for (std::size_t n = 0; n < g.batch; ++n)
                for (std::size_t oy = 0; oy < oh; ++oy)
                    for (std::size_t ox = 0; ox < ow; ++ox) acc += gy_at(n, co, oy, ox);
            gb[co] = acc;
        }
    }
}

template <class T>
void maxpool2d_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y,
                       std::span<std::size_t> argmax) {
    const std::size_t oh = g.out_h(), ow = g.out_w();
    for (std::size_t plane = 0; plane < g.batch * g.channels; ++plane)
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) {
                std::size_t best = 0;
                bool first = true;
                for (std::size_t wy = 0; wy < g.window; ++wy)
                    for (std::size_t wx = 0; wx < g.window; ++wx) {
                        const std::size_t idx =
                            (plane * g.height + oy * g.stride + wy) * g.width + ox * g.stride + wx;
                        if (first || x[idx] > x[best]) best = idx;
                        first = false;
                    }
                const std::size_t out = (plane * oh + oy) * ow + ox;
                y[out] = x[best];
                argmax[out] = best;
            }
}

template <class T>
void maxpool2d_backward(const PoolGeometry& g, std::span<const std::size_t> argmax,
                        std::span<const T> gy, std::span<T> gx) {
    for (auto& v : gx) v = T{0};
    const std::size_t outputs = g.batch * g.channels * g.out_h() * g.out_w();
    for (std::size_t i = 0; i < outputs; ++i) gx[argmax[i]] += gy[i];
}

#define TSL_INSTANTIATE_REFERENCE(T)                                                                \
    template void linear_forward<T>(const LinearGeometry&, std::span<const T>, std::span<const T>,   \
                                    std::span<const T>, std::span<T>);                               \
    template void linear_backward<T>(const LinearGeometry&, std::span<const T>, std::span<const T>,  \
                                     std::span<const T>, std::span<T>, std::span<T>, std::span<T>);  \
    template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,     \
                                    std::span<const T>, std::span<T>);                               \
    template void conv2d_backward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,    \
                                     std::span<const T>, std::span<T>, std::span<T>, std::span<T>);  \
    template void maxpool2d_forward<T>(const PoolGeometry&, std::span<const T>, std::span<T>,        \
                                       std::span<std::size_t>);                                      \
    template void maxpool2d_backward<T>(const PoolGeometry&, std::span<const std::size_t>,           \
                                        std::span<const T>, std::span<T>);

TSL_INSTANTIATE_REFERENCE(float)
TSL_INSTANTIATE_REFERENCE(double)

#undef TSL_INSTANTIATE_REFERENCE

}  // namespace tsl::kernels::reference
