#include "tslearn/kernels.hpp"

#include <algorithm>
#include <cstddef>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tslearn/errors.hpp"

namespace tsl::kernels {

using index_t = std::ptrdiff_t;

std::size_t window_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding,
                          const char* what) {
    if (kernel == 0 || stride == 0) {
        throw ConfigError(std::string(what) + ": kernel and stride must be positive");
    }
    const std::size_t span = in + 2 * padding;
    if (span < kernel) {
        throw ConfigError(std::string(what) + ": window " + std::to_string(kernel) +
                          " larger than padded extent " + std::to_string(span));
    }
    if ((span - kernel) % stride != 0) {
        throw ConfigError(std::string(what) + ": output extent (" + std::to_string(in) + " + 2*" +
                          std::to_string(padding) + " - " + std::to_string(kernel) + ")/" +
                          std::to_string(stride) + " + 1 is not an integer");
    }
    return (span - kernel) / stride + 1;
}

void set_num_threads(int threads) {
#ifdef _OPENMP
    omp_set_num_threads(std::max(1, threads));
#else
    (void)threads;
#endif
}

int num_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

template <class T>
void linear_forward(const LinearGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> b, std::span<T> y) {
    const index_t rows = static_cast<index_t>(g.rows);
    const std::size_t n = g.columns;
#pragma omp parallel for schedule(static)
    for (index_t i = 0; i < rows; ++i) {
        T* out = y.data() + i * n;
        std::fill(out, out + n, T{0});
        const T* xi = x.data() + i * g.inner;
        for (std::size_t k = 0; k < g.inner; ++k) {
            const T xv = xi[k];
            const T* wk = w.data() + k * n;
            for (std::size_t j = 0; j < n; ++j) out[j] += xv * wk[j];
        }
        for (std::size_t j = 0; j < n; ++j) out[j] += b[j];
    }
}

template <class T>
void linear_backward(const LinearGeometry& g, std::span<const T> x, std::span<const T> w,
                     std::span<const T> gy, std::span<T> gx, std::span<T> gw, std::span<T> gb) {
    const std::size_t n = g.columns;
    if (!gx.empty()) {
        const index_t rows = static_cast<index_t>(g.rows);
#pragma omp parallel for schedule(static)
        for (index_t i = 0; i < rows; ++i) {
            const T* gyi = gy.data() + i * n;
            for (std::size_t k = 0; k < g.inner; ++k) {
                const T* wk = w.data() + k * n;
                T acc{0};
                for (std::size_t j = 0; j < n; ++j) acc += gyi[j] * wk[j];
                gx[i * g.inner + k] = acc;
            }
        }
    }
    if (!gw.empty()) {
        const index_t inner = static_cast<index_t>(g.inner);
#pragma omp parallel for schedule(static)
        for (index_t k = 0; k < inner; ++k) {
            T* gwk = gw.data() + k * n;
            std::fill(gwk, gwk + n, T{0});
            for (std::size_t i = 0; i < g.rows; ++i) {
                const T xv = x[i * g.inner + k];
                const T* gyi = gy.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) gwk[j] += xv * gyi[j];
            }
        }
    }
    if (!gb.empty()) {
        std::fill(gb.begin(), gb.end(), T{0});
        for (std::size_t i = 0; i < g.rows; ++i) {
            for (std::size_t j = 0; j < n; ++j) gb[j] += gy[i * n + j];
        }
    }
}

// Output positions o in [lo, hi) whose input coordinate o*stride - pad + k lies in [0, in).
struct ValidRange {
    std::size_t lo, hi;
};

inline ValidRange valid_range(std::size_t out, std::size_t in, std::size_t stride, std::size_t pad, std::size_t k) {
    std::size_t lo = 0;
    if (pad > k) lo = (pad - k + stride - 1) / stride;
    if (in + pad <= k) return {0, 0};
    std::size_t hi = (in + pad - k - 1) / stride + 1;
    hi = std::min(hi, out);
    return {std::min(lo, hi), hi};
}

template <class T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> k,
                    std::span<const T> b, std::span<T> y) {
    const std::size_t oh = g.out_h(), ow = g.out_w();
    const index_t planes = static_cast<index_t>(g.batch * g.out_channels);
    const std::size_t s = g.stride, p = g.padding;
#pragma omp parallel for schedule(static)
    for (index_t plane = 0; plane < planes; ++plane) {
        const std::size_t n = static_cast<std::size_t>(plane) / g.out_channels;
        const std::size_t co = static_cast<std::size_t>(plane) % g.out_channels;
        T* out = y.data() + static_cast<std::size_t>(plane) * oh * ow;
        std::fill(out, out + oh * ow, T{0});
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            const T* xin = x.data() + (n * g.in_channels + ci) * g.height * g.width;
            const T* kern = k.data() + (co * g.in_channels + ci) * g.kernel_h * g.kernel_w;
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
                const ValidRange ry = valid_range(oh, g.height, s, p, ky);
                for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                    const ValidRange rx = valid_range(ow, g.width, s, p, kx);
                    const T wv = kern[ky * g.kernel_w + kx];
                    const std::size_t len = rx.hi - rx.lo;
                    if (len == 0) continue;
                    for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
                        const T* xp = xin + (oy * s + ky - p) * g.width + (rx.lo * s + kx - p);
                        T* op = out + oy * ow + rx.lo;
                        if (s == 1) {
                            for (std::size_t i = 0; i < len; ++i) op[i] += xp[i] * wv;
                        } else {
                            for (std::size_t i = 0; i < len; ++i) op[i] += xp[i * s] * wv;
                        }
                    }
                }
            }
        }
        const T bias = b[co];
        for (std::size_t i = 0; i < oh * ow; ++i) out[i] += bias;
    }
}

template <class T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> x, std::span<const T> k,
                     std::span<const T> gy, std::span<T> gx, std::span<T> gk, std::span<T> gb) {
    const std::size_t oh = g.out_h(), ow = g.out_w();
    const std::size_t kk = g.kernel_h * g.kernel_w;
    const std::size_t s = g.stride, p = g.padding;

    if (!gx.empty()) {
        const index_t planes = static_cast<index_t>(g.batch * g.in_channels);
#pragma omp parallel for schedule(static)
        for (index_t plane = 0; plane < planes; ++plane) {
            const std::size_t n = static_cast<std::size_t>(plane) / g.in_channels;
            const std::size_t ci = static_cast<std::size_t>(plane) % g.in_channels;
            T* gin = gx.data() + static_cast<std::size_t>(plane) * g.height * g.width;
            std::fill(gin, gin + g.height * g.width, T{0});
            for (std::size_t co = 0; co < g.out_channels; ++co) {
                const T* gout = gy.data() + (n * g.out_channels + co) * oh * ow;
                const T* kern = k.data() + (co * g.in_channels + ci) * kk;
                for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
                    const ValidRange ry = valid_range(oh, g.height, s, p, ky);
                    for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                        const ValidRange rx = valid_range(ow, g.width, s, p, kx);
                        const T wv = kern[ky * g.kernel_w + kx];
                        const std::size_t len = rx.hi - rx.lo;
                        if (len == 0) continue;
                    if (len == 0) continue;
                        for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
                            T* gp = gin + (oy * s + ky - p) * g.width + (rx.lo * s + kx - p);
                            const T* gop = gout + oy * ow + rx.lo;
                            if (s == 1) {
                                for (std::size_t i = 0; i < len; ++i) gp[i] += gop[i] * wv;
                            } else {
                                for (std::size_t i = 0; i < len; ++i) gp[i * s] += gop[i] * wv;
                            }
                        }
                    }
                }
            }
        }
    }

    if (!gk.empty()) {
        const index_t pairs = static_cast<index_t>(g.out_channels * g.in_channels);
#pragma omp parallel for schedule(static)
        for (index_t pair = 0; pair < pairs; ++pair) {
            const std::size_t co = static_cast<std::size_t>(pair) / g.in_channels;
            const std::size_t ci = static_cast<std::size_t>(pair) % g.in_channels;
            T* gkp = gk.data() + static_cast<std::size_t>(pair) * kk;
            std::fill(gkp, gkp + kk, T{0});
            // Each tap keeps its own (n, oy, ox) accumulation chain; taps are interleaved for ILP.
            for (std::size_t n = 0; n < g.batch; ++n) {
                const T* gout = gy.data() + (n * g.out_channels + co) * oh * ow;
                const T* xin = x.data() + (n * g.in_channels + ci) * g.height * g.width;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const T* gorow = gout + oy * ow;
                    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
                        const ValidRange ry = valid_range(oh, g.height, s, p, ky);
                        if (oy < ry.lo || oy >= ry.hi) continue;
                        const T* xrow = xin + (oy * s + ky - p) * g.width;
                        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                            const ValidRange rx = valid_range(ow, g.width, s, p, kx);
                            if (rx.hi == rx.lo) continue;
                            const T* xp = xrow + (rx.lo * s + kx - p);
                            const T* gop = gorow + rx.lo;
                            T acc = gkp[ky * g.kernel_w + kx];
                            for (std::size_t i = 0; i < rx.hi - rx.lo; ++i) acc += gop[i] * xp[i * s];
                            gkp[ky * g.kernel_w + kx] = acc;
                        }
                    }
                }
            }
        }
    }

    if (!gb.empty()) {
        const index_t channels = static_cast<index_t>(g.out_channels);
#pragma omp parallel for schedule(static)
        for (index_t co = 0; co < channels; ++co) {
            T acc{0};
            for (std::size_t n = 0; n < g.batch; ++n) {
                const T* gout = gy.data() + (n * g.out_channels + static_cast<std::size_t>(co)) * oh * ow;
                for (std::size_t i = 0; i < oh * ow; ++i) acc += gout[i];
            }
            gb[static_cast<std::size_t>(co)] = acc;
        }
    }
}

template <class T>
void maxpool2d_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y,
                       std::span<std::size_t> argmax) {
    const std::size_t oh = g.out_h(), ow = g.out_w();
    const index_t planes = static_cast<index_t>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
    for (index_t plane = 0; plane < planes; ++plane) {
        const std::size_t in_base = static_cast<std::size_t>(plane) * g.height * g.width;
        const std::size_t out_base = static_cast<std::size_t>(plane) * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                std::size_t best = in_base + (oy * g.stride) * g.width + ox * g.stride;
                for (std::size_t wy = 0; wy < g.window; ++wy) {
                    const std::size_t row = in_base + (oy * g.stride + wy) * g.width + ox * g.stride;
                    for (std::size_t wx = 0; wx < g.window; ++wx) {
                        if (x[row + wx] > x[best]) best = row + wx;
                    }
                }
                y[out_base + oy * ow + ox] = x[best];
                argmax[out_base + oy * ow + ox] = best;
            }
        }
    }
}

template <class T>
void maxpool2d_backward(const PoolGeometry& g, std::span<const std::size_t> argmax,
                        std::span<const T> gy, std::span<T> gx) {
    const std::size_t oh = g.out_h(), ow = g.out_w();
    const index_t planes = static_cast<index_t>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
    for (index_t plane = 0; plane < planes; ++plane) {
        const std::size_t in_base = static_cast<std::size_t>(plane) * g.height * g.width;
        std::fill(gx.begin() + static_cast<index_t>(in_base),
                  gx.begin() + static_cast<index_t>(in_base + g.height * g.width), T{0});
        const std::size_t out_base = static_cast<std::size_t>(plane) * oh * ow;
        for (std::size_t i = 0; i < oh * ow; ++i) gx[argmax[out_base + i]] += gy[out_base + i];
    }
}

template <class T>
void relu_forward(std::span<const T> x, std::span<T> y) {
    const index_t n = static_cast<index_t>(x.size());
#pragma omp parallel for schedule(static)
    for (index_t i = 0; i < n; ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
}

template <class T>
void relu_backward(std::span<const T> x, std::span<const T> gy, std::span<T> gx) {
    const index_t n = static_cast<index_t>(x.size());
#pragma omp parallel for schedule(static)
    for (index_t i = 0; i < n; ++i) gx[i] = x[i] > T{0} ? gy[i] : T{0};
}

#define TSL_INSTANTIATE_KERNELS(T)                                                                  \
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
                                        std::span<const T>, std::span<T>);                           \
    template void relu_forward<T>(std::span<const T>, std::span<T>);                                 \
    template void relu_backward<T>(std::span<const T>, std::span<const T>, std::span<T>);

TSL_INSTANTIATE_KERNELS(float)
TSL_INSTANTIATE_KERNELS(double)

#undef TSL_INSTANTIATE_KERNELS

}  // namespace tsl::kernels
