#pragma once

// Raw numeric kernels behind the autodiff ops.
//
// Every reduction has one documented term order, shared by the OpenMP kernels
// in tsl::kernels and the serial loops in tsl::kernels::reference:
//
//   linear   y[i,j]  = (sum_k ascending x[i,k]*w[k,j]) + b[j]
//   conv2d   y[n,o,p,q] = (sum over (ci,ky,kx) ascending, in-bounds taps) + b[o]
//   dconv/dx g[n,c,y,x] = sum over (co,ky,kx) ascending of contributing taps
//   dconv/dk g[o,c,u,v] = sum over (n,p,q) ascending
//   dconv/db g[o]       = sum over (n,p,q) ascending
//   maxpool  first maximum in row-major window scan wins
//
// Accumulators start at zero; bias is added last. Parallelism only splits
// independent outputs, so parallel and serial results are bitwise equal.

#include <cstddef>
#include <span>

namespace tsl::kernels {

struct LinearGeometry {
    std::size_t rows;     // batch m
    std::size_t inner;    // k
    std::size_t columns;  // n
};

struct ConvGeometry {
    std::size_t batch;
    std::size_t in_channels;
    std::size_t height;
    std::size_t width;
    std::size_t out_channels;
    std::size_t kernel_h;
    std::size_t kernel_w;
    std::size_t stride;
    std::size_t padding;

    std::size_t out_h() const { return (height + 2 * padding - kernel_h) / stride + 1; }
    std::size_t out_w() const { return (width + 2 * padding - kernel_w) / stride + 1; }
};

struct PoolGeometry {
    std::size_t batch;
    std::size_t channels;
    std::size_t height;
    std::size_t width;
    std::size_t window;
    std::size_t stride;

    std::size_t out_h() const { return (height - window) / stride + 1; }
    std::size_t out_w() const { return (width - window) / stride + 1; }
};

// Output extent of a sliding window; throws ConfigError unless it is a positive integer.
std::size_t window_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding,
                          const char* what);

void set_num_threads(int threads);
int num_threads();

template <class T>
void linear_forward(const LinearGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> b, std::span<T> y);
template <class T>
void linear_backward(const LinearGeometry& g, std::span<const T> x, std::span<const T> w,
                     std::span<const T> gy, std::span<T> gx, std::span<T> gw, std::span<T> gb);

template <class T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> k,
                    std::span<const T> b, std::span<T> y);
template <class T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> x, std::span<const T> k,
                     std::span<const T> gy, std::span<T> gx, std::span<T> gk, std::span<T> gb);

// argmax receives, per output cell, the flat input index chosen.
template <class T>
void maxpool2d_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y,
                       std::span<std::size_t> argmax);
template <class T>
void maxpool2d_backward(const PoolGeometry& g, std::span<const std::size_t> argmax,
                        std::span<const T> gy, std::span<T> gx);

template <class T>
void relu_forward(std::span<const T> x, std::span<T> y);
template <class T>
void relu_backward(std::span<const T> x, std::span<const T> gy, std::span<T> gx);

namespace reference {

template <class T>
void linear_forward(const LinearGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> b, std::span<T> y);
template <class T>
void linear_backward(const LinearGeometry& g, std::span<const T> x, std::span<const T> w,
                     std::span<const T> gy, std::span<T> gx, std::span<T> gw, std::span<T> gb);
template <class T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> k,
                    std::span<const T> b, std::span<T> y);
template <class T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> x, std::span<const T> k,
                     std::span<const T> gy, std::span<T> gx, std::span<T> gk, std::span<T> gb);
template <class T>
void maxpool2d_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y,
                       std::span<std::size_t> argmax);
template <class T>
void maxpool2d_backward(const PoolGeometry& g, std::span<const std::size_t> argmax,
                        std::span<const T> gy, std::span<T> gx);

}  // namespace reference
}  // namespace tsl::kernels
