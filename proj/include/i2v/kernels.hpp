#pragma once

// Convolution kernels. Two implementations share one contract:
//   reference:: serial direct loops, kept as the ground truth for tests
//   parallel::  im2col + blocked GEMM, OpenMP over independent output blocks
// Every output element is produced by exactly one thread with a fixed
// summation order, so the parallel path is deterministic for any thread count.

#include <cstddef>

namespace i2v::kernels {

struct ConvGeometry {
    int in_channels = 0;
    int in_height = 0;
    int in_width = 0;
    int out_channels = 0;
    int kernel = 4;
    int stride = 2;
    int pad = 1;

    int out_height() const { return (in_height + 2 * pad - kernel) / stride + 1; }
    int out_width() const { return (in_width + 2 * pad - kernel) / stride + 1; }
    std::size_t input_size() const { return std::size_t(in_channels) * in_height * in_width; }
    std::size_t output_size() const { return std::size_t(out_channels) * out_height() * out_width(); }
    std::size_t weight_size() const { return std::size_t(out_channels) * in_channels * kernel * kernel; }
};

enum class Backend { reference, parallel };

void set_backend(Backend b);
Backend backend();

namespace reference {
// y = conv(x, w) + bias; bias may be null. Overwrites y.
template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y);
// dx += conv^T(dy, w)
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* dy, const T* w, T* dx);
// dw += dy (x) x
template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, const T* x, const T* dy, T* dw);
}  // namespace reference

namespace parallel {
template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y);
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* dy, const T* w, T* dx);
template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, const T* x, const T* dy, T* dw);
}  // namespace parallel

// Dispatch on the process-wide backend (parallel by default).
template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y) {
    if (backend() == Backend::reference) reference::conv2d_forward(g, x, w, bias, y);
    else parallel::conv2d_forward(g, x, w, bias, y);
}
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* dy, const T* w, T* dx) {
    if (backend() == Backend::reference) reference::conv2d_backward_input(g, dy, w, dx);
    else parallel::conv2d_backward_input(g, dy, w, dx);
}
template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, const T* x, const T* dy, T* dw) {
    if (backend() == Backend::reference) reference::conv2d_backward_weight(g, x, dy, dw);
    else parallel::conv2d_backward_weight(g, x, dy, dw);
}

}  // namespace i2v::kernels
