#include <algorithm>
#include <atomic>
#include <cstddef>
#include <vector>

#include "i2v/kernels.hpp"

namespace i2v::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::parallel};
}

void set_backend(Backend b) { g_backend.store(b); }
Backend backend() { return g_backend.load(); }

namespace parallel {
namespace {

// Column matrix: row r = (ci * K + ky) * K + kx, column j = oy * Wo + ox.
template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
    const int ho = g.out_height(), wo = g.out_width(), k = g.kernel;
    const int rows = g.in_channels * k * k;
    const std::ptrdiff_t n = std::ptrdiff_t(ho) * wo;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const int kx = r % k, ky = (r / k) % k, ci = r / (k * k);
        T* out = col + r * n;
        const T* plane = x + std::ptrdiff_t(ci) * g.in_height * g.in_width;
        for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * g.stride - g.pad + ky;
            T* orow = out + std::ptrdiff_t(oy) * wo;
            if (iy < 0 || iy >= g.in_height) {
                std::fill(orow, orow + wo, T(0));
                continue;
            }
            const T* irow = plane + std::ptrdiff_t(iy) * g.in_width;
            for (int ox = 0; ox < wo; ++ox) {
                const int ix = ox * g.stride - g.pad + kx;
                orow[ox] = (ix < 0 || ix >= g.in_width) ? T(0) : irow[ix];
            }
        }
    }
}

// dx += col2im(dcol). Each input channel is owned by one thread.
template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, T* dx) {
    const int ho = g.out_height(), wo = g.out_width(), k = g.kernel;
    const std::ptrdiff_t n = std::ptrdiff_t(ho) * wo;
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < g.in_channels; ++ci) {
        T* plane = dx + std::ptrdiff_t(ci) * g.in_height * g.in_width;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* in = col + ((std::ptrdiff_t(ci) * k + ky) * k + kx) * n;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= g.in_height) continue;
                    T* prow = plane + std::ptrdiff_t(iy) * g.in_width;
                    const T* crow = in + std::ptrdiff_t(oy) * wo;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        if (ix >= 0 && ix < g.in_width) prow[ix] += crow[ox];
                    }
                }
            }
        }
    }
}

// C[i][j] += sum_k A(i,k) * B[k][j], A(i,k) = a[i * a_row + k * a_col].
// Blocks of 4 rows x 256 columns; the k loop is innermost-outer so each
// C element accumulates in a fixed order.
template <typename T>
void gemm_acc(int m, int n, int kdim, const T* a, std::ptrdiff_t a_row, std::ptrdiff_t a_col, const T* b, T* c) {
    constexpr int kRowBlock = 4;
    constexpr int kColBlock = 256;
    const int mblocks = (m + kRowBlock - 1) / kRowBlock;
    const int nblocks = (n + kColBlock - 1) / kColBlock;
#pragma omp parallel for collapse(2) schedule(static)
    for (int ib = 0; ib < mblocks; ++ib) {
        for (int jb = 0; jb < nblocks; ++jb) {
            const int i0 = ib * kRowBlock, i1 = std::min(m, i0 + kRowBlock);
            const int j0 = jb * kColBlock, nj = std::min(n, j0 + kColBlock) - j0;
            if (i1 - i0 == kRowBlock) {
                T* c0 = c + std::ptrdiff_t(i0) * n + j0;
                T* c1 = c0 + n;
                T* c2 = c1 + n;
                T* c3 = c2 + n;
                for (int k = 0; k < kdim; ++k) {
                    const T a0 = a[(i0 + 0) * a_row + k * a_col];
                    const T a1 = a[(i0 + 1) * a_row + k * a_col];
                    const T a2 = a[(i0 + 2) * a_row + k * a_col];
                    const T a3 = a[(i0 + 3) * a_row + k * a_col];
                    const T* brow = b + std::ptrdiff_t(k) * n + j0;
#pragma omp simd
                    for (int j = 0; j < nj; ++j) {
                        const T bj = brow[j];
                        c0[j] += a0 * bj;
                        c1[j] += a1 * bj;
                        c2[j] += a2 * bj;
                        c3[j] += a3 * bj;
                    }
                }
            } else {
                for (int i = i0; i < i1; ++i) {
                    T* ci = c + std::ptrdiff_t(i) * n + j0;
                    for (int k = 0; k < kdim; ++k) {
                        const T av = a[i * a_row + k * a_col];
                        const T* brow = b + std::ptrdiff_t(k) * n + j0;
#pragma omp simd
                        for (int j = 0; j < nj; ++j) ci[j] += av * brow[j];
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y) {
    const int rows = g.in_channels * g.kernel * g.kernel;
    const int n = g.out_height() * g.out_width();
    std::vector<T> col(std::size_t(rows) * n);
    im2col(g, x, col.data());
    for (int co = 0; co < g.out_channels; ++co)
        std::fill(y + std::ptrdiff_t(co) * n, y + std::ptrdiff_t(co + 1) * n, bias ? bias[co] : T(0));
    gemm_acc(g.out_channels, n, rows, w, rows, 1, col.data(), y);
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* dy, const T* w, T* dx) {
    const int rows = g.in_channels * g.kernel * g.kernel;
    const int n = g.out_height() * g.out_width();
    std::vector<T> col(std::size_t(rows) * n, T(0));
    gemm_acc(rows, n, g.out_channels, w, 1, rows, dy, col.data());
    col2im_add(g, col.data(), dx);
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, const T* x, const T* dy, T* dw) {
    const int rows = g.in_channels * g.kernel * g.kernel;
    const int n = g.out_height() * g.out_width();
    std::vector<T> col(std::size_t(rows) * n);
    im2col(g, x, col.data());
    const T* cp = col.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int co = 0; co < g.out_channels; ++co) {
        for (int r = 0; r < rows; ++r) {
            const T* drow = dy + std::ptrdiff_t(co) * n;
            const T* crow = cp + std::ptrdiff_t(r) * n;
            T acc = 0;
#pragma omp simd reduction(+ : acc)
            for (int j = 0; j < n; ++j) acc += drow[j] * crow[j];
            dw[std::ptrdiff_t(co) * rows + r] += acc;
        }
    }
}

template void conv2d_forward<float>(const ConvGeometry&, const float*, const float*, const float*, float*);
template void conv2d_forward<double>(const ConvGeometry&, const double*, const double*, const double*, double*);
template void conv2d_backward_input<float>(const ConvGeometry&, const float*, const float*, float*);
template void conv2d_backward_input<double>(const ConvGeometry&, const double*, const double*, double*);
template void conv2d_backward_weight<float>(const ConvGeometry&, const float*, const float*, float*);
template void conv2d_backward_weight<double>(const ConvGeometry&, const double*, const double*, double*);

}  // namespace parallel
}  // namespace i2v::kernels
