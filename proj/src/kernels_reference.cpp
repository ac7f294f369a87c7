#include "i2v/kernels.hpp"

namespace i2v::kernels::reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y) {
    const int ho = g.out_height(), wo = g.out_width(), k = g.kernel;
    for (int co = 0; co < g.out_channels; ++co) {
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                T acc = bias ? bias[co] : T(0);
                for (int ci = 0; ci < g.in_channels; ++ci) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * g.stride - g.pad + ky;
                        if (iy < 0 || iy >= g.in_height) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * g.stride - g.pad + kx;
                            if (ix < 0 || ix >= g.in_width) continue;
                            acc += w[((co * g.in_channels + ci) * k + ky) * k + kx] *
                                   x[(ci * g.in_height + iy) * g.in_width + ix];
                        }
                    }
                }
                y[(co * ho + oy) * wo + ox] = acc;
            }
        }
    }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* dy, const T* w, T* dx) {
    const int ho = g.out_height(), wo = g.out_width(), k = g.kernel;
    for (int co = 0; co < g.out_channels; ++co) {
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                const T grad = dy[(co * ho + oy) * wo + ox];
                for (int ci = 0; ci < g.in_channels; ++ci) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * g.stride - g.pad + ky;
                        if (iy < 0 || iy >= g.in_height) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * g.stride - g.pad + kx;
                            if (ix < 0 || ix >= g.in_width) continue;
                            dx[(ci * g.in_height + iy) * g.in_width + ix] +=
                                w[((co * g.in_channels + ci) * k + ky) * k + kx] * grad;
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, const T* x, const T* dy, T* dw) {
    const int ho = g.out_height(), wo = g.out_width(), k = g.kernel;
    for (int co = 0; co < g.out_channels; ++co) {
        for (int ci = 0; ci < g.in_channels; ++ci) {
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    T acc = 0;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * g.stride - g.pad + ky;
                        if (iy < 0 || iy >= g.in_height) continue;
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox * g.stride - g.pad + kx;
                            if (ix < 0 || ix >= g.in_width) continue;
                            acc += dy[(co * ho + oy) * wo + ox] * x[(ci * g.in_height + iy) * g.in_width + ix];
                        }
                    }
                    dw[((co * g.in_channels + ci) * k + ky) * k + kx] += acc;
                }
            }
        }
    }
}

template void conv2d_forward<float>(const ConvGeometry&, const float*, const float*, const float*, float*);
template void conv2d_forward<double>(const ConvGeometry&, const double*, const double*, const double*, double*);
template void conv2d_backward_input<float>(const ConvGeometry&, const float*, const float*, float*);
template void conv2d_backward_input<double>(const ConvGeometry&, const double*, const double*, double*);
template void conv2d_backward_weight<float>(const ConvGeometry&, const float*, const float*, float*);
template void conv2d_backward_weight<double>(const ConvGeometry&, const double*, const double*, double*);

}  // namespace i2v::kernels::reference
