#include "i2v/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "i2v/kernels.hpp"

namespace i2v::ag {

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> v) {
    nodes_.push_back(Node{std::move(v), {}, false, {}, nullptr});
    return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename T>
Var<T> Tape<T>::param(const Parameter<T>& p) {
    const bool track = record_ && p.trainable;
    nodes_.push_back(Node{p.value, {}, track, {}, track ? &p : nullptr});
    return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename T>
Var<T> Tape<T>::push(Tensor<T> value, bool needs_grad, Backward backward) {
    needs_grad = needs_grad && record_;
    nodes_.push_back(Node{std::move(value), {}, needs_grad, needs_grad ? std::move(backward) : Backward{}, nullptr});
    return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename T>
Tensor<T>& Tape<T>::grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
}

template <typename T>
void Tape<T>::backward(const Var<T>& loss, T seed) {
    if (loss.tape() != this) throw std::invalid_argument("loss belongs to another tape");
    if (value(loss.id()).size() != 1) throw std::invalid_argument("backward needs a scalar loss");
    if (!needs_grad(loss.id())) return;
    grad(loss.id())[0] += seed;
    for (int id = loss.id(); id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.needs_grad || n.grad.empty()) continue;
        if (n.backward) n.backward(*this, id);
        if (n.param) {
            const Parameter<T>& p = *n.param;
            if (!p.grad.same_shape(p.value)) p.grad = Tensor<T>(p.value.shape());
            for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
        }
    }
}

namespace {

template <typename T>
bool any_grad(std::initializer_list<Var<T>> vs) {
    for (const auto& v : vs)
        if (v.valid() && v.tape()->needs_grad(v.id())) return true;
    return false;
}

template <typename T>
Tape<T>& tape_of(const Var<T>& v) {
    if (!v.valid()) throw std::invalid_argument("operation on an empty variable");
    return *v.tape();
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                    shape_string(b.shape()));
}

template <typename T>
Var<T> scalar_node(Tape<T>& tape, T v, bool needs, typename Tape<T>::Backward fn) {
    return tape.push(Tensor<T>({1}, v), needs, std::move(fn));
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
    Tape<T>& tape = tape_of(x);
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    if (xs.size() != 3 || ws.size() != 4 || ws[1] != xs[0] || ws[2] != ws[3])
        throw std::invalid_argument("conv2d: incompatible shapes " + shape_string(xs) + " * " + shape_string(ws));
    kernels::ConvGeometry g{xs[0], xs[1], xs[2], ws[0], ws[2], stride, pad};
    if (g.out_height() <= 0 || g.out_width() <= 0) throw std::invalid_argument("conv2d: empty output");
    Tensor<T> y({g.out_channels, g.out_height(), g.out_width()});
    kernels::conv2d_forward(g, x.value().data(), w.value().data(), b.valid() ? b.value().data() : nullptr, y.data());
    const int xi = x.id(), wi = w.id(), bi = b.valid() ? b.id() : -1;
    return tape.push(std::move(y), any_grad({x, w, b}), [g, xi, wi, bi](Tape<T>& t, int self) {
        const Tensor<T>& gy = t.grad(self);
        if (t.needs_grad(xi)) kernels::conv2d_backward_input(g, gy.data(), t.value(wi).data(), t.grad(xi).data());
        if (t.needs_grad(wi)) kernels::conv2d_backward_weight(g, t.value(xi).data(), gy.data(), t.grad(wi).data());
        if (bi >= 0 && t.needs_grad(bi)) {
            Tensor<T>& gb = t.grad(bi);
            const std::size_t plane = std::size_t(g.out_height()) * g.out_width();
            for (int c = 0; c < g.out_channels; ++c) {
                T s = 0;
                for (std::size_t i = 0; i < plane; ++i) s += gy[c * plane + i];
                gb[c] += s;
            }
        }
    });
}

template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
    Tape<T>& tape = tape_of(x);
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    if (xs.size() != 3 || ws.size() != 4 || ws[0] != xs[0] || ws[2] != ws[3])
        throw std::invalid_argument("conv_transpose2d: incompatible shapes " + shape_string(xs) + " * " +
                                    shape_string(ws));
    const int k = ws[2];
    const int ho = (xs[1] - 1) * stride - 2 * pad + k;
    const int wo = (xs[2] - 1) * stride - 2 * pad + k;
    // The equivalent forward convolution maps (Cout, ho, wo) -> (Cin, H, W).
    kernels::ConvGeometry g{ws[1], ho, wo, xs[0], k, stride, pad};
    if (g.out_height() != xs[1] || g.out_width() != xs[2])
        throw std::invalid_argument("conv_transpose2d: geometry does not invert");
    Tensor<T> y({ws[1], ho, wo});
    kernels::conv2d_backward_input(g, x.value().data(), w.value().data(), y.data());
    if (b.valid()) {
        const std::size_t plane = std::size_t(ho) * wo;
        for (int c = 0; c < ws[1]; ++c)
            for (std::size_t i = 0; i < plane; ++i) y[c * plane + i] += b.value()[c];
    }
    const int xi = x.id(), wi = w.id(), bi = b.valid() ? b.id() : -1;
    return tape.push(std::move(y), any_grad({x, w, b}), [g, xi, wi, bi](Tape<T>& t, int self) {
        const Tensor<T>& gy = t.grad(self);
        if (t.needs_grad(xi)) {
            Tensor<T> tmp(t.value(xi).shape());
            kernels::conv2d_forward(g, gy.data(), t.value(wi).data(), static_cast<const T*>(nullptr), tmp.data());
            Tensor<T>& gx = t.grad(xi);
            for (std::size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
        }
        if (t.needs_grad(wi)) kernels::conv2d_backward_weight(g, gy.data(), t.value(xi).data(), t.grad(wi).data());
        if (bi >= 0 && t.needs_grad(bi)) {
            Tensor<T>& gb = t.grad(bi);
            const std::size_t plane = std::size_t(g.in_height) * g.in_width;
            for (int c = 0; c < g.in_channels; ++c) {
                T s = 0;
                for (std::size_t i = 0; i < plane; ++i) s += gy[c * plane + i];
                gb[c] += s;
            }
        }
    });
}

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
    Tape<T>& tape = tape_of(x);
    const auto& xs = x.shape();
    if (xs.size() != 3 || gamma.value().size() != std::size_t(xs[0]) || beta.value().size() != std::size_t(xs[0]))
        throw std::invalid_argument("batch_norm: bad shapes");
    const int channels = xs[0];
    const std::size_t plane = std::size_t(xs[1]) * xs[2];
    auto xhat = std::make_shared<Tensor<T>>(xs);
    auto inv_std = std::make_shared<std::vector<T>>(channels);
    Tensor<T> y(xs);
    const T* xv = x.value().data();
    const T* gv = gamma.value().data();
    const T* bv = beta.value().data();
#pragma omp parallel for schedule(static)
    for (int c = 0; c < channels; ++c) {
        const T* in = xv + c * plane;
        T mean = 0;
        for (std::size_t i = 0; i < plane; ++i) mean += in[i];
        mean /= T(plane);
        T var = 0;
        for (std::size_t i = 0; i < plane; ++i) var += (in[i] - mean) * (in[i] - mean);
        var /= T(plane);
        const T is = T(1) / std::sqrt(var + eps);
        (*inv_std)[c] = is;
        for (std::size_t i = 0; i < plane; ++i) {
            const T h = (in[i] - mean) * is;
            (*xhat)[c * plane + i] = h;
            y[c * plane + i] = gv[c] * h + bv[c];
        }
    }
    const int xi = x.id(), gi = gamma.id(), bi = beta.id();
    return tape.push(std::move(y), any_grad({x, gamma, beta}),
                     [xi, gi, bi, xhat, inv_std, channels, plane](Tape<T>& t, int self) {
                         const Tensor<T>& gy = t.grad(self);
                         const Tensor<T>& gam = t.value(gi);
                         const bool need_x = t.needs_grad(xi), need_g = t.needs_grad(gi), need_b = t.needs_grad(bi);
                         T* gx = need_x ? t.grad(xi).data() : nullptr;
                         T* gg = need_g ? t.grad(gi).data() : nullptr;
                         T* gb = need_b ? t.grad(bi).data() : nullptr;
#pragma omp parallel for schedule(static)
                         for (int c = 0; c < channels; ++c) {
                             T sum_dy = 0, sum_dy_h = 0;
                             for (std::size_t i = 0; i < plane; ++i) {
                                 sum_dy += gy[c * plane + i];
                                 sum_dy_h += gy[c * plane + i] * (*xhat)[c * plane + i];
                             }
                             if (gg) gg[c] += sum_dy_h;
                             if (gb) gb[c] += sum_dy;
                             if (gx) {
                                 const T k = gam[c] * (*inv_std)[c] / T(plane);
                                 for (std::size_t i = 0; i < plane; ++i) {
                                     const std::size_t j = c * plane + i;
                                     gx[j] += k * (T(plane) * gy[j] - sum_dy - (*xhat)[j] * sum_dy_h);
                                 }
                             }
                         }
                     });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
    Tape<T>& tape = tape_of(x);
    Tensor<T> y = x.value();
    for (auto& v : y.storage()) v = v > 0 ? v : v * slope;
    const int xi = x.id();
    return tape.push(std::move(y), any_grad({x}), [xi, slope](Tape<T>& t, int self) {
        const Tensor<T>& gy = t.grad(self);
        const Tensor<T>& xv = t.value(xi);
        Tensor<T>& gx = t.grad(xi);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += xv[i] > 0 ? gy[i] : gy[i] * slope;
    });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
    Tape<T>& tape = tape_of(x);
    Tensor<T> y = x.value();
    for (auto& v : y.storage()) v = v > 0 ? v : T(0);
    const int xi = x.id();
    return tape.push(std::move(y), any_grad({x}), [xi](Tape<T>& t, int self) {
        const Tensor<T>& gy = t.grad(self);
        const Tensor<T>& xv = t.value(xi);
        Tensor<T>& gx = t.grad(xi);
        for (std::size_t i = 0; i < gy.size(); ++i)
            if (xv[i] > 0) gx[i] += gy[i];
    });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
    Tape<T>& tape = tape_of(x);
    Tensor<T> y = x.value();
    for (auto& v : y.storage()) v = v >= 0 ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
    const int xi = x.id();
    return tape.push(std::move(y), any_grad({x}), [xi](Tape<T>& t, int self) {
        const Tensor<T>& gy = t.grad(self);
        const Tensor<T>& yv = t.value(self);
        Tensor<T>& gx = t.grad(xi);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * yv[i] * (T(1) - yv[i]);
    });
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
    Tape<T>& tape = tape_of(a);
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (as.size() != 3 || bs.size() != 3 || as[1] != bs[1] || as[2] != bs[2])
        throw std::invalid_argument("concat_channels: spatial mismatch " + shape_string(as) + " vs " + shape_string(bs));
    Tensor<T> y({as[0] + bs[0], as[1], as[2]});
    std::copy(a.value().storage().begin(), a.value().storage().end(), y.data());
    std::copy(b.value().storage().begin(), b.value().storage().end(), y.data() + a.value().size());
    const int ai = a.id(), bi = b.id();
    const std::size_t na = a.value().size();
    return tape.push(std::move(y), any_grad({a, b}), [ai, bi, na](Tape<T>& t, int self) {
        const Tensor<T>& gy = t.grad(self);
        if (t.needs_grad(ai)) {
            Tensor<T>& ga = t.grad(ai);
            for (std::size_t i = 0; i < na; ++i) ga[i] += gy[i];
        }
        if (t.needs_grad(bi)) {
            Tensor<T>& gb = t.grad(bi);
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[na + i];
        }
    });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    return add_scaled(a, b, T(1));
}

template <typename T>
Var<T> add_scaled(const Var<T>& a, const Var<T>& b, T s) {
    Tape<T>& tape = tape_of(a);
    require_same_shape(a, b, "add");
    Tensor<T> y = a.value();
    const Tensor<T>& bv = b.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * bv[i];
    const int ai = a.id(), bi = b.id();
    return tape.push(std::move(y), any_grad({a, b}), [ai, bi, s](Tape<T>& t, int self) {
        const Tensor<T>& gy = t.grad(self);
        if (t.needs_grad(ai)) {
            Tensor<T>& ga = t.grad(ai);
            for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        }
        if (t.needs_grad(bi)) {
            Tensor<T>& gb = t.grad(bi);
            for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += s * gy[i];
        }
    });
}

template <typename T>
Var<T> mul_const(const Var<T>& a, const Tensor<T>& m) {
    Tape<T>& tape = tape_of(a);
    if (!a.value().same_shape(m)) throw std::invalid_argument("mul_const: shape mismatch");
    Tensor<T> y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= m[i];
    const int ai = a.id();
    return tape.push(std::move(y), any_grad({a}), [ai, m](Tape<T>& t, int self) {
        const Tensor<T>& gy = t.grad(self);
        Tensor<T>& ga = t.grad(ai);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * m[i];
    });
}

template <typename T>
Var<T> spatial_softmax(const Var<T>& x) {
    Tape<T>& tape = tape_of(x);
    const auto& xs = x.shape();
    if (xs.size() != 3) throw std::invalid_argument("spatial_softmax: expects (C, h, w)");
    const int channels = xs[0];
    const std::size_t plane = std::size_t(xs[1]) * xs[2];
    Tensor<T> y(xs);
    const T* xv = x.value().data();
#pragma omp parallel for schedule(static)
    for (int c = 0; c < channels; ++c) {
        const T* in = xv + c * plane;
        T* out = y.data() + c * plane;
        const T mx = *std::max_element(in, in + plane);
        T s = 0;
        for (std::size_t i = 0; i < plane; ++i) s += (out[i] = std::exp(in[i] - mx));
        for (std::size_t i = 0; i < plane; ++i) out[i] /= s;
    }
    const int xi = x.id();
    return tape.push(std::move(y), any_grad({x}), [xi, channels, plane](Tape<T>& t, int self) {
        const Tensor<T>& gy = t.grad(self);
        const Tensor<T>& p = t.value(self);
        Tensor<T>& gx = t.grad(xi);
        for (int c = 0; c < channels; ++c) {
            T dot = 0;
            for (std::size_t i = 0; i < plane; ++i) dot += p[c * plane + i] * gy[c * plane + i];
            for (std::size_t i = 0; i < plane; ++i) gx[c * plane + i] += p[c * plane + i] * (gy[c * plane + i] - dot);
        }
    });
}

template <typename T>
Var<T> expected_coordinates(const Var<T>& p, int image_h, int image_w) {
    Tape<T>& tape = tape_of(p);
    const auto& ps = p.shape();
    if (ps.size() != 3) throw std::invalid_argument("expected_coordinates: expects (C, h, w)");
    const int channels = ps[0], h = ps[1], w = ps[2];
    const T sx = T(image_w) / T(w), sy = T(image_h) / T(h);
    auto cx = [sx](int j) { return (T(j) + T(0.5)) * sx - T(0.5); };
    auto cy = [sy](int i) { return (T(i) + T(0.5)) * sy - T(0.5); };
    Tensor<T> y({channels, 2});
    const Tensor<T>& pv = p.value();
    for (int c = 0; c < channels; ++c) {
        T ex = 0, ey = 0;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const T v = pv[(std::size_t(c) * h + i) * w + j];
                ex += v * cx(j);
                ey += v * cy(i);
            }
        y[2 * c] = ex;
        y[2 * c + 1] = ey;
    }
    const int pi = p.id();
    return tape.push(std::move(y), any_grad({p}), [pi, channels, h, w, cx, cy](Tape<T>& t, int self) {
        const Tensor<T>& gy = t.grad(self);
        Tensor<T>& gp = t.grad(pi);
        for (int c = 0; c < channels; ++c)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    gp[(std::size_t(c) * h + i) * w + j] += gy[2 * c] * cx(j) + gy[2 * c + 1] * cy(i);
    });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
    Tape<T>& tape = tape_of(x);
    const auto& xs = x.shape();
    if (xs.size() != 3) throw std::invalid_argument("global_avg_pool: expects (C, h, w)");
    const int channels = xs[0];
    const std::size_t plane = std::size_t(xs[1]) * xs[2];
    Tensor<T> y({channels});
    for (int c = 0; c < channels; ++c) {
        T s = 0;
        for (std::size_t i = 0; i < plane; ++i) s += x.value()[c * plane + i];
        y[c] = s / T(plane);
    }
    const int xi = x.id();
    return tape.push(std::move(y), any_grad({x}), [xi, channels, plane](Tape<T>& t, int self) {
        const Tensor<T>& gy = t.grad(self);
        Tensor<T>& gx = t.grad(xi);
        for (int c = 0; c < channels; ++c)
            for (std::size_t i = 0; i < plane; ++i) gx[c * plane + i] += gy[c] / T(plane);
    });
}

template <typename T>
Var<T> dense_scalar(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    Tape<T>& tape = tape_of(x);
    if (x.value().size() != w.value().size() || b.value().size() != 1)
        throw std::invalid_argument("dense_scalar: shape mismatch");
    T s = b.value()[0];
    for (std::size_t i = 0; i < x.value().size(); ++i) s += x.value()[i] * w.value()[i];
    const int xi = x.id(), wi = w.id(), bi = b.id();
    return scalar_node(tape, s, any_grad({x, w, b}), [xi, wi, bi](Tape<T>& t, int self) {
        const T g = t.grad(self)[0];
        if (t.needs_grad(xi)) {
            Tensor<T>& gx = t.grad(xi);
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * t.value(wi)[i];
        }
        if (t.needs_grad(wi)) {
            Tensor<T>& gw = t.grad(wi);
            for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += g * t.value(xi)[i];
        }
        if (t.needs_grad(bi)) t.grad(bi)[0] += g;
    });
}

template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
    Tape<T>& tape = tape_of(a);
    require_same_shape(a, b, "mean_abs_diff");
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    const std::size_t n = av.size();
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += std::abs(av[i] - bv[i]);
    const int ai = a.id(), bi = b.id();
    return scalar_node(tape, s / T(n), any_grad({a, b}), [ai, bi, n](Tape<T>& t, int self) {
        const T g = t.grad(self)[0] / T(n);
        const Tensor<T>& av = t.value(ai);
        const Tensor<T>& bv = t.value(bi);
        const bool na = t.needs_grad(ai), nb = t.needs_grad(bi);
        T* ga = na ? t.grad(ai).data() : nullptr;
        T* gb = nb ? t.grad(bi).data() : nullptr;
        for (std::size_t i = 0; i < n; ++i) {
            const T d = av[i] - bv[i];
            const T sg = d > 0 ? g : (d < 0 ? -g : T(0));
            if (ga) ga[i] += sg;
            if (gb) gb[i] -= sg;
        }
    });
}

template <typename T>
Var<T> l2_distance(const Var<T>& a, const Var<T>& b) {
    Tape<T>& tape = tape_of(a);
    if (a.value().size() != b.value().size()) throw std::invalid_argument("l2_distance: size mismatch");
    T s = 0;
    for (std::size_t i = 0; i < a.value().size(); ++i) {
        const T d = a.value()[i] - b.value()[i];
        s += d * d;
    }
    const T norm = std::sqrt(s);
    const int ai = a.id(), bi = b.id();
    return scalar_node(tape, norm, any_grad({a, b}), [ai, bi, norm](Tape<T>& t, int self) {
        if (norm == T(0)) return;
        const T g = t.grad(self)[0] / norm;
        const Tensor<T>& av = t.value(ai);
        const Tensor<T>& bv = t.value(bi);
        const bool na = t.needs_grad(ai), nb = t.needs_grad(bi);
        for (std::size_t i = 0; i < av.size(); ++i) {
            const T d = (av[i] - bv[i]) * g;
            if (na) t.grad(ai)[i] += d;
            if (nb) t.grad(bi)[i] -= d;
        }
    });
}

template <typename T>
Var<T> neg_log(const Var<T>& x, T eps) {
    Tape<T>& tape = tape_of(x);
    if (x.value().size() != 1) throw std::invalid_argument("neg_log: expects a scalar");
    const T v = x.value()[0];
    const bool clamped = !(v > eps);
    const int xi = x.id();
    return scalar_node(tape, -std::log(clamped ? eps : v), any_grad({x}), [xi, clamped](Tape<T>& t, int self) {
        if (clamped) return;
        t.grad(xi)[0] -= t.grad(self)[0] / t.value(xi)[0];
    });
}

template <typename T>
Var<T> neg_log1m(const Var<T>& x, T eps) {
    Tape<T>& tape = tape_of(x);
    if (x.value().size() != 1) throw std::invalid_argument("neg_log1m: expects a scalar");
    const T v = T(1) - x.value()[0];
    const bool clamped = !(v > eps);
    const int xi = x.id();
    return scalar_node(tape, -std::log(clamped ? eps : v), any_grad({x}), [xi, clamped](Tape<T>& t, int self) {
        if (clamped) return;
        t.grad(xi)[0] += t.grad(self)[0] / (T(1) - t.value(xi)[0]);
    });
}

template <typename T>
Var<T> weighted_sum(const std::vector<std::pair<Var<T>, T>>& terms) {
    if (terms.empty()) throw std::invalid_argument("weighted_sum: no terms");
    Tape<T>& tape = tape_of(terms.front().first);
    T s = 0;
    bool needs = false;
    std::vector<std::pair<int, T>> ids;
    for (const auto& [v, w] : terms) {
        if (v.value().size() != 1) throw std::invalid_argument("weighted_sum: terms must be scalars");
        s += w * v.value()[0];
        needs = needs || tape.needs_grad(v.id());
        ids.emplace_back(v.id(), w);
    }
    return scalar_node(tape, s, needs, [ids](Tape<T>& t, int self) {
        const T g = t.grad(self)[0];
        for (const auto& [id, w] : ids)
            if (t.needs_grad(id)) t.grad(id)[0] += w * g;
    });
}

#define I2V_INSTANTIATE(T)                                                                   \
    template class Tape<T>;                                                                  \
    template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);           \
    template Var<T> conv_transpose2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int); \
    template Var<T> batch_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);              \
    template Var<T> leaky_relu(const Var<T>&, T);                                            \
    template Var<T> relu(const Var<T>&);                                                     \
    template Var<T> sigmoid(const Var<T>&);                                                  \
    template Var<T> concat_channels(const Var<T>&, const Var<T>&);                           \
    template Var<T> add(const Var<T>&, const Var<T>&);                                       \
    template Var<T> add_scaled(const Var<T>&, const Var<T>&, T);                             \
    template Var<T> mul_const(const Var<T>&, const Tensor<T>&);                              \
    template Var<T> spatial_softmax(const Var<T>&);                                          \
    template Var<T> expected_coordinates(const Var<T>&, int, int);                           \
    template Var<T> global_avg_pool(const Var<T>&);                                          \
    template Var<T> dense_scalar(const Var<T>&, const Var<T>&, const Var<T>&);               \
    template Var<T> mean_abs_diff(const Var<T>&, const Var<T>&);                             \
    template Var<T> l2_distance(const Var<T>&, const Var<T>&);                               \
    template Var<T> neg_log(const Var<T>&, T);                                               \
    template Var<T> neg_log1m(const Var<T>&, T);                                             \
    template Var<T> weighted_sum(const std::vector<std::pair<Var<T>, T>>&);

I2V_INSTANTIATE(float)
I2V_INSTANTIATE(double)

#undef I2V_INSTANTIATE

}  // namespace i2v::ag
