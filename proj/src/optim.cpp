#include "i2v/optim.hpp"

#include <cmath>

namespace i2v::optim {

template <typename T>
void Adam<T>::step(const std::vector<ag::Parameter<T>*>& params, T grad_scale) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    const T b1 = T(cfg_.beta1), b2 = T(cfg_.beta2);
    const T lr = T(cfg_.learning_rate), eps = T(cfg_.eps);
    for (ag::Parameter<T>* p : params) {
        Moments& mo = moments_[p->name];
        if (!mo.m.same_shape(p->value)) {
            mo.m = Tensor<T>(p->value.shape());
            mo.v = Tensor<T>(p->value.shape());
        }
        T* w = p->value.data();
        const T* g = p->grad.data();
        T* m = mo.m.data();
        T* v = mo.v.data();
        const std::size_t n = p->value.size();
        for (std::size_t i = 0; i < n; ++i) {
            const T gi = g[i] * grad_scale;
            m[i] = b1 * m[i] + (T(1) - b1) * gi;
            v[i] = b2 * v[i] + (T(1) - b2) * gi * gi;
            const T mhat = m[i] / T(c1);
            const T vhat = v[i] / T(c2);
            w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace i2v::optim
