#pragma once

// Central finite-difference check of tape gradients with respect to a set of
// parameters. The loss builder is rerun for every probe.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "i2v/autograd.hpp"

namespace i2v::testing {

struct GradCheckResult {
    double max_rel_error = 0;
    int probes = 0;
};

// Relative error |a - n| / max(|a| + |n|, floor). The floor keeps entries whose
// true gradient is ~0 from dominating.
inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

// Probes up to `per_param` randomly chosen entries of each parameter.
inline GradCheckResult grad_check(const std::vector<ag::Parameter<double>*>& params,
                                  const std::function<ag::Var<double>(ag::Tape<double>&)>& loss_fn,
                                  int per_param = 6, double h = 1e-6, unsigned seed = 7) {
    for (auto* p : params) p->zero_grad();
    {
        ag::Tape<double> tape;
        tape.backward(loss_fn(tape));
    }
    auto eval = [&] {
        ag::Tape<double> tape(false);
        return loss_fn(tape).item();
    };
    GradCheckResult res;
    std::mt19937 rng(seed);
    for (auto* p : params) {
        const std::size_t n = p->value.size();
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(std::min<std::size_t>(n, per_param));
        for (std::size_t i : idx) {
            const double orig = p->value[i];
            p->value[i] = orig + h;
            const double up = eval();
            p->value[i] = orig - h;
            const double down = eval();
            p->value[i] = orig;
            const double numeric = (up - down) / (2 * h);
            res.max_rel_error = std::max(res.max_rel_error, rel_error(p->grad[i], numeric));
            ++res.probes;
        }
    }
    return res;
}

inline Tensor<double> random_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
    Tensor<double> t(std::move(shape));
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : t.storage()) v = u(rng);
    return t;
}

}  // namespace i2v::testing
