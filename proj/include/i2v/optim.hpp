#pragma once

#include <map>
#include <string>
#include <vector>

#include "i2v/autograd.hpp"

namespace i2v::optim {

struct AdamConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moments are keyed by parameter name so they
/// survive checkpointing independent of container layout.
template <typename T>
class Adam {
public:
    struct Moments {
        Tensor<T> m;
        Tensor<T> v;
    };

    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    // Applies one update to every parameter from its accumulated gradient,
    // scaled by grad_scale.
    void step(const std::vector<ag::Parameter<T>*>& params, T grad_scale = T(1));

    long steps() const { return t_; }
    void set_steps(long t) { t_ = t; }
    std::map<std::string, Moments>& moments() { return moments_; }
    const std::map<std::string, Moments>& moments() const { return moments_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    long t_ = 0;
    std::map<std::string, Moments> moments_;
};

}  // namespace i2v::optim
