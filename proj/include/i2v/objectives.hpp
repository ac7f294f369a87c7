#pragma once

// Training losses. Scalar forms take plain values; graph forms build the
// same quantities on a tape for training and gradient checks.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "i2v/autograd.hpp"
#include "i2v/image.hpp"
#include "i2v/landmarks.hpp"
#include "i2v/model.hpp"

namespace i2v::objectives {

// Clamp applied inside every log so no loss becomes infinite.
inline constexpr double kLogEps = 1e-8;

/// Term weights. Defaults: adversarial 1 each, reconstruction 100,
/// landmark 1, temporal 10.
struct LossWeights {
    double w_global = 1;
    double w_local = 1;
    double w_recon = 100;
    double w_landmark = 1;
    double w_temporal = 10;

    void validate() const;
    bool operator==(const LossWeights&) const = default;
};

struct TemporalRegConfig {
    double delta_a = 0.1;
    void validate() const;
    bool operator==(const TemporalRegConfig&) const = default;
};

/// Per-step loss values. Generator-side adversarial terms are
/// -log D(fake); disc_* are the discriminator losses.
struct LossReport {
    double adv_global = 0;
    double adv_local = 0;
    double recon = 0;
    double landmark = 0;
    double temporal = 0;
    double disc_global = 0;
    double disc_local = 0;
    double generator_total = 0;
    double discriminator_total = 0;

    // Flat record with the keys above, in this order.
    std::vector<std::pair<std::string, double>> fields() const;
    std::string to_json() const;
};

// -log(score_real) - log(1 - score_fake). `which` only labels errors.
double adv_loss_discriminator(model::Which which, double score_fake, double score_real);
// -log(score_fake)
double adv_loss_generator(double score_fake);
// Mean absolute difference over all pixels and channels.
double recon_l1(const FrameImage& generated, const FrameImage& target);
// Euclidean norm of the flattened coordinate difference.
double landmark_l2(const LandmarkSet& predicted, const LandmarkSet& truth);
double landmark_l2(std::span<const Point> predicted, std::span<const Point> truth);

// Active entries of `a` moved by `delta` (negative to go down) and clamped to
// [0, 1]. Active means: the listed emotions (1-based) if given, else the
// non-zero entries, else every entry.
model::ActionVector perturb_action(const model::ActionVector& a, double delta,
                                   const std::vector<int>& active = {});

using FrameFn = std::function<FrameImage(const model::ActionVector&)>;
// |V(a) - V(a-)|_1 + |V(a) - V(a+)|_1 with mean reduction; the three frames
// come from three independent calls.
double temporal_reg(const FrameFn& gen, const model::ActionVector& a, const TemporalRegConfig& cfg,
                    const std::vector<int>& active = {});
template <typename T>
double temporal_reg(const model::Generator<T>& gen, const FrameImage& image, const model::ActionVector& a,
                    const TemporalRegConfig& cfg, const std::vector<int>& active = {});

// Weighted totals; every term must be finite.
double generator_objective(const LossReport& terms, const LossWeights& w);
double discriminator_objective(const LossReport& terms, const LossWeights& w);

// Throws naming the first non-finite term.
void check_finite(const LossReport& r);

// --- graph forms --------------------------------------------------------------

template <typename T>
ag::Var<T> adv_discriminator(const ag::Var<T>& score_fake, const ag::Var<T>& score_real) {
    return ag::weighted_sum<T>({{ag::neg_log(score_real, T(kLogEps)), T(1)},
                                {ag::neg_log1m(score_fake, T(kLogEps)), T(1)}});
}
template <typename T>
ag::Var<T> adv_generator(const ag::Var<T>& score_fake) {
    return ag::neg_log(score_fake, T(kLogEps));
}
template <typename T>
ag::Var<T> recon(const ag::Var<T>& frame, const ag::Var<T>& target) {
    return ag::mean_abs_diff(frame, target);
}
template <typename T>
ag::Var<T> landmark(const ag::Var<T>& coords, const ag::Var<T>& truth) {
    return ag::l2_distance(coords, truth);
}
template <typename T>
ag::Var<T> temporal(const ag::Var<T>& v, const ag::Var<T>& v_minus, const ag::Var<T>& v_plus) {
    return ag::weighted_sum<T>({{ag::mean_abs_diff(v, v_minus), T(1)}, {ag::mean_abs_diff(v, v_plus), T(1)}});
}

}  // namespace i2v::objectives
