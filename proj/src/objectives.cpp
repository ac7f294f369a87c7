#include "i2v/objectives.hpp"

#include <cmath>

#include <json.hpp>

#include "i2v/error.hpp"

namespace i2v::objectives {

namespace {

void check_score(double s, const char* what) {
    // Scores come out of a sigmoid; anything outside [0, 1] is a caller bug.
    if (!(s >= 0.0 && s <= 1.0)) throw Error(std::string(what) + " score outside (0,1)");
}

double clamped_neg_log(double x) { return -std::log(std::max(x, kLogEps)); }

}  // namespace

void LossWeights::validate() const {
    for (double w : {w_global, w_local, w_recon, w_landmark, w_temporal})
        if (!(w >= 0.0) || !std::isfinite(w)) throw Error("loss weights must be finite and nonnegative");
}

void TemporalRegConfig::validate() const {
    if (!(delta_a > 0.0 && delta_a <= 1.0)) throw Error("delta_a must be in (0, 1]");
}

std::vector<std::pair<std::string, double>> LossReport::fields() const {
    return {{"adv_global", adv_global},       {"adv_local", adv_local},
            {"recon", recon},                 {"landmark", landmark},
            {"temporal", temporal},           {"disc_global", disc_global},
            {"disc_local", disc_local},       {"generator_total", generator_total},
            {"discriminator_total", discriminator_total}};
}

std::string LossReport::to_json() const {
    nlohmann::ordered_json j;
    for (const auto& [k, v] : fields()) j[k] = v;
    return j.dump();
}

double adv_loss_discriminator(model::Which which, double score_fake, double score_real) {
    const char* name = which == model::Which::global ? "global discriminator" : "local discriminator";
    check_score(score_fake, name);
    check_score(score_real, name);
    return clamped_neg_log(score_real) + clamped_neg_log(1.0 - score_fake);
}

double adv_loss_generator(double score_fake) {
    check_score(score_fake, "generator adversarial");
    return clamped_neg_log(score_fake);
}

double recon_l1(const FrameImage& generated, const FrameImage& target) {
    if (!generated.tensor().same_shape(target.tensor())) throw Error("recon_l1: image shape mismatch");
    const auto& a = generated.tensor();
    const auto& b = target.tensor();
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(double(a[i]) - double(b[i]));
    return a.size() ? s / double(a.size()) : 0.0;
}

double landmark_l2(std::span<const Point> predicted, std::span<const Point> truth) {
    if (predicted.size() != truth.size()) throw Error("landmark_l2: landmark count mismatch");
    double s = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double dx = predicted[i].x - truth[i].x, dy = predicted[i].y - truth[i].y;
        s += dx * dx + dy * dy;
    }
    return std::sqrt(s);
}

double landmark_l2(const LandmarkSet& predicted, const LandmarkSet& truth) {
    return landmark_l2(std::span<const Point>(predicted.points), std::span<const Point>(truth.points));
}

model::ActionVector perturb_action(const model::ActionVector& a, double delta, const std::vector<int>& active) {
    std::vector<double> v = a.values();
    std::vector<bool> on(v.size(), false);
    if (!active.empty()) {
        for (int e : active) {
            if (e < 1 || e > static_cast<int>(v.size())) throw Error("emotion index out of range");
            on[e - 1] = true;
        }
    } else {
        bool any = false;
        for (std::size_t i = 0; i < v.size(); ++i) any = any || (on[i] = v[i] != 0.0);
        if (!any) on.assign(v.size(), true);
    }
    for (std::size_t i = 0; i < v.size(); ++i)
        if (on[i]) v[i] = std::clamp(v[i] + delta, 0.0, 1.0);
    return model::ActionVector(std::move(v));
}

double temporal_reg(const FrameFn& gen, const model::ActionVector& a, const TemporalRegConfig& cfg,
                    const std::vector<int>& active) {
    cfg.validate();
    const FrameImage v = gen(a);
    const FrameImage minus = gen(perturb_action(a, -cfg.delta_a, active));
    const FrameImage plus = gen(perturb_action(a, cfg.delta_a, active));
    return recon_l1(v, minus) + recon_l1(v, plus);
}

template <typename T>
double temporal_reg(const model::Generator<T>& gen, const FrameImage& image, const model::ActionVector& a,
                    const TemporalRegConfig& cfg, const std::vector<int>& active) {
    return temporal_reg([&](const model::ActionVector& x) { return model::generate_frame(gen, image, x).image(); }, a,
                        cfg, active);
}

template double temporal_reg(const model::Generator<float>&, const FrameImage&, const model::ActionVector&,
                             const TemporalRegConfig&, const std::vector<int>&);
template double temporal_reg(const model::Generator<double>&, const FrameImage&, const model::ActionVector&,
                             const TemporalRegConfig&, const std::vector<int>&);

void check_finite(const LossReport& r) {
    for (const auto& [k, v] : r.fields())
        if (!std::isfinite(v)) throw Error("non-finite loss term: " + k);
}

double generator_objective(const LossReport& t, const LossWeights& w) {
    check_finite(t);
    return w.w_global * t.adv_global + w.w_local * t.adv_local + w.w_recon * t.recon + w.w_landmark * t.landmark +
           w.w_temporal * t.temporal;
}

double discriminator_objective(const LossReport& t, const LossWeights& w) {
    check_finite(t);
    return w.w_global * t.disc_global + w.w_local * t.disc_local;
}

}  // namespace i2v::objectives
