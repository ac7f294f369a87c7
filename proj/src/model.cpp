#include "i2v/model.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "i2v/error.hpp"

namespace i2v::model {

using ag::Tape;
using ag::Var;

// --- ArchConfig -------------------------------------------------------------------

void ArchConfig::validate() const {
    if (levels < 2) throw Error("architecture needs at least two levels");
    if (static_cast<int>(widths.size()) != levels) throw Error("one channel width per level required");
    if (disc_widths.size() != 3) throw Error("discriminator takes exactly three widths");
    if (input_size < 8 || input_size % (1 << levels) != 0)
        throw Error("input size must be a multiple of 2^levels (and >= 8)");
    for (int w : widths)
        if (w <= 0) throw Error("channel widths must be positive");
    for (int w : disc_widths)
        if (w <= 0) throw Error("channel widths must be positive");
    if (emotions.empty()) throw Error("at least one emotion required");
    if (std::set<std::string>(emotions.begin(), emotions.end()).size() != emotions.size())
        throw Error("emotion names must be unique");
}

ArchConfig ArchConfig::desk(std::vector<std::string> emotions) {
    ArchConfig a;
    a.input_size = 64;
    a.levels = 6;
    a.widths = {32, 64, 128, 128, 128, 128};
    a.disc_widths = {32, 64, 128};
    a.emotions = std::move(emotions);
    return a;
}

ArchConfig ArchConfig::toy(std::vector<std::string> emotions) {
    ArchConfig a;
    a.input_size = 16;
    a.levels = 3;
    a.widths = {4, 6, 8};
    a.disc_widths = {4, 6, 8};
    a.emotions = std::move(emotions);
    return a;
}

std::string ArchConfig::to_json() const {
    nlohmann::json j;
    j["input_size"] = input_size;
    j["levels"] = levels;
    j["widths"] = widths;
    j["disc_widths"] = disc_widths;
    j["emotions"] = emotions;
    j["leaky_slope"] = leaky_slope;
    j["init_std"] = init_std;
    return j.dump();
}

ArchConfig ArchConfig::from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        ArchConfig a;
        a.input_size = j.at("input_size").get<int>();
        a.levels = j.at("levels").get<int>();
        a.widths = j.at("widths").get<std::vector<int>>();
        a.disc_widths = j.at("disc_widths").get<std::vector<int>>();
        a.emotions = j.at("emotions").get<std::vector<std::string>>();
        a.leaky_slope = j.value("leaky_slope", 0.2);
        a.init_std = j.value("init_std", 0.02);
        a.validate();
        return a;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed architecture block: ") + e.what());
    }
}

// --- ParamSet -----------------------------------------------------------------------

template <typename T>
ag::Parameter<T>& ParamSet<T>::add(std::string name, Tensor<T> value) {
    if (contains(name)) throw Error("duplicate parameter " + name);
    return params_.emplace_back(std::move(name), std::move(value));
}

template <typename T>
const ag::Parameter<T>& ParamSet<T>::get(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return p;
    throw Error("no parameter named " + name);
}

template <typename T>
ag::Parameter<T>& ParamSet<T>::get(const std::string& name) {
    return const_cast<ag::Parameter<T>&>(std::as_const(*this).get(name));
}

template <typename T>
bool ParamSet<T>::contains(const std::string& name) const {
    return std::any_of(params_.begin(), params_.end(), [&](const auto& p) { return p.name == name; });
}

template <typename T>
void ParamSet<T>::set_trainable(bool on) {
    for (auto& p : params_) p.trainable = on;
}

template <typename T>
void ParamSet<T>::zero_grad() const {
    for (const auto& p : params_) p.zero_grad();
}

template <typename T>
std::size_t ParamSet<T>::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

template <typename T>
std::uint32_t ParamSet<T>::crc() const {
    uLong c = crc32(0L, Z_NULL, 0);
    for (const auto& p : params_) {
        c = crc32(c, reinterpret_cast<const Bytef*>(p.name.data()), static_cast<uInt>(p.name.size()));
        c = crc32(c, reinterpret_cast<const Bytef*>(p.value.data()), static_cast<uInt>(p.value.size() * sizeof(T)));
    }
    return static_cast<std::uint32_t>(c);
}

template <typename T>
std::vector<std::vector<int>> FeatureHierarchy<T>::shapes() const {
    std::vector<std::vector<int>> out;
    for (const auto& l : levels) out.push_back(l.shape());
    return out;
}

// --- ActionVector -----------------------------------------------------------------------

ActionVector::ActionVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw Error("empty action vector");
    for (double v : values_)
        if (!(v >= 0.0 && v <= 1.0)) throw Error("degree out of range");
}

ActionVector ActionVector::zeros(int n) { return ActionVector(std::vector<double>(n, 0.0)); }

ActionVector ActionVector::one_hot(int n, int emotion, double degree) {
    if (emotion < 1 || emotion > n) throw Error("emotion index out of range");
    std::vector<double> v(n, 0.0);
    v[emotion - 1] = degree;
    return ActionVector(std::move(v));
}

// --- layers ------------------------------------------------------------------------------

namespace {

std::string pname(const std::string& prefix, const std::string& layer, const std::string& what) {
    return prefix + "." + layer + "." + what;
}

bool encoder_level_normalized(int level, int levels) { return level != 1 && level != levels; }

template <typename T>
void init_params(ParamSet<T>& ps, std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> normal(0.0, stddev);
    for (auto& p : ps.all()) {
        const bool is_gamma = p.name.ends_with(".gamma");
        const bool is_bias = p.name.ends_with(".b") || p.name.ends_with(".beta");
        for (auto& v : p.value.storage()) v = is_bias ? T(0) : static_cast<T>((is_gamma ? 1.0 : 0.0) + normal(rng));
    }
}

template <typename T>
Var<T> conv_block(Tape<T>& tape, const ParamSet<T>& ps, const std::string& prefix, const std::string& layer,
                  const Var<T>& x, bool transpose, bool normalize) {
    const Var<T> w = tape.param(ps.get(pname(prefix, layer, "w")));
    const Var<T> b = tape.param(ps.get(pname(prefix, layer, "b")));
    Var<T> y = transpose ? ag::conv_transpose2d(x, w, b, 2, 1) : ag::conv2d(x, w, b, 2, 1);
    if (normalize)
        y = ag::batch_norm(y, tape.param(ps.get(pname(prefix, layer, "gamma"))),
                           tape.param(ps.get(pname(prefix, layer, "beta"))));
    return y;
}

int decoder_out_channels(const ArchConfig& a, int stage) { return stage < a.levels ? a.widths[a.levels - stage - 1] : 3; }

int decoder_in_channels(const ArchConfig& a, int stage) {
    if (stage == 1) return a.widths[a.levels - 1];
    return decoder_out_channels(a, stage - 1) + a.widths[a.levels - stage];
}

template <typename T>
void check_image(const ArchConfig& a, const Tensor<T>& x) {
    if (x.rank() != 3 || x.dim(0) != 3 || x.dim(1) != a.input_size || x.dim(2) != a.input_size)
        throw Error("input must be " + std::to_string(a.input_size) + "x" + std::to_string(a.input_size) +
                    "x3, got " + shape_string(x.shape()));
}

}  // namespace

// --- Generator --------------------------------------------------------------------------------

template <typename T>
Generator<T>::Generator(const ArchConfig& arch) : arch_(arch) {
    arch_.validate();
    const int L = arch_.levels;
    for (int e = 0; e <= arch_.emotion_count(); ++e) {
        ParamSet<T> ps;
        const std::string prefix = "e" + std::to_string(e);
        for (int l = 1; l <= L; ++l) {
            const int cin = l == 1 ? 3 : arch_.widths[l - 2], cout = arch_.widths[l - 1];
            const std::string layer = "l" + std::to_string(l);
            ps.add(pname(prefix, layer, "w"), Tensor<T>({cout, cin, 4, 4}));
            ps.add(pname(prefix, layer, "b"), Tensor<T>({cout}));
            if (encoder_level_normalized(l, L)) {
                ps.add(pname(prefix, layer, "gamma"), Tensor<T>({cout}, T(1)));
                ps.add(pname(prefix, layer, "beta"), Tensor<T>({cout}));
            }
        }
        encoders_.push_back(std::move(ps));
    }
    for (int s = 1; s <= L; ++s) {
        const std::string layer = "s" + std::to_string(s);
        const int cin = decoder_in_channels(arch_, s), cout = decoder_out_channels(arch_, s);
        decoder_.add(pname("d", layer, "w"), Tensor<T>({cin, cout, 4, 4}));
        decoder_.add(pname("d", layer, "b"), Tensor<T>({cout}));
        if (s < L) {
            decoder_.add(pname("d", layer, "gamma"), Tensor<T>({cout}, T(1)));
            decoder_.add(pname("d", layer, "beta"), Tensor<T>({cout}));
        }
    }
    decoder_.add("d.head.w", Tensor<T>({kLandmarkCount, arch_.widths[0], 1, 1}));
    decoder_.add("d.head.b", Tensor<T>({kLandmarkCount}));
}

template <typename T>
std::vector<Var<T>> Generator<T>::encode(Tape<T>& tape, const Var<T>& image, int encoder) const {
    if (encoder < 0 || encoder > arch_.emotion_count()) throw Error("emotion index out of range");
    check_image(arch_, image.value());
    const ParamSet<T>& ps = encoders_[encoder];
    const std::string prefix = "e" + std::to_string(encoder);
    std::vector<Var<T>> levels;
    Var<T> x = image;
    for (int l = 1; l <= arch_.levels; ++l) {
        x = conv_block(tape, ps, prefix, "l" + std::to_string(l), x, false, encoder_level_normalized(l, arch_.levels));
        x = ag::leaky_relu(x, T(arch_.leaky_slope));
        levels.push_back(x);
    }
    return levels;
}

template <typename T>
DecodedVars<T> Generator<T>::decode(Tape<T>& tape, const std::vector<Var<T>>& levels) const {
    const int L = arch_.levels;
    if (static_cast<int>(levels.size()) != L) throw Error("feature hierarchy has the wrong number of levels");
    for (int l = 1; l <= L; ++l) {
        const auto& s = levels[l - 1].shape();
        if (s != std::vector<int>{arch_.widths[l - 1], arch_.level_size(l), arch_.level_size(l)})
            throw Error("feature level " + std::to_string(l) + " has shape " + shape_string(s));
    }
    DecodedVars<T> out;
    Var<T> x = levels[L - 1];
    for (int s = 1; s <= L; ++s) {
        if (s > 1) x = ag::concat_channels(x, levels[L - s]);
        x = conv_block(tape, decoder_, "d", "s" + std::to_string(s), x, true, s < L);
        if (s < L) x = ag::relu(x);
        if (s == L - 1) {
            const Var<T> logits =
                ag::conv2d(x, tape.param(decoder_.get("d.head.w")), tape.param(decoder_.get("d.head.b")), 1, 0);
            out.heatmaps = ag::spatial_softmax(logits);
            out.coords = ag::expected_coordinates(out.heatmaps, arch_.input_size, arch_.input_size);
        }
    }
    out.frame = ag::sigmoid(x);
    return out;
}

template <typename T>
void Generator<T>::init(std::mt19937_64& rng) {
    for (auto* ps : param_sets()) init_params(*ps, rng, arch_.init_std);
}

template <typename T>
std::vector<ParamSet<T>*> Generator<T>::param_sets() {
    std::vector<ParamSet<T>*> out;
    for (auto& e : encoders_) out.push_back(&e);
    out.push_back(&decoder_);
    return out;
}

template <typename T>
std::vector<const ParamSet<T>*> Generator<T>::param_sets() const {
    std::vector<const ParamSet<T>*> out;
    for (const auto& e : encoders_) out.push_back(&e);
    out.push_back(&decoder_);
    return out;
}

template <typename T>
void Generator<T>::set_trainable(bool on) {
    for (auto* ps : param_sets()) ps->set_trainable(on);
}

template <typename T>
void Generator<T>::zero_grad() const {
    for (const auto* ps : param_sets()) ps->zero_grad();
}

template <typename T>
std::size_t Generator<T>::scalar_count() const {
    std::size_t n = 0;
    for (const auto* ps : param_sets()) n += ps->scalar_count();
    return n;
}

template <typename T>
std::uint32_t Generator<T>::crc() const {
    uLong c = crc32(0L, Z_NULL, 0);
    for (const auto* ps : param_sets()) {
        const std::uint32_t part = ps->crc();
        c = crc32(c, reinterpret_cast<const Bytef*>(&part), sizeof part);
    }
    return static_cast<std::uint32_t>(c);
}

template <typename T>
Generator<T> Generator<T>::single_emotion(int emotion) const {
    if (emotion < 1 || emotion > arch_.emotion_count()) throw Error("emotion index out of range");
    ArchConfig a = arch_;
    a.emotions = {arch_.emotions[emotion - 1]};
    Generator<T> g(a);
    g.encoders_[0] = encoders_[0];
    // Residual parameters keep their values but take the e1 names.
    auto& dst = g.encoders_[1].all();
    const auto& src = encoders_[emotion].all();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i].value = src[i].value;
    g.decoder_ = decoder_;
    return g;
}

// --- Discriminator -------------------------------------------------------------------------------

template <typename T>
Discriminator<T>::Discriminator(const ArchConfig& arch, std::string prefix) : arch_(arch), prefix_(std::move(prefix)) {
    int cin = 3;
    for (int i = 0; i < 3; ++i) {
        const int cout = arch_.disc_widths[i];
        const std::string layer = "c" + std::to_string(i + 1);
        params_.add(pname(prefix_, layer, "w"), Tensor<T>({cout, cin, 4, 4}));
        params_.add(pname(prefix_, layer, "b"), Tensor<T>({cout}));
        if (i > 0) {
            params_.add(pname(prefix_, layer, "gamma"), Tensor<T>({cout}, T(1)));
            params_.add(pname(prefix_, layer, "beta"), Tensor<T>({cout}));
        }
        cin = cout;
    }
    params_.add(pname(prefix_, "fc", "w"), Tensor<T>({cin}));
    params_.add(pname(prefix_, "fc", "b"), Tensor<T>({1}));
}

template <typename T>
Var<T> Discriminator<T>::score(Tape<T>& tape, const Var<T>& image) const {
    check_image(arch_, image.value());
    Var<T> x = image;
    for (int i = 1; i <= 3; ++i)
        x = ag::leaky_relu(conv_block(tape, params_, prefix_, "c" + std::to_string(i), x, false, i > 1),
                           T(arch_.leaky_slope));
    const Var<T> pooled = ag::global_avg_pool(x);
    return ag::sigmoid(ag::dense_scalar(pooled, tape.param(params_.get(prefix_ + ".fc.w")),
                                        tape.param(params_.get(prefix_ + ".fc.b"))));
}

template <typename T>
void Discriminator<T>::init(std::mt19937_64& rng) {
    init_params(params_, rng, arch_.init_std);
}

template <typename T>
Model<T>::Model(const ArchConfig& a, std::uint64_t seed) : Model(a) {
    std::mt19937_64 rng(seed);
    generator.init(rng);
    discriminators.global.init(rng);
    discriminators.local.init(rng);
}

// --- inference API ----------------------------------------------------------------------------------

template <typename T>
FrameImage GeneratorOutput<T>::image() const {
    Tensor<float> px = frame.template cast<float>();
    for (auto& v : px.storage()) v = std::clamp(v, 0.0f, 1.0f);
    return FrameImage(std::move(px));
}

template <typename T>
Tensor<T> image_tensor(const FrameImage& image) {
    return image.tensor().cast<T>();
}

namespace {

template <typename T>
FeatureHierarchy<T> values_of(const std::vector<Var<T>>& vars) {
    FeatureHierarchy<T> h;
    for (const auto& v : vars) h.levels.push_back(v.value());
    return h;
}

template <typename T>
GeneratorOutput<T> output_of(const DecodedVars<T>& d) {
    GeneratorOutput<T> out{d.frame.value(), d.heatmaps.value(), {}};
    const Tensor<T>& c = d.coords.value();
    for (int k = 0; k < kLandmarkCount; ++k) out.landmarks.points[k] = {double(c[2 * k]), double(c[2 * k + 1])};
    return out;
}

}  // namespace

template <typename T>
FeatureHierarchy<T> encode_base(const Generator<T>& gen, const FrameImage& image) {
    Tape<T> tape(false);
    return values_of(gen.encode(tape, tape.constant(image_tensor<T>(image)), 0));
}

template <typename T>
FeatureHierarchy<T> encode_residual(const Generator<T>& gen, int emotion, const FrameImage& image) {
    if (emotion < 1 || emotion > gen.arch().emotion_count()) throw Error("emotion index out of range");
    Tape<T> tape(false);
    return values_of(gen.encode(tape, tape.constant(image_tensor<T>(image)), emotion));
}

template <typename T>
FeatureHierarchy<T> aggregate_features(const FeatureHierarchy<T>& base,
                                       const std::vector<FeatureHierarchy<T>>& residuals, const ActionVector& a) {
    if (residuals.size() != a.size()) throw Error("one residual hierarchy per action entry required");
    for (const auto& r : residuals)
        if (r.shapes() != base.shapes()) throw Error("feature hierarchy shape mismatch");
    FeatureHierarchy<T> out = base;
    for (std::size_t i = 0; i < residuals.size(); ++i) {
        const T w = static_cast<T>(a[i]);
        for (std::size_t l = 0; l < out.levels.size(); ++l) {
            Tensor<T>& dst = out.levels[l];
            const Tensor<T>& src = residuals[i].levels[l];
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += w * src[k];
        }
    }
    return out;
}

template <typename T>
GeneratorOutput<T> decode(const Generator<T>& gen, const FeatureHierarchy<T>& features) {
    Tape<T> tape(false);
    std::vector<Var<T>> vars;
    for (const auto& l : features.levels) vars.push_back(tape.constant(l));
    return output_of(gen.decode(tape, vars));
}

template <typename T>
GeneratorOutput<T> generate_frame(const Generator<T>& gen, const FrameImage& image, const ActionVector& a) {
    if (static_cast<int>(a.size()) != gen.arch().emotion_count()) throw Error("action vector length != emotion count");
    Tape<T> tape(false);
    const Var<T> x = tape.constant(image_tensor<T>(image));
    std::vector<Var<T>> features = gen.encode(tape, x, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) continue;
        const auto residual = gen.encode(tape, x, static_cast<int>(i) + 1);
        for (std::size_t l = 0; l < features.size(); ++l)
            features[l] = ag::add_scaled(features[l], residual[l], static_cast<T>(a[i]));
    }
    return output_of(gen.decode(tape, features));
}

template <typename T>
double discriminate(const Discriminators<T>& disc, Which which, const FrameImage& image) {
    Tape<T> tape(false);
    return static_cast<double>(disc[which].score(tape, tape.constant(image_tensor<T>(image))).item());
}

#define I2V_INSTANTIATE(T)                                                                                        \
    template class ParamSet<T>;                                                                                   \
    template struct FeatureHierarchy<T>;                                                                          \
    template struct GeneratorOutput<T>;                                                                           \
    template class Generator<T>;                                                                                  \
    template class Discriminator<T>;                                                                              \
    template struct Model<T>;                                                                                     \
    template Tensor<T> image_tensor<T>(const FrameImage&);                                                        \
    template FeatureHierarchy<T> encode_base(const Generator<T>&, const FrameImage&);                             \
    template FeatureHierarchy<T> encode_residual(const Generator<T>&, int, const FrameImage&);                    \
    template FeatureHierarchy<T> aggregate_features(const FeatureHierarchy<T>&,                                   \
                                                    const std::vector<FeatureHierarchy<T>>&, const ActionVector&); \
    template GeneratorOutput<T> decode(const Generator<T>&, const FeatureHierarchy<T>&);                          \
    template GeneratorOutput<T> generate_frame(const Generator<T>&, const FrameImage&, const ActionVector&);       \
    template double discriminate(const Discriminators<T>&, Which, const FrameImage&);

I2V_INSTANTIATE(float)
I2V_INSTANTIATE(double)

#undef I2V_INSTANTIATE

}  // namespace i2v::model
