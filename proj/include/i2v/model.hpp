#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "i2v/autograd.hpp"
#include "i2v/image.hpp"
#include "i2v/landmarks.hpp"

namespace i2v::model {

/// Network shape. The default is the full-size configuration (256x256 input,
/// eight stride-2 levels); `desk()` is the scaled-down variant used for CPU
/// experiments.
struct ArchConfig {
    int input_size = 256;
    int levels = 8;
    std::vector<int> widths{64, 128, 256, 512, 512, 512, 512, 512};
    std::vector<int> disc_widths{64, 128, 256};
    std::vector<std::string> emotions{"happy"};
    double leaky_slope = 0.2;
    double init_std = 0.02;

    int emotion_count() const { return static_cast<int>(emotions.size()); }
    int heatmap_size() const { return input_size / 2; }
    // Spatial size of encoder level l (1-based).
    int level_size(int l) const { return input_size >> l; }
    void validate() const;

    static ArchConfig desk(std::vector<std::string> emotions);
    static ArchConfig toy(std::vector<std::string> emotions);

    std::string to_json() const;
    static ArchConfig from_json(const std::string& text);
    bool operator==(const ArchConfig&) const = default;
};

/// Named parameters with stable addresses.
template <typename T>
class ParamSet {
public:
    ag::Parameter<T>& add(std::string name, Tensor<T> value);
    const ag::Parameter<T>& get(const std::string& name) const;
    ag::Parameter<T>& get(const std::string& name);
    bool contains(const std::string& name) const;

    std::deque<ag::Parameter<T>>& all() { return params_; }
    const std::deque<ag::Parameter<T>>& all() const { return params_; }

    void set_trainable(bool on);
    void zero_grad() const;
    std::size_t scalar_count() const;
    std::uint32_t crc() const;

private:
    std::deque<ag::Parameter<T>> params_;
};

/// Per-level feature maps, level 1 (finest) first.
template <typename T>
struct FeatureHierarchy {
    std::vector<Tensor<T>> levels;
    std::vector<std::vector<int>> shapes() const;
    bool operator==(const FeatureHierarchy&) const = default;
};

/// Expression-degree vector, one entry per emotion, each in [0, 1].
class ActionVector {
public:
    ActionVector() = default;
    explicit ActionVector(std::vector<double> values);
    static ActionVector zeros(int n);
    // emotion is 1-based
    static ActionVector one_hot(int n, int emotion, double degree);

    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    const std::vector<double>& values() const { return values_; }
    bool operator==(const ActionVector&) const = default;

private:
    std::vector<double> values_;
};

template <typename T>
struct GeneratorOutput {
    Tensor<T> frame;     // (3, H, W) in [0, 1]
    Tensor<T> heatmaps;  // (68, H/2, W/2), each map sums to 1
    LandmarkSet landmarks;

    FrameImage image() const;
};

// Graph-level results of one decoder pass.
template <typename T>
struct DecodedVars {
    ag::Var<T> frame;
    ag::Var<T> heatmaps;
    ag::Var<T> coords;  // (68, 2)
};

/// Base encoder e0, residual encoders e1..en, decoder with landmark head.
template <typename T>
class Generator {
public:
    explicit Generator(const ArchConfig& arch);

    const ArchConfig& arch() const { return arch_; }
    // encoder 0 is the base encoder, 1..n the residual encoders
    ParamSet<T>& encoder(int i) { return encoders_.at(i); }
    const ParamSet<T>& encoder(int i) const { return encoders_.at(i); }
    ParamSet<T>& decoder() { return decoder_; }
    const ParamSet<T>& decoder() const { return decoder_; }

    std::vector<ag::Var<T>> encode(ag::Tape<T>& tape, const ag::Var<T>& image, int encoder) const;
    DecodedVars<T> decode(ag::Tape<T>& tape, const std::vector<ag::Var<T>>& levels) const;

    void init(std::mt19937_64& rng);
    std::vector<ParamSet<T>*> param_sets();
    std::vector<const ParamSet<T>*> param_sets() const;
    void set_trainable(bool on);
    void zero_grad() const;
    std::size_t scalar_count() const;
    std::uint32_t crc() const;

    // Single-emotion generator (e0, e_i, d) sharing copied parameter values.
    Generator<T> single_emotion(int emotion) const;

private:
    ArchConfig arch_;
    std::vector<ParamSet<T>> encoders_;
    ParamSet<T> decoder_;
};

enum class Which { global, local };

/// Three stride-2 convolutions, global average, affine, sigmoid.
template <typename T>
class Discriminator {
public:
    Discriminator(const ArchConfig& arch, std::string prefix);

    ag::Var<T> score(ag::Tape<T>& tape, const ag::Var<T>& image) const;
    ParamSet<T>& params() { return params_; }
    const ParamSet<T>& params() const { return params_; }
    void init(std::mt19937_64& rng);

private:
    ArchConfig arch_;
    std::string prefix_;
    ParamSet<T> params_;
};

template <typename T>
struct Discriminators {
    Discriminator<T> global;
    Discriminator<T> local;

    explicit Discriminators(const ArchConfig& arch) : global(arch, "dg"), local(arch, "dl") {}
    Discriminator<T>& operator[](Which w) { return w == Which::global ? global : local; }
    const Discriminator<T>& operator[](Which w) const { return w == Which::global ? global : local; }
};

/// Generator plus both discriminators, initialised from one seed.
template <typename T>
struct Model {
    ArchConfig arch;
    Generator<T> generator;
    Discriminators<T> discriminators;

    explicit Model(const ArchConfig& a) : arch(a), generator(a), discriminators(a) {}
    Model(const ArchConfig& a, std::uint64_t seed);
};

// --- inference API ---------------------------------------------------------------

template <typename T>
Tensor<T> image_tensor(const FrameImage& image);

template <typename T>
FeatureHierarchy<T> encode_base(const Generator<T>& gen, const FrameImage& image);
template <typename T>
FeatureHierarchy<T> encode_residual(const Generator<T>& gen, int emotion, const FrameImage& image);
// F = base + sum_i a_i * residual_i, level by level, every term evaluated.
template <typename T>
FeatureHierarchy<T> aggregate_features(const FeatureHierarchy<T>& base,
                                       const std::vector<FeatureHierarchy<T>>& residuals, const ActionVector& a);
template <typename T>
GeneratorOutput<T> decode(const Generator<T>& gen, const FeatureHierarchy<T>& features);
// Residual encoders with a_i = 0 are not evaluated.
template <typename T>
GeneratorOutput<T> generate_frame(const Generator<T>& gen, const FrameImage& image, const ActionVector& a);
template <typename T>
double discriminate(const Discriminators<T>& disc, Which which, const FrameImage& image);

}  // namespace i2v::model
