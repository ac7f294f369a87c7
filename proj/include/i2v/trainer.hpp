#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "i2v/data.hpp"
#include "i2v/model.hpp"
#include "i2v/objectives.hpp"
#include "i2v/optim.hpp"

namespace i2v::trainer {

struct Ablations {
    bool use_local_disc = true;
    bool use_landmark_loss = true;
    bool use_temporal_reg = true;
    bool operator==(const Ablations&) const = default;
};

/// Every training knob. Serialized as a JSON object with the field names
/// below; unknown keys are rejected.
struct TrainConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int epochs = 2100;
    int batch_size = 1;
    long max_steps = 0;  // 0 = run all epochs
    objectives::LossWeights weights;
    objectives::TemporalRegConfig temporal;
    Ablations ablations;
    std::uint64_t seed = 0;

    // architecture scale
    int input_size = 256;
    int levels = 8;
    std::vector<int> widths{64, 128, 256, 512, 512, 512, 512, 512};
    std::vector<int> disc_widths{64, 128, 256};

    int checkpoint_every = 500;
    int keep_last = 3;
    // Landmark detector command for frames without sidecar files; empty
    // means sidecar CSVs are required.
    std::string landmark_command;

    void validate() const;
    model::ArchConfig arch(const std::vector<std::string>& emotions) const;
    // Weights with ablated terms set to zero.
    objectives::LossWeights effective_weights() const;
    optim::AdamConfig adam() const { return {learning_rate, beta1, beta2, 1e-8}; }

    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
    static TrainConfig load(const std::filesystem::path& path);
    // 64x64, six levels: the CPU-scale configuration.
    static TrainConfig desk();
    bool operator==(const TrainConfig&) const = default;
};

/// The tape for one generator evaluation on one sample: the frame at a, the
/// frames at the perturbed degrees when the temporal term is on, landmark
/// coordinates, and the loss terms that need no discriminator.
template <typename T>
struct GeneratorPass {
    std::unique_ptr<ag::Tape<T>> tape;
    ag::Var<T> frame;
    ag::Var<T> coords;
    ag::Var<T> target;
    Tensor<T> mask;  // (3, H, W) mouth mask of the target
    ag::Var<T> recon;
    ag::Var<T> landmark;  // invalid when the landmark loss is off
    ag::Var<T> temporal;  // invalid when the temporal term is off
};

template <typename T>
GeneratorPass<T> generator_pass(const model::Generator<T>& gen, const TrainingSample& sample, const TrainConfig& cfg,
                                bool record = true);

// Discriminator losses on real vs. (detached) fake for one sample; built on
// `tape`, with gradients flowing to whichever discriminator parameters are
// trainable.
template <typename T>
ag::Var<T> discriminator_loss(ag::Tape<T>& tape, const model::Discriminator<T>& disc, const Tensor<T>& real,
                              const Tensor<T>& fake);

template <typename T>
struct TrainState {
    model::Model<T> model;
    optim::Adam<T> g_opt;
    optim::Adam<T> dg_opt;
    optim::Adam<T> dl_opt;
    long step = 0;
    std::mt19937_64 rng;
    double best_recon = 1e300;

    TrainState(const model::ArchConfig& arch, const TrainConfig& cfg);
};

// One discriminator update (global, plus local if enabled) on the detached
// fakes, then one generator update through the updated, frozen
// discriminators. Gradients are averaged over the batch.
template <typename T>
objectives::LossReport train_step(TrainState<T>& state, const std::vector<TrainingSample>& batch,
                                  const TrainConfig& cfg);

// Draws batch_size samples from state.rng.
template <typename T>
std::vector<TrainingSample> sample_batch(TrainState<T>& state, const ClipDataset& data, const TrainConfig& cfg);

long steps_per_epoch(std::size_t train_clips, int batch_size);
long total_steps(std::size_t train_clips, const TrainConfig& cfg);

// --- checkpoints ------------------------------------------------------------------

void save_train_state(const TrainState<float>& state, const TrainConfig& cfg, const std::filesystem::path& path);
TrainState<float> load_train_state(const std::filesystem::path& path, const TrainConfig& cfg);
// Latest step_*.ckpt in `dir`; errors if the directory or checkpoint is missing.
std::filesystem::path latest_checkpoint(const std::filesystem::path& dir);
TrainState<float> resume(const std::filesystem::path& checkpoint_dir, const TrainConfig& cfg);

struct StepRecord {
    long step = 0;
    long epoch = 0;
    objectives::LossReport losses;
    double wall_time = 0;
    std::string to_json() const;
};

struct TrainOptions {
    bool resume = false;
    // Called after every step; return false to stop early.
    std::function<bool(const StepRecord&)> on_step;
};

// Runs the schedule into `checkpoint_dir`: step_<n>.ckpt every
// checkpoint_every steps and at the end (last keep_last kept), best.ckpt by
// mean reconstruction over the interval, and train_log.jsonl with one
// StepRecord per line.
TrainState<float> train(const ClipDataset& data, const TrainConfig& cfg, const std::filesystem::path& checkpoint_dir,
                        const TrainOptions& options = {});
TrainState<float> train(const DatasetManifest& manifest, const TrainConfig& cfg,
                        const std::filesystem::path& checkpoint_dir, const TrainOptions& options = {});

}  // namespace i2v::trainer
