#include "i2v/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "i2v/checkpoint.hpp"
#include "i2v/error.hpp"

namespace i2v::trainer {

using ag::Tape;
using ag::Var;
using nlohmann::json;

// --- config ------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw Error("learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw Error("Adam betas must be in [0, 1)");
    if (epochs < 1) throw Error("epochs ≥ 1");
    if (batch_size < 1) throw Error("batch_size must be ≥ 1");
    if (max_steps < 0) throw Error("max_steps must be ≥ 0");
    if (checkpoint_every < 1) throw Error("checkpoint_every must be ≥ 1");
    if (keep_last < 1) throw Error("keep_last must be ≥ 1");
    weights.validate();
    temporal.validate();
    arch({"probe"}).validate();
}

model::ArchConfig TrainConfig::arch(const std::vector<std::string>& emotions) const {
    model::ArchConfig a;
    a.input_size = input_size;
    a.levels = levels;
    a.widths = widths;
    a.disc_widths = disc_widths;
    a.emotions = emotions;
    return a;
}

objectives::LossWeights TrainConfig::effective_weights() const {
    objectives::LossWeights w = weights;
    if (!ablations.use_local_disc) w.w_local = 0;
    if (!ablations.use_landmark_loss) w.w_landmark = 0;
    if (!ablations.use_temporal_reg) w.w_temporal = 0;
    return w;
}

std::string TrainConfig::to_json() const {
    nlohmann::ordered_json j;
    j["learning_rate"] = learning_rate;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["max_steps"] = max_steps;
    j["weights"] = {{"w_global", weights.w_global},
                    {"w_local", weights.w_local},
                    {"w_recon", weights.w_recon},
                    {"w_landmark", weights.w_landmark},
                    {"w_temporal", weights.w_temporal}};
    j["temporal"] = {{"delta_a", temporal.delta_a}};
    j["ablations"] = {{"use_local_disc", ablations.use_local_disc},
                      {"use_landmark_loss", ablations.use_landmark_loss},
                      {"use_temporal_reg", ablations.use_temporal_reg}};
    j["seed"] = seed;
    j["input_size"] = input_size;
    j["levels"] = levels;
    j["widths"] = widths;
    j["disc_widths"] = disc_widths;
    j["checkpoint_every"] = checkpoint_every;
    j["keep_last"] = keep_last;
    j["landmark_command"] = landmark_command;
    return j.dump(2);
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    const std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw Error("unknown config key " + where + k);
}

template <typename U>
void read(const json& j, const char* key, U& out) {
    if (j.contains(key)) out = j.at(key).get<U>();
}

}  // namespace

TrainConfig TrainConfig::from_json(const std::string& text) {
    TrainConfig c;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) throw Error("config must be a JSON object");
        reject_unknown(j,
                       {"learning_rate", "beta1", "beta2", "epochs", "batch_size", "max_steps", "weights", "temporal",
                        "ablations", "seed", "input_size", "levels", "widths", "disc_widths", "checkpoint_every",
                        "keep_last", "landmark_command"},
                       "");
        read(j, "learning_rate", c.learning_rate);
        read(j, "beta1", c.beta1);
        read(j, "beta2", c.beta2);
        read(j, "epochs", c.epochs);
        read(j, "batch_size", c.batch_size);
        read(j, "max_steps", c.max_steps);
        if (j.contains("weights")) {
            const json& w = j["weights"];
            reject_unknown(w, {"w_global", "w_local", "w_recon", "w_landmark", "w_temporal"}, "weights.");
            read(w, "w_global", c.weights.w_global);
            read(w, "w_local", c.weights.w_local);
            read(w, "w_recon", c.weights.w_recon);
            read(w, "w_landmark", c.weights.w_landmark);
            read(w, "w_temporal", c.weights.w_temporal);
        }
        if (j.contains("temporal")) {
            reject_unknown(j["temporal"], {"delta_a"}, "temporal.");
            read(j["temporal"], "delta_a", c.temporal.delta_a);
        }
        if (j.contains("ablations")) {
            const json& a = j["ablations"];
            reject_unknown(a, {"use_local_disc", "use_landmark_loss", "use_temporal_reg"}, "ablations.");
            read(a, "use_local_disc", c.ablations.use_local_disc);
            read(a, "use_landmark_loss", c.ablations.use_landmark_loss);
            read(a, "use_temporal_reg", c.ablations.use_temporal_reg);
        }
        read(j, "seed", c.seed);
        read(j, "input_size", c.input_size);
        read(j, "levels", c.levels);
        read(j, "widths", c.widths);
        read(j, "disc_widths", c.disc_widths);
        read(j, "checkpoint_every", c.checkpoint_every);
        read(j, "keep_last", c.keep_last);
        read(j, "landmark_command", c.landmark_command);
    } catch (const json::exception& e) {
        throw Error(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("config not found: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

TrainConfig TrainConfig::desk() {
    TrainConfig c;
    c.input_size = 64;
    c.levels = 6;
    const model::ArchConfig a = model::ArchConfig::desk({"x"});
    c.widths = a.widths;
    c.disc_widths = a.disc_widths;
    c.epochs = 500;
    return c;
}

// --- graph ----------------------------------------------------------------------------

namespace {

template <typename T>
std::vector<Var<T>> aggregate(const std::vector<Var<T>>& base, const std::vector<Var<T>>& residual, double degree) {
    if (degree == 0.0) return base;
    std::vector<Var<T>> out;
    for (std::size_t l = 0; l < base.size(); ++l) out.push_back(ag::add_scaled(base[l], residual[l], T(degree)));
    return out;
}

template <typename T>
Tensor<T> landmark_tensor(const LandmarkSet& lm) {
    Tensor<T> t({kLandmarkCount, 2});
    for (int k = 0; k < kLandmarkCount; ++k) {
        t[2 * k] = static_cast<T>(lm.points[k].x);
        t[2 * k + 1] = static_cast<T>(lm.points[k].y);
    }
    return t;
}

template <typename T>
Tensor<T> times(const Tensor<T>& a, const Tensor<T>& m) {
    Tensor<T> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= m[i];
    return out;
}

}  // namespace

template <typename T>
GeneratorPass<T> generator_pass(const model::Generator<T>& gen, const TrainingSample& sample, const TrainConfig& cfg,
                                bool record) {
    GeneratorPass<T> p;
    p.tape = std::make_unique<Tape<T>>(record);
    Tape<T>& tape = *p.tape;
    const int e = sample.emotion.index;
    if (e < 1 || e > gen.arch().emotion_count()) throw Error("sample emotion not known to the model");

    const Var<T> x = tape.constant(model::image_tensor<T>(sample.input));
    const auto base = gen.encode(tape, x, 0);
    const double a = sample.degree;
    const bool temporal = cfg.ablations.use_temporal_reg;
    std::vector<Var<T>> residual;
    if (a != 0.0 || temporal) residual = gen.encode(tape, x, e);

    const auto decoded = gen.decode(tape, aggregate(base, residual, a));
    p.frame = decoded.frame;
    p.coords = decoded.coords;
    p.target = tape.constant(model::image_tensor<T>(sample.target));
    p.mask = sample.mask.as_tensor().template cast<T>();
    p.recon = objectives::recon(p.frame, p.target);
    if (cfg.ablations.use_landmark_loss)
        p.landmark = objectives::landmark(p.coords, tape.constant(landmark_tensor<T>(sample.landmarks)));
    if (temporal) {
        const double d = cfg.temporal.delta_a;
        auto frame_at = [&](double degree) {
            return degree == a ? p.frame : gen.decode(tape, aggregate(base, residual, degree)).frame;
        };
        const Var<T> minus = frame_at(std::clamp(a - d, 0.0, 1.0));
        const Var<T> plus = frame_at(std::clamp(a + d, 0.0, 1.0));
        p.temporal = objectives::temporal(p.frame, minus, plus);
    }
    return p;
}

template <typename T>
Var<T> discriminator_loss(Tape<T>& tape, const model::Discriminator<T>& disc, const Tensor<T>& real,
                          const Tensor<T>& fake) {
    const Var<T> s_fake = disc.score(tape, tape.constant(fake));
    const Var<T> s_real = disc.score(tape, tape.constant(real));
    return objectives::adv_discriminator(s_fake, s_real);
}

// --- state & step -----------------------------------------------------------------------

namespace {

template <typename T>
std::vector<ag::Parameter<T>*> params_of(model::ParamSet<T>& ps) {
    std::vector<ag::Parameter<T>*> out;
    for (auto& p : ps.all()) out.push_back(&p);
    return out;
}

template <typename T>
std::vector<ag::Parameter<T>*> params_of(model::Generator<T>& g) {
    std::vector<ag::Parameter<T>*> out;
    for (auto* ps : g.param_sets())
        for (auto& p : ps->all()) out.push_back(&p);
    return out;
}

std::seed_seq sampling_seed(std::uint64_t seed) {
    return std::seed_seq{std::uint32_t(seed), std::uint32_t(seed >> 32), 0x5eedu};
}

}  // namespace

template <typename T>
TrainState<T>::TrainState(const model::ArchConfig& arch, const TrainConfig& cfg)
    : model(arch, cfg.seed), g_opt(cfg.adam()), dg_opt(cfg.adam()), dl_opt(cfg.adam()) {
    auto seq = sampling_seed(cfg.seed);
    rng.seed(seq);
}

template <typename T>
objectives::LossReport train_step(TrainState<T>& state, const std::vector<TrainingSample>& batch,
                                  const TrainConfig& cfg) {
    if (batch.empty()) throw Error("empty batch");
    auto& gen = state.model.generator;
    auto& dg = state.model.discriminators.global;
    auto& dl = state.model.discriminators.local;
    const bool local = cfg.ablations.use_local_disc;
    const objectives::LossWeights w = cfg.effective_weights();
    const T scale = T(1) / T(batch.size());
    const double inv = 1.0 / double(batch.size());
    objectives::LossReport r;

    gen.set_trainable(true);
    std::vector<GeneratorPass<T>> passes;
    for (const auto& s : batch) passes.push_back(generator_pass(gen, s, cfg, true));

    // Discriminator update on detached fakes.
    dg.params().set_trainable(true);
    dl.params().set_trainable(true);
    dg.params().zero_grad();
    dl.params().zero_grad();
    for (const auto& p : passes) {
        const Tensor<T>& fake = p.frame.value();
        const Tensor<T>& real = p.target.value();
        Tape<T> tape;
        const Var<T> lg = discriminator_loss(tape, dg, real, fake);
        r.disc_global += double(lg.item()) * inv;
        tape.backward(lg);
        if (local) {
            Tape<T> lt;
            const Var<T> ll = discriminator_loss(lt, dl, times(real, p.mask), times(fake, p.mask));
            r.disc_local += double(ll.item()) * inv;
            lt.backward(ll);
        }
    }
    for (const auto& [name, v] : {std::pair{"disc_global", r.disc_global}, std::pair{"disc_local", r.disc_local}})
        if (!std::isfinite(v)) throw Error(std::string("non-finite loss term: ") + name);
    state.dg_opt.step(params_of(dg.params()), scale);
    if (local) state.dl_opt.step(params_of(dl.params()), scale);

    // Generator update through the updated, frozen discriminators.
    dg.params().set_trainable(false);
    dl.params().set_trainable(false);
    gen.zero_grad();
    for (auto& p : passes) {
        Tape<T>& tape = *p.tape;
        std::vector<std::pair<Var<T>, T>> terms;
        const Var<T> adv_g = objectives::adv_generator(dg.score(tape, p.frame));
        r.adv_global += double(adv_g.item()) * inv;
        terms.emplace_back(adv_g, T(w.w_global));
        if (local) {
            const Var<T> adv_l = objectives::adv_generator(dl.score(tape, ag::mul_const(p.frame, p.mask)));
            r.adv_local += double(adv_l.item()) * inv;
            terms.emplace_back(adv_l, T(w.w_local));
        }
        r.recon += double(p.recon.item()) * inv;
        terms.emplace_back(p.recon, T(w.w_recon));
        if (p.landmark.valid()) {
            r.landmark += double(p.landmark.item()) * inv;
            terms.emplace_back(p.landmark, T(w.w_landmark));
        }
        if (p.temporal.valid()) {
            r.temporal += double(p.temporal.item()) * inv;
            terms.emplace_back(p.temporal, T(w.w_temporal));
        }
        objectives::check_finite(r);
        tape.backward(ag::weighted_sum(terms));
    }
    state.g_opt.step(params_of(gen), scale);
    dg.params().set_trainable(true);
    dl.params().set_trainable(true);

    r.generator_total = objectives::generator_objective(r, w);
    r.discriminator_total = objectives::discriminator_objective(r, w);
    ++state.step;
    return r;
}

template <typename T>
std::vector<TrainingSample> sample_batch(TrainState<T>& state, const ClipDataset& data, const TrainConfig& cfg) {
    const PreprocessConfig pre = PreprocessConfig::for_input_size(cfg.input_size);
    std::vector<TrainingSample> batch;
    for (int b = 0; b < cfg.batch_size; ++b) batch.push_back(sample_training_pair(data, state.rng, pre, true));
    return batch;
}

long steps_per_epoch(std::size_t train_clips, int batch_size) {
    if (train_clips == 0) throw Error("empty dataset");
    return static_cast<long>((train_clips + batch_size - 1) / batch_size);
}

long total_steps(std::size_t train_clips, const TrainConfig& cfg) {
    const long all = steps_per_epoch(train_clips, cfg.batch_size) * cfg.epochs;
    return cfg.max_steps > 0 ? std::min(all, cfg.max_steps) : all;
}

// --- checkpoints ------------------------------------------------------------------------

namespace {

const char* kLogName = "train_log.jsonl";

optim::Adam<float>& optimizer_for(TrainState<float>& s, const std::string& param) {
    if (param.starts_with("dg.")) return s.dg_opt;
    if (param.starts_with("dl.")) return s.dl_opt;
    return s.g_opt;
}

std::string step_name(long step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "step_%08ld.ckpt", step);
    return buf;
}

std::vector<std::pair<long, std::filesystem::path>> step_checkpoints(const std::filesystem::path& dir) {
    static const std::regex re(R"(step_(\d{8})\.ckpt)");
    std::vector<std::pair<long, std::filesystem::path>> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (std::regex_match(name, m, re)) out.emplace_back(std::stol(m[1]), entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

void save_train_state(const TrainState<float>& state, const TrainConfig& cfg, const std::filesystem::path& path) {
    model::CheckpointFile f = model::model_checkpoint(state.model);
    std::ostringstream rng;
    rng << state.rng;
    f.header["train_state"] = {{"step", state.step},
                               {"rng", rng.str()},
                               {"g_steps", state.g_opt.steps()},
                               {"dg_steps", state.dg_opt.steps()},
                               {"dl_steps", state.dl_opt.steps()},
                               {"best_recon", state.best_recon},
                               {"config", json::parse(cfg.to_json())}};
    for (const auto* opt : {&state.g_opt, &state.dg_opt, &state.dl_opt})
        for (const auto& [name, mo] : opt->moments()) {
            f.tensors.push_back(model::StoredTensor::from("adam.m." + name, mo.m));
            f.tensors.push_back(model::StoredTensor::from("adam.v." + name, mo.v));
        }
    model::write_checkpoint(f, path);
}

TrainState<float> load_train_state(const std::filesystem::path& path, const TrainConfig& cfg) {
    const model::CheckpointFile f = model::read_checkpoint(path);
    const model::ArchConfig arch = model::checkpoint_arch(f);
    if (!(arch == cfg.arch(arch.emotions))) throw Error("architecture mismatch");
    if (!f.header.contains("train_state")) throw Error("checkpoint has no training state: " + path.string());
    TrainState<float> s(arch, cfg);
    model::restore_model(s.model, f);
    const json& ts = f.header["train_state"];
    s.step = ts.at("step").get<long>();
    std::istringstream rng(ts.at("rng").get<std::string>());
    rng >> s.rng;
    if (!rng) throw Error("corrupt checkpoint");
    s.g_opt.set_steps(ts.at("g_steps").get<long>());
    s.dg_opt.set_steps(ts.at("dg_steps").get<long>());
    s.dl_opt.set_steps(ts.at("dl_steps").get<long>());
    s.best_recon = ts.at("best_recon").get<double>();
    for (const auto& t : f.tensors) {
        if (!t.name.starts_with("adam.m.")) continue;
        const std::string name = t.name.substr(7);
        const model::StoredTensor* v = f.find("adam.v." + name);
        if (!v) throw Error("corrupt checkpoint");
        optimizer_for(s, name).moments()[name] = {t.as<float>(), v->as<float>()};
    }
    return s;
}

std::filesystem::path latest_checkpoint(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error("checkpoint directory not found: " + dir.string());
    const auto all = step_checkpoints(dir);
    if (all.empty()) throw Error("no checkpoint in " + dir.string());
    return all.back().second;
}

TrainState<float> resume(const std::filesystem::path& checkpoint_dir, const TrainConfig& cfg) {
    cfg.validate();
    return load_train_state(latest_checkpoint(checkpoint_dir), cfg);
}

std::string StepRecord::to_json() const {
    nlohmann::ordered_json j;
    j["step"] = step;
    j["epoch"] = epoch;
    for (const auto& [k, v] : losses.fields()) j[k] = v;
    j["wall_time"] = wall_time;
    return j.dump();
}

// --- loop --------------------------------------------------------------------------------

namespace {

// Keeps log lines up to and including `step`.
void truncate_log(const std::filesystem::path& log, long step) {
    std::vector<std::string> keep;
    {
        std::ifstream in(log);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (json::parse(line).at("step").get<long>() <= step) keep.push_back(line);
        }
    }
    std::ofstream out(log, std::ios::trunc);
    for (const auto& l : keep) out << l << '\n';
}

}  // namespace

TrainState<float> train(const ClipDataset& data, const TrainConfig& cfg, const std::filesystem::path& dir,
                        const TrainOptions& options) {
    cfg.validate();
    if (data.empty()) throw Error("empty dataset");
    std::vector<std::string> names;
    for (const auto& e : data.emotions()) names.push_back(e.name);
    const model::ArchConfig arch = cfg.arch(names);

    std::filesystem::create_directories(dir);
    const auto log_path = dir / kLogName;
    TrainState<float> state = options.resume ? resume(dir, cfg) : TrainState<float>(arch, cfg);
    if (!(state.model.arch == arch)) throw Error("architecture mismatch");
    if (options.resume) truncate_log(log_path, state.step);
    std::ofstream log(log_path, options.resume ? std::ios::app : std::ios::trunc);
    if (!log) throw Error("cannot write training log in " + dir.string());

    const long spe = steps_per_epoch(data.size(), cfg.batch_size);
    const long total = total_steps(data.size(), cfg);
    const auto start = std::chrono::steady_clock::now();
    double interval_recon = 0;
    long interval_steps = 0;

    auto checkpoint = [&] {
        save_train_state(state, cfg, dir / step_name(state.step));
        const double mean_recon = interval_steps ? interval_recon / double(interval_steps) : state.best_recon;
        if (mean_recon < state.best_recon) {
            state.best_recon = mean_recon;
            save_train_state(state, cfg, dir / "best.ckpt");
        }
        interval_recon = 0;
        interval_steps = 0;
        auto all = step_checkpoints(dir);
        for (std::size_t i = 0; i + cfg.keep_last < all.size(); ++i) std::filesystem::remove(all[i].second);
    };

    while (state.step < total) {
        const auto batch = sample_batch(state, data, cfg);
        StepRecord rec;
        rec.losses = train_step(state, batch, cfg);
        rec.step = state.step;
        rec.epoch = (state.step - 1) / spe + 1;
        rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log << rec.to_json() << '\n';
        log.flush();
        interval_recon += rec.losses.recon;
        ++interval_steps;
        const bool stop = options.on_step && !options.on_step(rec);
        if (state.step % cfg.checkpoint_every == 0 || state.step == total || stop) checkpoint();
        if (stop) break;
    }
    return state;
}

TrainState<float> train(const DatasetManifest& manifest, const TrainConfig& cfg, const std::filesystem::path& dir,
                        const TrainOptions& options) {
    cfg.validate();
    std::unique_ptr<LandmarkProvider> provider;
    if (cfg.landmark_command.empty()) provider = std::make_unique<FileLandmarkProvider>();
    else provider = std::make_unique<CommandLandmarkProvider>(cfg.landmark_command);
    const ClipDataset data(manifest, Split::train, *provider);
    return train(data, cfg, dir, options);
}

#define I2V_INSTANTIATE(T)                                                                                      \
    template GeneratorPass<T> generator_pass(const model::Generator<T>&, const TrainingSample&,                 \
                                             const TrainConfig&, bool);                                         \
    template Var<T> discriminator_loss(Tape<T>&, const model::Discriminator<T>&, const Tensor<T>&,              \
                                       const Tensor<T>&);                                                       \
    template struct TrainState<T>;                                                                              \
    template objectives::LossReport train_step(TrainState<T>&, const std::vector<TrainingSample>&,              \
                                               const TrainConfig&);                                             \
    template std::vector<TrainingSample> sample_batch(TrainState<T>&, const ClipDataset&, const TrainConfig&);

I2V_INSTANTIATE(float)
I2V_INSTANTIATE(double)

#undef I2V_INSTANTIATE

}  // namespace i2v::trainer
