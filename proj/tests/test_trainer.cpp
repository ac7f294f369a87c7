#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "i2v/error.hpp"
#include "i2v/synthetic.hpp"
#include "i2v/trainer.hpp"

using namespace i2v;
using namespace i2v::trainer;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / "i2v_test_trainer" / name;
    fs::remove_all(dir);
    return dir;
}

TrainConfig toy_config() {
    TrainConfig c;
    c.input_size = 16;
    c.levels = 3;
    c.widths = {4, 6, 8};
    c.disc_widths = {4, 6, 8};
    c.epochs = 3;
    c.seed = 11;
    c.checkpoint_every = 4;
    return c;
}

const ClipDataset& toy_data() {
    static const ClipDataset data = [] {
        const fs::path dir = fresh_dir("data");
        synthetic::SyntheticConfig sc;
        sc.subjects = 2;
        sc.frames = 5;
        sc.emotions = {"happy", "sad"};
        sc.image_size = 16;
        sc.seed = 3;
        synthetic::generate_synthetic_dataset(sc, dir);
        FileLandmarkProvider provider;
        return ClipDataset(load_manifest(dir / "manifest.txt"), Split::train, provider);
    }();
    return data;
}

std::vector<std::string> names(const ClipDataset& data) {
    std::vector<std::string> out;
    for (const auto& e : data.emotions()) out.push_back(e.name);
    return out;
}

std::vector<json> read_log(const fs::path& dir) {
    std::vector<json> out;
    std::ifstream in(dir / "train_log.jsonl");
    std::string line;
    while (std::getline(in, line)) {
        json j = json::parse(line);
        j.erase("wall_time");
        out.push_back(j);
    }
    return out;
}

template <typename T>
std::vector<float> values(const model::ParamSet<T>& ps) {
    std::vector<float> v;
    for (const auto& p : ps.all()) v.insert(v.end(), p.value.storage().begin(), p.value.storage().end());
    return v;
}

}  // namespace

TEST_CASE("config JSON round trip and validation") {
    TrainConfig c = toy_config();
    c.weights.w_temporal = 3;
    c.ablations.use_landmark_loss = false;
    c.landmark_command = "detect --csv";
    CHECK(TrainConfig::from_json(c.to_json()) == c);

    CHECK_THROWS_WITH_AS(TrainConfig::from_json(R"({"epochs": 0})"), "epochs ≥ 1", Error);
    CHECK_THROWS_WITH_AS(TrainConfig::from_json(R"({"epocs": 3})"), "unknown config key epocs", Error);
    CHECK_THROWS_AS(TrainConfig::from_json(R"({"weights": {"w_recon": -1}})"), Error);
    CHECK_THROWS_AS(TrainConfig::from_json("[1, 2]"), Error);
    CHECK_THROWS_AS(TrainConfig::from_json(R"({"epochs": "many"})"), Error);
    CHECK_THROWS_AS(TrainConfig::load("/nonexistent/config.json"), Error);

    TrainConfig bad = toy_config();
    bad.epochs = 0;
    CHECK_THROWS_WITH_AS(train(toy_data(), bad, fresh_dir("bad")), "epochs ≥ 1", Error);
}

TEST_CASE("ablations zero the matching weights") {
    TrainConfig c;
    c.ablations = {false, false, false};
    const auto w = c.effective_weights();
    CHECK(w.w_local == 0);
    CHECK(w.w_landmark == 0);
    CHECK(w.w_temporal == 0);
    CHECK(w.w_global == 1);
    CHECK(w.w_recon == 100);
}

TEST_CASE("epoch and step counts") {
    CHECK(steps_per_epoch(4, 1) == 4);
    CHECK(steps_per_epoch(5, 2) == 3);
    TrainConfig c;
    c.epochs = 10;
    CHECK(total_steps(4, c) == 40);
    c.max_steps = 7;
    CHECK(total_steps(4, c) == 7);
    CHECK_THROWS_AS(steps_per_epoch(0, 1), Error);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const TrainConfig cfg = toy_config();
    const fs::path da = fresh_dir("det_a"), db = fresh_dir("det_b");
    const auto a = train(toy_data(), cfg, da);
    const auto b = train(toy_data(), cfg, db);
    CHECK(a.step == total_steps(toy_data().size(), cfg));
    CHECK(a.model.generator.crc() == b.model.generator.crc());
    CHECK(read_log(da).size() == std::size_t(a.step));
    CHECK(read_log(da) == read_log(db));

    TrainConfig other = cfg;
    other.seed = 12;
    const auto c = train(toy_data(), other, fresh_dir("det_c"));
    CHECK(c.model.generator.crc() != a.model.generator.crc());
}

TEST_CASE("checkpoints, retention and resume") {
    TrainConfig cfg = toy_config();
    cfg.epochs = 3;  // 12 steps with 4 clips
    cfg.keep_last = 2;
    const fs::path full_dir = fresh_dir("full");
    const auto full = train(toy_data(), cfg, full_dir);
    CHECK(fs::exists(full_dir / "step_00000008.ckpt"));
    CHECK(fs::exists(full_dir / "step_00000012.ckpt"));
    CHECK_FALSE(fs::exists(full_dir / "step_00000004.ckpt"));
    CHECK(fs::exists(full_dir / "best.ckpt"));
    CHECK(read_log(full_dir).size() == 12);

    // Stop after 6 steps, then resume from the step-6 checkpoint. Log lines
    // written past the checkpoint must not survive.
    const fs::path part_dir = fresh_dir("part");
    TrainOptions stop;
    stop.on_step = [](const StepRecord& r) { return r.step < 6; };
    train(toy_data(), cfg, part_dir, stop);
    CHECK(latest_checkpoint(part_dir).filename() == "step_00000006.ckpt");
    {
        std::ofstream log(part_dir / "train_log.jsonl", std::ios::app);
        log << R"({"step":7,"bogus":true})" << '\n';
    }
    TrainOptions again;
    again.resume = true;
    const auto resumed = train(toy_data(), cfg, part_dir, again);
    CHECK(resumed.step == 12);
    CHECK(resumed.model.generator.crc() == full.model.generator.crc());
    CHECK(resumed.model.discriminators.global.params().crc() == full.model.discriminators.global.params().crc());
    CHECK(read_log(part_dir) == read_log(full_dir));
}

TEST_CASE("resume errors") {
    const TrainConfig cfg = toy_config();
    CHECK_THROWS_AS(resume("/nonexistent/ckpts", cfg), Error);
    const fs::path empty = fresh_dir("empty");
    fs::create_directories(empty);
    CHECK_THROWS_AS(resume(empty, cfg), Error);

    const fs::path dir = fresh_dir("mismatch");
    TrainConfig short_run = cfg;
    short_run.max_steps = 1;
    train(toy_data(), short_run, dir);
    TrainConfig wider = cfg;
    wider.widths = {4, 6, 10};
    CHECK_THROWS_WITH_AS(resume(dir, wider), "architecture mismatch", Error);
}

TEST_CASE("ablations leave the other first-step terms unchanged") {
    const TrainConfig base = toy_config();
    const auto arch = base.arch(names(toy_data()));
    auto first_step = [&](const TrainConfig& cfg) {
        TrainState<float> s(arch, cfg);
        return train_step(s, sample_batch(s, toy_data(), cfg), cfg);
    };
    const auto full = first_step(base);
    CHECK(full.temporal > 0);
    CHECK(full.landmark > 0);
    CHECK(full.adv_local > 0);

    TrainConfig no_lm = base;
    no_lm.ablations.use_landmark_loss = false;
    const auto a = first_step(no_lm);
    CHECK(a.landmark == 0);
    CHECK(a.recon == full.recon);
    CHECK(a.adv_global == full.adv_global);
    CHECK(a.adv_local == full.adv_local);
    CHECK(a.disc_global == full.disc_global);
    CHECK(a.temporal == full.temporal);

    TrainConfig no_tmp = base;
    no_tmp.ablations.use_temporal_reg = false;
    const auto b = first_step(no_tmp);
    CHECK(b.temporal == 0);
    CHECK(b.recon == full.recon);
    CHECK(b.landmark == full.landmark);
    CHECK(b.adv_global == full.adv_global);

    TrainConfig no_local = base;
    no_local.ablations.use_local_disc = false;
    const auto c = first_step(no_local);
    CHECK(c.adv_local == 0);
    CHECK(c.disc_local == 0);
    CHECK(c.recon == full.recon);
    CHECK(c.disc_global == full.disc_global);
    CHECK(c.adv_global == full.adv_global);
}

TEST_CASE("local discriminator is untouched when disabled") {
    TrainConfig cfg = toy_config();
    cfg.ablations.use_local_disc = false;
    TrainState<float> s(cfg.arch(names(toy_data())), cfg);
    const auto before = values(s.model.discriminators.local.params());
    const auto g_before = values(s.model.discriminators.global.params());
    for (int i = 0; i < 3; ++i) train_step(s, sample_batch(s, toy_data(), cfg), cfg);
    CHECK(values(s.model.discriminators.local.params()) == before);
    CHECK(values(s.model.discriminators.global.params()) != g_before);
    CHECK(s.dl_opt.steps() == 0);
    CHECK(s.dg_opt.steps() == 3);
}

TEST_CASE("generator terms are scored by the updated discriminator") {
    const TrainConfig cfg = toy_config();
    TrainState<float> s(cfg.arch(names(toy_data())), cfg);
    const auto batch = sample_batch(s, toy_data(), cfg);
    const model::Generator<float> g0 = s.model.generator;
    const model::Discriminators<float> d0 = s.model.discriminators;
    const auto report = train_step(s, batch, cfg);

    const auto fake = generator_pass(g0, batch[0], cfg, false).frame.value();
    auto adv_with = [&](const model::Discriminator<float>& d) {
        ag::Tape<float> tape(false);
        return double(objectives::adv_generator(d.score(tape, tape.constant(fake))).item());
    };
    CHECK(report.adv_global == doctest::Approx(adv_with(s.model.discriminators.global)).epsilon(1e-6));
    CHECK(report.adv_global != doctest::Approx(adv_with(d0.global)).epsilon(1e-9));
    CHECK(s.model.generator.crc() != g0.crc());
    CHECK(s.model.discriminators.global.params().crc() != d0.global.params().crc());
}

TEST_CASE("local adversarial score ignores pixels outside the mouth mask") {
    const TrainConfig cfg = toy_config();
    TrainState<float> s(cfg.arch(names(toy_data())), cfg);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> u(0, 1);
    for (int trial = 0; trial < 10; ++trial) {
        const auto sample = sample_batch(s, toy_data(), cfg)[0];
        const Tensor<float> mask = sample.mask.as_tensor();
        REQUIRE(sample.mask.count() > 0);
        Tensor<float> a = sample.target.tensor(), b = a;
        for (std::size_t i = 0; i < b.size(); ++i)
            if (mask[i] == 0) b[i] = u(rng);
        const Tensor<float> fake = generator_pass(s.model.generator, sample, cfg, false).frame.value();
        Tensor<float> masked_a = a, masked_b = b, masked_fake = fake;
        for (std::size_t i = 0; i < a.size(); ++i) {
            masked_a[i] *= mask[i];
            masked_b[i] *= mask[i];
            masked_fake[i] *= mask[i];
        }
        ag::Tape<float> ta(false), tb(false);
        const auto& dl = s.model.discriminators.local;
        CHECK(discriminator_loss(ta, dl, masked_a, masked_fake).item() ==
              discriminator_loss(tb, dl, masked_b, masked_fake).item());
    }
}

TEST_CASE("batched step averages per-sample gradients") {
    TrainConfig cfg = toy_config();
    cfg.batch_size = 2;
    TrainState<float> s(cfg.arch(names(toy_data())), cfg);
    const auto batch = sample_batch(s, toy_data(), cfg);
    CHECK(batch.size() == 2);
    const auto r = train_step(s, batch, cfg);
    CHECK(std::isfinite(r.generator_total));
    CHECK(r.generator_total == doctest::Approx(objectives::generator_objective(r, cfg.effective_weights())));
    CHECK_THROWS_AS(train_step(s, {}, cfg), Error);
}
