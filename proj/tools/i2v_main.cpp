// i2v command-line entry point: synth-data, train, generate, evaluate, serve.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "i2v/checkpoint.hpp"
#include "i2v/data.hpp"
#include "i2v/error.hpp"
#include "i2v/evaluation.hpp"
#include "i2v/service.hpp"
#include "i2v/synthesis.hpp"
#include "i2v/synthetic.hpp"
#include "i2v/trainer.hpp"

using namespace i2v;
namespace fs = std::filesystem;

namespace {

constexpr const char* kCheckpointEnv = "I2V_CHECKPOINT";

std::string default_checkpoint() {
    const char* v = std::getenv(kCheckpointEnv);
    return v ? v : "";
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

// Schedule source flags shared by generate and evaluate.
struct ScheduleFlags {
    std::string file, linear, unimodal, transfer;

    void add(CLI::App& app) {
        auto* f = app.add_option("--schedule", file, "Schedule file: one line per frame, comma-separated degrees");
        auto* l = app.add_option("--linear", linear, "Linear ramp EMOTION:COUNT (degrees 1/COUNT .. 1)");
        auto* u = app.add_option("--unimodal", unimodal, "Rise and fall EMOTION:COUNT (0 .. 1 .. 0)");
        auto* t = app.add_option("--transfer", transfer, "Transfer FROM:TO:COUNT (FROM 1->0 while TO 0->1)");
        f->excludes(l, u, t);
        l->excludes(u, t);
        u->excludes(t);
    }

    synthesis::ActionSchedule build(const std::vector<std::string>& emotions) const {
        if (!file.empty()) return synthesis::load_schedule(file, emotions.size());
        if (!linear.empty()) return synthesis::build_schedule("linear", linear, emotions);
        if (!unimodal.empty()) return synthesis::build_schedule("unimodal", unimodal, emotions);
        if (!transfer.empty()) return synthesis::build_schedule("transfer", transfer, emotions);
        throw Error("no schedule given (use --schedule, --linear, --unimodal or --transfer)");
    }
};

std::string require_checkpoint(const std::string& flag) {
    if (!flag.empty()) return flag;
    throw Error(std::string("no checkpoint given (use --checkpoint or set ") + kCheckpointEnv + ")");
}

FrameImage model_input(const fs::path& path, int size) {
    FrameImage img = load_png(path);
    if (img.height() == size && img.width() == size) return img;
    return center_square(img, size);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Image-to-video expression synthesis: data, training, generation, evaluation, serving"};
    app.require_subcommand(1);

    // synth-data
    synthetic::SyntheticConfig synth;
    std::string synth_out, synth_emotions = "happy";
    auto* cmd_synth = app.add_subcommand("synth-data", "Render a synthetic face-expression dataset with landmarks");
    cmd_synth->add_option("--out", synth_out, "Output directory (manifest.txt + clip folders)")->required();
    cmd_synth->add_option("--subjects", synth.subjects, "Number of synthetic subjects")->capture_default_str();
    cmd_synth->add_option("--frames", synth.frames, "Frames per clip (T)")->capture_default_str();
    cmd_synth->add_option("--emotions", synth_emotions, "Comma-separated emotion names")->capture_default_str();
    cmd_synth->add_option("--size", synth.image_size, "Frame size in pixels")->capture_default_str();
    cmd_synth->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
    cmd_synth->add_option("--validation-subjects", synth.validation_subjects,
                          "Trailing subjects assigned to the validation split")
        ->capture_default_str();

    // train
    std::string train_manifest, train_config, train_out, preset = "full";
    bool train_resume = false, no_local = false, no_landmark = false, no_temporal = false;
    std::optional<int> o_epochs, o_batch, o_every;
    std::optional<long> o_max_steps;
    std::optional<double> o_lr, o_delta;
    std::optional<std::uint64_t> o_seed;
    auto* cmd_train = app.add_subcommand("train", "Train generator and discriminators on a manifest");
    cmd_train->add_option("--manifest", train_manifest, "Dataset manifest")->required();
    cmd_train->add_option("--config", train_config, "JSON training config (overrides --preset)");
    cmd_train->add_option("--out", train_out, "Checkpoint and log directory")->required();
    cmd_train->add_option("--preset", preset, "Base config when no --config: full (256px, 8 levels) or desk (64px, 6 levels)")
        ->check(CLI::IsMember({"full", "desk"}))
        ->capture_default_str();
    cmd_train->add_flag("--resume", train_resume, "Continue from the latest checkpoint in --out");
    cmd_train->add_option("--epochs", o_epochs, "Override epochs");
    cmd_train->add_option("--max-steps", o_max_steps, "Stop after this many steps (0 = all epochs)");
    cmd_train->add_option("--batch-size", o_batch, "Override batch size");
    cmd_train->add_option("--lr", o_lr, "Override learning rate");
    cmd_train->add_option("--seed", o_seed, "Override seed");
    cmd_train->add_option("--delta-a", o_delta, "Override temporal increment");
    cmd_train->add_option("--checkpoint-every", o_every, "Override checkpoint interval in steps");
    cmd_train->add_flag("--no-local-disc", no_local, "Ablation: disable the local (mouth) discriminator");
    cmd_train->add_flag("--no-landmark-loss", no_landmark, "Ablation: disable the landmark loss");
    cmd_train->add_flag("--no-temporal-reg", no_temporal, "Ablation: disable the temporal regularizer");

    // generate
    std::string gen_ckpt = default_checkpoint(), gen_image, gen_out, encoder_bin = "ffmpeg";
    int fps = 10;
    bool frames_only = false;
    ScheduleFlags gen_sched;
    auto* cmd_gen = app.add_subcommand("generate", "Render a frame sequence from one image and a schedule");
    cmd_gen->add_option("--checkpoint", gen_ckpt, std::string("Model checkpoint (default $") + kCheckpointEnv + ")");
    cmd_gen->add_option("--image", gen_image, "Input face image (PNG)")->required();
    cmd_gen->add_option("--out", gen_out, "Output directory for frames and video.json")->required();
    gen_sched.add(*cmd_gen);
    cmd_gen->add_option("--fps", fps, "Frames per second for the video metadata/container")->capture_default_str();
    cmd_gen->add_option("--encoder", encoder_bin, "Video encoder binary")->capture_default_str();
    cmd_gen->add_flag("--frames-only", frames_only, "Write frames only, skip the container");

    // evaluate
    std::string ev_ckpt = default_checkpoint(), ev_image, ev_out, ev_truth, ev_detector;
    ScheduleFlags ev_sched;
    auto* cmd_eval = app.add_subcommand("evaluate", "Landmark continuity curve and smoothness stats for a schedule");
    cmd_eval->add_option("--checkpoint", ev_ckpt, std::string("Model checkpoint (default $") + kCheckpointEnv + ")");
    cmd_eval->add_option("--image", ev_image, "Input face image (PNG)")->required();
    cmd_eval->add_option("--out", ev_out, "Report table path (.csv); the plot goes next to it as .svg")->required();
    ev_sched.add(*cmd_eval);
    cmd_eval->add_option("--ground-truth", ev_truth,
                         "Clip directory whose landmark files give a ground-truth column (same frame count)");
    cmd_eval->add_option("--detector", ev_detector,
                         "Landmark detector command run on generated frames (adds a 'detector' column)");

    // serve
    service::ServiceConfig svc;
    std::string srv_ckpt = default_checkpoint();
    double max_mb = 16;
    auto* cmd_serve = app.add_subcommand("serve", "HTTP inference service for scripts and the control panel");
    cmd_serve->add_option("--checkpoint", srv_ckpt, std::string("Model checkpoint (default $") + kCheckpointEnv + ")");
    cmd_serve->add_option("--host", svc.host, "Bind address")->capture_default_str();
    cmd_serve->add_option("--port", svc.port, "Port")->capture_default_str();
    cmd_serve->add_option("--max-payload-mb", max_mb, "Largest accepted request body in MiB")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*cmd_synth) {
            synth.emotions = split_list(synth_emotions);
            const auto m = synthetic::generate_synthetic_dataset(synth, synth_out);
            std::printf("wrote %zu clips to %s\n", m.clips.size(), synth_out.c_str());
        } else if (*cmd_train) {
            trainer::TrainConfig cfg = !train_config.empty() ? trainer::TrainConfig::load(train_config)
                                       : preset == "desk"    ? trainer::TrainConfig::desk()
                                                             : trainer::TrainConfig{};
            if (o_epochs) cfg.epochs = *o_epochs;
            if (o_max_steps) cfg.max_steps = *o_max_steps;
            if (o_batch) cfg.batch_size = *o_batch;
            if (o_lr) cfg.learning_rate = *o_lr;
            if (o_seed) cfg.seed = *o_seed;
            if (o_delta) cfg.temporal.delta_a = *o_delta;
            if (o_every) cfg.checkpoint_every = *o_every;
            if (no_local) cfg.ablations.use_local_disc = false;
            if (no_landmark) cfg.ablations.use_landmark_loss = false;
            if (no_temporal) cfg.ablations.use_temporal_reg = false;
            cfg.validate();
            const auto manifest = load_manifest(train_manifest);
            trainer::TrainOptions opt;
            opt.resume = train_resume;
            opt.on_step = [](const trainer::StepRecord& r) {
                if (r.step % 50 == 0 || r.step == 1)
                    std::printf("step %ld epoch %ld recon %.4f landmark %.3f temporal %.4f D %.4f (%.1fs)\n", r.step,
                                r.epoch, r.losses.recon, r.losses.landmark, r.losses.temporal,
                                r.losses.discriminator_total, r.wall_time);
                std::fflush(stdout);
                return true;
            };
            const auto st = trainer::train(manifest, cfg, train_out, opt);
            std::printf("finished at step %ld; checkpoints in %s\n", st.step, train_out.c_str());
        } else if (*cmd_gen) {
            const auto m = model::load_model<float>(require_checkpoint(gen_ckpt));
            const auto schedule = gen_sched.build(m.arch.emotions);
            const auto seq = synthesis::render(m.generator, model_input(gen_image, m.arch.input_size), schedule);
            synthesis::FfmpegEncoder encoder(encoder_bin);
            const auto res = synthesis::export_video(seq, gen_out, fps, frames_only ? nullptr : &encoder);
            std::printf("wrote %zu frames to %s%s\n", res.frames.size(), gen_out.c_str(),
                        res.container ? (" and " + res.container->string()).c_str()
                                      : (frames_only ? "" : " (no encoder found; frames only)"));
        } else if (*cmd_eval) {
            const auto m = model::load_model<float>(require_checkpoint(ev_ckpt));
            const auto schedule = ev_sched.build(m.arch.emotions);
            const auto seq = synthesis::render(m.generator, model_input(ev_image, m.arch.input_size), schedule);
            std::vector<std::pair<std::string, evaluation::ContinuityCurve>> curves{
                {"landmark_head", evaluation::continuity_curve(seq.landmarks)}};
            if (!ev_detector.empty()) {
                const fs::path frames_dir = fs::path(ev_out).parent_path() / "evaluated_frames";
                const auto res = synthesis::export_video(seq, frames_dir, 10);
                CommandLandmarkProvider detector(ev_detector);
                std::vector<LandmarkSet> detected;
                for (const auto& f : res.frames) detected.push_back(detector.landmarks_for(f));
                curves.emplace_back("detector", evaluation::continuity_curve(detected));
            }
            if (!ev_truth.empty()) {
                // Ground-truth landmarks in model-input pixel units, using the
                // same centre crop as evaluation-time preprocessing.
                const auto pre = PreprocessConfig::for_input_size(m.arch.input_size);
                std::vector<LandmarkSet> truth;
                for (int t = 1;; ++t) {
                    const fs::path frame = frame_path(ev_truth, t);
                    if (!fs::exists(frame)) break;
                    const FrameImage img = load_png(frame);
                    LandmarkSet lm = resize_landmarks(FileLandmarkProvider().landmarks_for(frame), img.height(),
                                                      img.width(), pre.resize, pre.resize);
                    const double off = (pre.resize - pre.crop) / 2;
                    truth.push_back(translate_landmarks(lm, -off, -off));
                }
                curves.emplace_back("ground_truth", evaluation::continuity_curve(truth));
            }
            const auto files = evaluation::compare_report(curves, ev_out);
            nlohmann::ordered_json stats;
            for (const auto& [name, c] : curves) {
                if (c.distances.size() < 2) continue;
                const auto s = evaluation::smoothness_stats(c);
                stats[name] = {{"max_jump", s.max_jump},
                               {"monotonicity_rank_corr", s.monotonicity_rank_corr},
                               {"final_value", s.final_value},
                               {"max_decrease", s.max_decrease}};
            }
            std::printf("%s\nwrote %s and %s\n", stats.dump(2).c_str(), files.table.c_str(), files.plot.c_str());
        } else if (*cmd_serve) {
            const std::string ckpt = require_checkpoint(srv_ckpt);
            svc.max_payload_bytes = static_cast<std::size_t>(max_mb * 1024 * 1024);
            service::InferenceService server(svc);
            // Serve immediately (503 until ready) and load alongside.
            std::thread loader([&] {
                try {
                    server.load(ckpt);
                    std::printf("model %s ready on %s:%d\n", server.snapshot()->id.c_str(), svc.host.c_str(), svc.port);
                    std::fflush(stdout);
                } catch (const std::exception& e) {
                    std::fprintf(stderr, "error: %s\n", e.what());
                    std::exit(1);
                }
            });
            loader.detach();
            server.run();
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
