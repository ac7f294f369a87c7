// Runs the overfit experiment with overrides and prints its metrics.
//   overfit_probe [--steps N] [--lr X] [--seed N] [--wt X] [--wl X] [--wr X] [--notemp 1] [--width W]
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>

#include "acceptance/overfit_experiment.hpp"

using namespace i2v;

int main(int argc, char** argv) {
    auto cfg = acceptance::overfit_config();
    int width = 0;
    bool no_temporal = false;
    CLI::App app("Overfit experiment with overrides");
    app.add_option("--steps", cfg.max_steps);
    app.add_option("--lr", cfg.learning_rate);
    app.add_option("--seed", cfg.seed);
    app.add_option("--wt", cfg.weights.w_temporal);
    app.add_option("--wl", cfg.weights.w_landmark);
    app.add_option("--wr", cfg.weights.w_recon);
    app.add_option("--notemp", no_temporal);
    app.add_option("--width", width, "Base width; levels get w, 2w, 4w, 4w, 4w, 4w");
    CLI11_PARSE(app, argc, argv);
    if (no_temporal) cfg.ablations.use_temporal_reg = false;
    if (width > 0) cfg.widths = {width, 2 * width, 4 * width, 4 * width, 4 * width, 4 * width};

    const auto dir = std::filesystem::temp_directory_path() / "i2v_overfit_probe";
    const auto data = acceptance::synthetic_dataset(dir / "data");
    trainer::TrainOptions opt;
    opt.on_step = [](const trainer::StepRecord& r) {
        if (r.step % 100 == 0) {
            std::printf("step %ld t=%.0fs recon %.4f lm %.2f tmp %.4f dg %.3f dl %.3f\n", r.step, r.wall_time,
                        r.losses.recon, r.losses.landmark, r.losses.temporal, r.losses.disc_global,
                        r.losses.disc_local);
            std::fflush(stdout);
        }
        return true;
    };
    const auto st = trainer::train(data, cfg, dir / "run", opt);
    const auto m = acceptance::measure(st.model.generator, data, cfg);
    std::printf("recon_endpoints %.4f\n", m.recon_endpoints);
    for (const auto& c : m.curves)
        std::printf("curve rank %.3f maxjump %.3f maxdec %.3f final %.3f\n", c.monotonicity_rank_corr, c.max_jump,
                    c.max_decrease, c.final_value);
}
