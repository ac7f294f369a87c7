// Serial reference vs. OpenMP im2col kernels on the layer shapes of the
// desk and full-size encoders. Prints one line per shape and pass.
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include "i2v/kernels.hpp"

using namespace i2v::kernels;

namespace {

double best_of(int reps, const std::function<void()>& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

}  // namespace

int main() {
    const std::vector<ConvGeometry> shapes{
        {3, 64, 64, 32},   {32, 32, 32, 64},  {64, 16, 16, 128},
        {3, 256, 256, 64}, {64, 128, 128, 128}, {128, 64, 64, 256},
    };
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> u(-1, 1);
    std::printf("threads %d\n", omp_get_max_threads());
    std::printf("%-18s %-9s %12s %12s %8s\n", "shape", "pass", "reference_ms", "parallel_ms", "speedup");
    for (const auto& g : shapes) {
        std::vector<float> x(g.input_size()), w(g.weight_size()), b(g.out_channels), y(g.output_size()),
            dy(g.output_size()), dx(g.input_size()), dw(g.weight_size());
        for (auto* v : {&x, &w, &b, &dy})
            for (auto& e : *v) e = u(rng);
        const int reps = g.input_size() > 1'000'000 ? 1 : 3;
        char name[32];
        std::snprintf(name, sizeof name, "%dx%dx%d->%d", g.in_channels, g.in_height, g.in_width, g.out_channels);

        auto report = [&](const char* pass, double ref, double par) {
            std::printf("%-18s %-9s %12.2f %12.2f %7.2fx\n", name, pass, ref, par, ref / par);
        };
        report("forward", best_of(reps, [&] { reference::conv2d_forward(g, x.data(), w.data(), b.data(), y.data()); }),
               best_of(reps, [&] { parallel::conv2d_forward(g, x.data(), w.data(), b.data(), y.data()); }));
        report("grad_in", best_of(reps, [&] { reference::conv2d_backward_input(g, dy.data(), w.data(), dx.data()); }),
               best_of(reps, [&] { parallel::conv2d_backward_input(g, dy.data(), w.data(), dx.data()); }));
        report("grad_w", best_of(reps, [&] { reference::conv2d_backward_weight(g, x.data(), dy.data(), dw.data()); }),
               best_of(reps, [&] { parallel::conv2d_backward_weight(g, x.data(), dy.data(), dw.data()); }));
    }
}
