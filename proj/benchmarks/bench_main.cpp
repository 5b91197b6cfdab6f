#include <benchmark/benchmark.h>

#include "graspkit/encoder.hpp"
#include "graspkit/quality.hpp"
#include "graspkit/workspace.hpp"

namespace {

const gk::GripperModel& tri3() {
    static const gk::GripperModel model = gk::make_tri3();
    return model;
}

void bm_coupled_chamfer(benchmark::State& state) {
    const auto rows = state.range(0);
    const auto a = gk::sample_workspace(tri3(), rows, 1);
    const auto b = gk::sample_workspace(tri3(), rows, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gk::coupled_chamfer(a, b));
    }
}
BENCHMARK(bm_coupled_chamfer)->Arg(128)->Arg(512);

void bm_five_bar_fk(benchmark::State& state) {
    const auto model = gk::make_fivebar3();
    const auto q = model.mid_config();
    for (auto _ : state) {
        benchmark::DoNotOptimize(gk::forward_kinematics(model, q));
    }
}
BENCHMARK(bm_five_bar_fk);

void bm_gqs(benchmark::State& state) {
    const std::vector<gk::Vec3> contacts = {
        {0.02, 0, 0}, {-0.01, 0.017, 0}, {-0.01, -0.017, 0}};
    for (auto _ : state) {
        benchmark::DoNotOptimize(gk::gqs(contacts, gk::Vec3::Zero()));
    }
}
BENCHMARK(bm_gqs);

void bm_encoder_forward(benchmark::State& state) {
    std::mt19937_64 rng(0);
    gk::Net encoder = gk::make_encoder_net(3);
    encoder.init_params(rng);
    const auto ws = gk::sample_workspace(tri3(), 512, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gk::extract_gripper_feature(encoder, ws));
    }
}
BENCHMARK(bm_encoder_forward);

}  // namespace

BENCHMARK_MAIN();
