#include <benchmark/benchmark.h>

#include "sketchscene/backend.hpp"
#include "sketchscene/compose.hpp"
#include "sketchscene/diffusion.hpp"
#include "sketchscene/identity.hpp"
#include "sketchscene/inference.hpp"
#include "sketchscene/rng.hpp"

using namespace sketchscene;

namespace {

Mask noise_mask(int size, std::uint64_t seed) {
    Rng rng(seed);
    Mask m(size, size);
    for (auto& b : m.bits) b = rng.uniform() < 0.5 ? 1 : 0;
    return m;
}

CompositeGuide square_guide(int canvas, int factor) {
    CompositeGuide g;
    g.factor    = factor;
    g.x_init    = RgbImage(canvas, canvas, 128);
    g.full_mask = Mask(canvas, canvas);
    for (int y = canvas / 4; y < 3 * canvas / 4; ++y)
        for (int x = canvas / 4; x < 3 * canvas / 4; ++x) g.full_mask.at(x, y) = 1;
    g.latent_mask = downsample_mask(g.full_mask, factor);
    return g;
}

void BM_DownsampleMask(benchmark::State& state) {
    const Mask m = noise_mask(static_cast<int>(state.range(0)), 1);
    for (auto _ : state) benchmark::DoNotOptimize(downsample_mask(m, 8));
}
BENCHMARK(BM_DownsampleMask)->Arg(256)->Arg(512)->Arg(1024);

void BM_SamplerStep(benchmark::State& state) {
    const auto sched = make_schedule(50);
    Rng rng(2);
    const auto z   = gaussian_latent(4, 64, 64, rng);
    const auto eps = gaussian_latent(4, 64, 64, rng);
    for (auto _ : state) benchmark::DoNotOptimize(sampler_step(z, eps, 25, sched));
}
BENCHMARK(BM_SamplerStep);

void BM_SceneInference(benchmark::State& state) {
    ToyBackend toy;
    const int canvas = static_cast<int>(state.range(0));
    const auto guide = square_guide(canvas, toy.options().factor);
    RenderConfig cfg;
    cfg.width = cfg.height = canvas;
    cfg.steps              = 50;
    const auto sched       = make_schedule(cfg.steps);
    const PromptPair prompts{"a photo of a chair and lamp in a quiet room", "a photo of a quiet room"};
    EmbeddingBindings bindings;
    for (auto _ : state) benchmark::DoNotOptimize(run_scene_inference(guide, cfg, prompts, bindings, toy, sched));
}
BENCHMARK(BM_SceneInference)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_IdentityStep(benchmark::State& state) {
    ToyBackend toy;
    const auto sched = make_schedule(50);
    Rng rng(3);
    const auto z0   = gaussian_latent(2, 32, 32, rng);
    const auto eps  = gaussian_latent(2, 32, 32, rng);
    const auto mask = downsample_mask(noise_mask(64, 4), 2);
    const auto emb  = init_identity("<obj-bench>", "chair", toy);
    for (auto _ : state) benchmark::DoNotOptimize(identity_step(z0, mask, 20, eps, emb, sched, toy));
}
BENCHMARK(BM_IdentityStep);

}  // namespace

BENCHMARK_MAIN();
