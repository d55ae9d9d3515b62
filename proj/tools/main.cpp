#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace sketchscene::cli;

namespace {

void add_common(CLI::App* cmd, Common& common) {
    cmd->add_option("--config", common.config_path, "Config file (defaults to $SKETCHSCENE_CONFIG)");
    cmd->add_option("--backend", common.backend, "Denoiser backend")->check(CLI::IsMember({"toy", "http"}));
    cmd->add_option("--out", common.out, "Output directory")->capture_default_str();
}

void add_render_options(CLI::App* cmd, RenderArgs& args, bool with_alpha) {
    cmd->add_option("scene", args.scene, "Scene document")->required();
    if (with_alpha)
        cmd->add_option("--alpha", args.alpha, "Phase boundary fraction in [0, 1]")->capture_default_str();
    cmd->add_option("--seed", args.seed, "Sampling seed")->capture_default_str();
    cmd->add_option("--steps,-T", args.steps, "Inference steps")->capture_default_str();
    cmd->add_option("--global-prompt", args.global_prompt, "Override the scene prompt");
    cmd->add_option("--background-prompt", args.background_prompt, "Override the background prompt");
    cmd->add_option("--guidance-scale", args.guidance_scale, "Guidance scale for external backends")
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sketch-guided scene generation"};
    app.require_subcommand(1);
    Common common;
    int result = kOk;

    auto* scene = app.add_subcommand("scene", "Scene documents: validate, compose, render, sweep");
    scene->require_subcommand(1);

    std::filesystem::path validate_path;
    auto* validate = scene->add_subcommand("validate", "Check a scene document");
    validate->add_option("scene", validate_path, "Scene document")->required();
    add_common(validate, common);
    validate->callback([&] { result = scene_validate(common, validate_path); });

    std::filesystem::path compose_path;
    auto* compose = scene->add_subcommand("compose", "Build the composite guide from generated assets");
    compose->add_option("scene", compose_path, "Scene document")->required();
    add_common(compose, common);
    compose->callback([&] { result = scene_compose(common, compose_path); });

    RenderArgs render_args;
    auto* render = scene->add_subcommand("render", "Render the scene");
    add_render_options(render, render_args, true);
    add_common(render, common);
    render->callback([&] { result = scene_render(common, render_args); });

    RenderArgs sweep_args;
    std::string sweep_alphas = "0.4,0.5,0.6";
    std::vector<double> alphas;
    auto* sweep = scene->add_subcommand("sweep", "Render one image per alpha with a shared seed");
    add_render_options(sweep, sweep_args, false);
    sweep->add_option("--alphas", sweep_alphas, "Comma-separated alphas")->capture_default_str();
    add_common(sweep, common);
    sweep->callback([&] {
        try {
            alphas = parse_alphas(sweep_alphas);
        } catch (const std::invalid_argument& e) {
            throw CLI::ValidationError("--alphas", e.what());
        }
        result = scene_sweep(common, sweep_args, alphas);
    });

    auto* objects = app.add_subcommand("objects", "Per-object generation");
    objects->require_subcommand(1);
    std::filesystem::path gen_path;
    std::uint64_t gen_seed = 0;
    std::optional<std::string> gen_object;
    auto* generate = objects->add_subcommand("generate", "Generate object images and masks");
    generate->add_option("scene", gen_path, "Scene document")->required();
    generate->add_option("--seed", gen_seed, "Scene seed")->capture_default_str();
    generate->add_option("--object", gen_object, "Only this object id");
    add_common(generate, common);
    generate->callback([&] { result = objects_generate(common, gen_path, gen_seed, gen_object); });

    auto* identity = app.add_subcommand("identity", "Identity embeddings");
    identity->require_subcommand(1);
    std::filesystem::path train_path;
    std::optional<int> train_steps;
    std::optional<double> train_lr;
    std::uint64_t train_seed = 0;
    auto* train = identity->add_subcommand("train", "Train one identity embedding per object");
    train->add_option("scene", train_path, "Scene document")->required();
    train->add_option("--steps", train_steps, "Training steps (toy 50, otherwise 400)")->check(CLI::NonNegativeNumber);
    train->add_option("--lr", train_lr, "Learning rate (toy 1e-2, otherwise 5e-3)")->check(CLI::PositiveNumber);
    train->add_option("--seed", train_seed, "Training seed")->capture_default_str();
    add_common(train, common);
    train->callback([&] { result = identity_train(common, train_path, train_steps, train_lr, train_seed); });

    auto* bench = app.add_subcommand("bench", "Batch benchmarks");
    bench->require_subcommand(1);
    BenchArgs bench_args;
    std::string bench_seeds  = "0..50";
    std::string bench_alphas = "0.5";
    auto* run = bench->add_subcommand("run", "Render every scene in a directory over a seed range");
    run->add_option("scenes", bench_args.scenes_dir, "Directory of scene documents")->required();
    run->add_option("--seeds", bench_seeds, "Seeds: a..b (inclusive), n, or a list")->capture_default_str();
    run->add_option("--alphas", bench_alphas, "Comma-separated alphas")->capture_default_str();
    run->add_option("--steps,-T", bench_args.steps, "Inference steps")->capture_default_str();
    run->add_option("--jobs,-j", bench_args.jobs, "Scenes rendered in parallel")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    add_common(run, common);
    run->callback([&] {
        try {
            bench_args.seeds  = parse_seeds(bench_seeds);
            bench_args.alphas = parse_alphas(bench_alphas);
        } catch (const std::invalid_argument& e) {
            throw CLI::ValidationError("bench run", e.what());
        }
        result = bench_run(common, bench_args);
    });

    std::string host = "127.0.0.1";
    int port         = 8080;
    std::optional<std::filesystem::path> root;
    auto* srv = app.add_subcommand("serve", "Run the HTTP service");
    srv->add_option("--host", host, "Bind address")->capture_default_str();
    srv->add_option("--port", port, "Port")->capture_default_str()->check(CLI::Range(1, 65535));
    srv->add_option("--root", root, "Artifact root (overrides the config)");
    srv->add_option("--pool", common.pool_size, "Worker count (overrides the config)")->check(CLI::PositiveNumber);
    add_common(srv, common);
    srv->callback([&] { result = serve(common, host, port, root); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }
    return result;
}
