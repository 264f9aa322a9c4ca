#include <CLI11.hpp>

#include "lamina/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"lamina: laminar coordinate systems between nested surfaces"};
    app.set_version_flag("--version", lamina::kVersion);
    app.require_subcommand(1);

    lamina::RunOptions opt;
    std::string config, out;
    int threads = 0;
    std::uint64_t seed = 0;

    const char* names[][2] = {
        {"synth", "generate a synthetic surface pair with analytic oracles"},
        {"register", "solve the normality-constrained flow from inner to outer surface"},
        {"laminar", "streamlines, thickness, time change and equivolumetric layers from a flow"},
        {"levelset", "Laplace level-set baseline on a voxel grid"},
        {"metrics", "nearest-vertex distances, thickness distributions and CDFs"},
        {"compare", "compare distance distributions"},
    };
    for (const auto& n : names) {
        CLI::App* sub = app.add_subcommand(n[0], n[1]);
        sub->add_option("--config", config, "JSON configuration file")->required();
        sub->add_option("--out", out, "output directory (overrides output_dir)");
        sub->add_option("--threads", threads, "worker threads (default: logical cores)");
        sub->add_option("--seed", seed, "random seed override");
        if (std::string(n[0]) == "metrics") sub->add_flag("--squared", opt.squared, "use squared distances");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : lamina::kExitConfig;
    }

    CLI::App* chosen = app.get_subcommands().front();
    opt.config = config;
    if (chosen->count("--out")) opt.out = out;
    if (chosen->count("--threads")) opt.threads = threads;
    if (chosen->count("--seed")) opt.seed = seed;
    return lamina::run_subcommand(chosen->get_name(), opt);
}
