#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace lamina {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3 };

struct RunOptions {
    std::filesystem::path config;
    std::optional<std::filesystem::path> out;  // overrides the config's output_dir
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
    bool squared = false;                      // metrics: squared distances
};

/// Each subcommand reads its JSON config, writes its outputs and a run_summary.json into
/// the output directory, and returns an ExitCode. Relative paths in a config resolve
/// against the config file's directory.
int run_synth(const RunOptions& options);
int run_register(const RunOptions& options);
int run_laminar(const RunOptions& options);
int run_levelset(const RunOptions& options);
int run_metrics(const RunOptions& options);
int run_compare(const RunOptions& options);

int run_subcommand(const std::string& name, const RunOptions& options);

}  // namespace lamina
