#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "lamina/registration.hpp"

namespace lamina {

using Json = nlohmann::json;

/// Registration settings as JSON. Parsing rejects unknown keys; missing keys keep defaults,
/// except kernel and varifold widths, which are required.
Json to_json(const RegistrationConfig& config);
RegistrationConfig registration_config_from_json(const Json& j);

Json to_json(const FlowState& state);
FlowState flow_state_from_json(const Json& j);

Json to_json(const ConvergenceReport& report);

/// Single-document checkpoint: flow state, the configuration that produced it and,
/// optionally, the target surface.
struct Checkpoint {
    FlowState state;
    RegistrationConfig config;
    std::optional<TriMesh> target;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws ConfigError naming the first key of j not in allowed.
void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& context);

}  // namespace lamina
