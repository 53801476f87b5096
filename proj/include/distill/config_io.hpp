// JSON (de)serialization of Config. Unknown keys are rejected so typos surface.
#pragma once

#include <filesystem>

#include <json.hpp>

#include "distill/core.hpp"

namespace distill {

nlohmann::json config_to_json(const Config& config);
// Missing keys keep their defaults.
Config config_from_json(const nlohmann::json& j);

Config load_config(const std::filesystem::path& path);
void save_config(const Config& config, const std::filesystem::path& path);

}  // namespace distill
