#pragma once

#include <filesystem>
#include <string_view>

#include <json.hpp>

#include "wdtcn/model.h"

namespace wdtcn {

inline constexpr std::string_view kCheckpointMagic = "WDTCN-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

nlohmann::json config_to_json(const ModelConfig& config);
// Missing keys keep their defaults; the result is validated.
ModelConfig config_from_json(const nlohmann::json& j);

// {"magic", "version", "config", "params": {name: {"shape", "data"}}}.
// Doubles are written in shortest round-trip form, so save/load is exact.
nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace wdtcn
