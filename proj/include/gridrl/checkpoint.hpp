#pragma once

#include <filesystem>

#include <json.hpp>

#include "gridrl/optim.hpp"

namespace gridrl::ad {

/// Writes `<stem>.json` (names, shapes, byte offsets, user metadata) and
/// `<stem>.bin` (little-endian float64, row-major per tensor).
void save_checkpoint(const std::filesystem::path& stem, const ParamList& params,
                     const nlohmann::json& meta = nlohmann::json::object());

/// Metadata block of a checkpoint manifest. Throws MissingArtifactError.
nlohmann::json read_checkpoint_meta(const std::filesystem::path& stem);

/// Fills `params` by name; shapes must match. Throws MissingArtifactError or ParseError.
void load_checkpoint(const std::filesystem::path& stem, const ParamList& params);

bool checkpoint_exists(const std::filesystem::path& stem);

}  // namespace gridrl::ad
