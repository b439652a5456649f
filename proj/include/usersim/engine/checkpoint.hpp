#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

namespace usersim {

inline constexpr int kCheckpointSchemaVersion = 1;
inline constexpr const char* kCheckpointFormat = "usersim-checkpoint";

/// JSON container: {format, schema_version, checksum, state}. The checksum is
/// FNV-1a over the compact state dump, so truncation and edits are caught.
std::string wrap_checkpoint(const nlohmann::json& state);
/// Throws SimError(LoadFailed) naming what is wrong (parse error, format, version, checksum).
nlohmann::json unwrap_checkpoint(std::string_view bytes);

}  // namespace usersim
