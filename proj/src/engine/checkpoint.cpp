#include "usersim/engine/checkpoint.hpp"

#include <cstdio>

#include "usersim/core/error.hpp"
#include "usersim/core/rng.hpp"

namespace usersim {

using nlohmann::json;

namespace {

std::string checksum_of(const json& state) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_text(state.dump())));
    return buf;
}

}  // namespace

std::string wrap_checkpoint(const json& state) {
    json c = {{"format", kCheckpointFormat},
              {"schema_version", kCheckpointSchemaVersion},
              {"checksum", checksum_of(state)},
              {"state", state}};
    return c.dump();
}

json unwrap_checkpoint(std::string_view bytes) {
    json c;
    try {
        c = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw SimError(ErrorCode::LoadFailed, std::string("checkpoint is not valid JSON (truncated?): ") + e.what());
    }
    if (!c.is_object() || c.value("format", std::string()) != kCheckpointFormat)
        throw SimError(ErrorCode::LoadFailed, "not a usersim checkpoint");
    if (!c.contains("schema_version") || !c["schema_version"].is_number_integer())
        throw SimError(ErrorCode::LoadFailed, "checkpoint has no schema_version");
    const int v = c["schema_version"].get<int>();
    if (v != kCheckpointSchemaVersion)
        throw SimError(ErrorCode::LoadFailed, "checkpoint schema version " + std::to_string(v) +
                                                  " is not supported (this build reads version " +
                                                  std::to_string(kCheckpointSchemaVersion) + ")");
    if (!c.contains("state") || !c["state"].is_object()) throw SimError(ErrorCode::LoadFailed, "checkpoint has no state");
    const auto expected = c.value("checksum", std::string());
    const auto actual = checksum_of(c["state"]);
    if (expected != actual)
        throw SimError(ErrorCode::LoadFailed, "checkpoint checksum mismatch (expected " + expected + ", got " + actual + ")");
    return std::move(c["state"]);
}

}  // namespace usersim
