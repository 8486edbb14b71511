#pragma once

// Internal JSON bridges shared between translation units; not installed.

#include <json.hpp>

#include "bulwark/manifest.hpp"
#include "bulwark/program.hpp"

namespace bulwark {

// allow_protected_fields admits guards/mobilized/presence_pinned plus the
// bundle keys (manifests, finalization_order) on the root object.
ProgramModel parse_program_json(const nlohmann::ordered_json& root, bool allow_protected_fields);
nlohmann::ordered_json program_to_json(const ProgramModel& program, bool with_protected_fields);

nlohmann::ordered_json manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::ordered_json& j);

}  // namespace bulwark
