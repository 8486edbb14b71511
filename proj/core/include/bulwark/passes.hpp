#pragma once

#include <vector>

#include "bulwark/manifest.hpp"
#include "bulwark/program.hpp"

namespace bulwark {

// Step one of the two-step transformation: emit proposals, never mutate.
// Manifest ids are assigned starting at `first_id`.
// Throws DisabledPass when `pass` is not in config.enabled.
std::vector<Manifest> propose(Pass pass, const ProgramModel& program, const PassConfig& config,
                              Id first_id = 1);

// All enabled passes in pipeline order, ids 1..N.
std::vector<Manifest> propose_all(const ProgramModel& program, const PassConfig& config);

// Step two: returns a copy of `program` with the manifest realized
// (guards inserted / function mobilized / opcodes rewritten).
// Throws StaleManifest when a referenced node no longer exists and
// PresenceViolation when CM hits a presence-pinned function.
ProgramModel apply(const Manifest& manifest, const ProgramModel& program);

// Applies a selection in pipeline order (pass rank, then manifest id).
ProgramModel apply_all(const std::vector<Manifest>& manifests, const ProgramModel& program);

// Serialization of proposal sets (manifests.json).
std::string serialize_manifests(const std::vector<Manifest>& manifests);
std::vector<Manifest> parse_manifests(const std::string& json_text);

}  // namespace bulwark
