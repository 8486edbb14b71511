#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bulwark/defense_graph.hpp"
#include "bulwark/ilp.hpp"
#include "bulwark/manifest.hpp"
#include "bulwark/metrics.hpp"
#include "bulwark/program.hpp"

namespace bulwark {

struct CompositionConfig {
  bool two_phase = true;
  std::vector<Requirement> requirements;  // used by single-phase solves
  PassConfig pass_config;
  double time_limit_s = 10.0;
  int max_iterations = 50;
};

// Simulated finalization state: one slot per manifest, written exactly once.
struct PatchState {
  std::map<Id, std::uint64_t> slots;
  std::vector<Id> finalized;  // write order
};

struct PhaseReport {
  double objective = 0.0;
  double selection_cost = 0.0;  // summed proposal cost of the phase-A pick
  double explicit_instructions = 0.0;
  double explicit_blocks = 0.0;
  double implicit_instructions = 0.0;
  double implicit_blocks = 0.0;
};

struct CompositionResult {
  std::vector<Manifest> proposal;
  std::vector<Id> selected_ids;
  std::vector<Manifest> selected;
  ProgramModel protected_program;
  std::vector<Id> finalization_order;
  MetricsReport metrics;
  int iterations_used = 0;  // total ILP solves across phases
  double objective_value = 0.0;
  std::vector<Cycle> initial_cycles;
  std::optional<PhaseReport> phase_a;
};

// Full pipeline: propose -> graph -> solve (two-phase or single) -> iterate on
// residual sub-cycles -> drop unselected -> apply -> finalize -> verify.
CompositionResult compose(const ProgramModel& program, const CompositionConfig& config);

// Same pipeline starting from an existing proposal (fixtures, baselines).
CompositionResult compose_from_proposal(const ProgramModel& program,
                                        const std::vector<Manifest>& proposal,
                                        const CompositionConfig& config);

// Deps-first order over the selected-manifest dependency DAG (dependencies
// through instruction/variable nodes contracted away), ties by ascending id.
// Throws CycleRemains if the subgraph is cyclic.
std::vector<Id> finalization_order(const DefenseGraph& selected_graph,
                                   const std::vector<Manifest>& selected);

// Writes each manifest's simulated check value (an order-sensitive 64-bit
// fold over its witnessed region) into its slot in `order`, then recomputes
// every value and compares. Throws FalseAlarm(manifest) on mismatch.
PatchState finalize_and_verify(const ProgramModel& protected_program,
                               const std::vector<Manifest>& selected,
                               const std::vector<Id>& order);

// Recomputes all checks with `instruction_id`'s bytes flipped; returns the
// manifests whose check now fails. Pure: nothing is mutated.
std::set<Id> tamper_check(const ProgramModel& protected_program,
                          const std::vector<Manifest>& selected, const PatchState& patches,
                          Id instruction_id);

// The instruction/block sets a manifest's check actually witnesses on the
// protected program (guards included). Also used by metrics and tamper.
std::set<Id> effective_instructions(const Manifest& manifest,
                                    const std::vector<Manifest>& selected,
                                    const ProgramModel& protected_program);
std::set<Id> effective_blocks(const Manifest& manifest, const std::vector<Manifest>& selected,
                              const ProgramModel& protected_program);

// Self-contained bundle (protected.json): program + selection + order.
struct ProtectedBundle {
  ProgramModel program;
  std::vector<Manifest> manifests;
  std::vector<Id> finalization_order;
};

std::string serialize_bundle(const ProtectedBundle& bundle);
ProtectedBundle parse_bundle(const std::string& json_text);
ProtectedBundle load_bundle(const std::string& path);

std::string serialize_report(const CompositionResult& result);

}  // namespace bulwark
