#pragma once

#include <map>
#include <string>
#include <vector>

#include "bulwark/manifest.hpp"
#include "bulwark/program.hpp"

namespace bulwark {

struct CompositionResult;
struct CompositionConfig;

struct MetricsReport {
  double explicit_instr_sum = 0.0;
  double explicit_instr_union = 0.0;
  double explicit_block_sum = 0.0;
  double explicit_block_union = 0.0;
  double implicit_instr = 0.0;
  double implicit_block = 0.0;
  double estimated_cost = 0.0;
  // k -> number of instructions witnessed by exactly k selected checks.
  std::map<int, int> connectivity_histogram;
  int manifest_count = 0;
};

// Guard-inclusive sums/unions over the protected program; implicit values are
// gated on whether a manifest's guards are witnessed by another selected one.
MetricsReport compute_metrics(const CompositionResult& result, const ProgramModel& program);

// Greedy reference composition: accept everything, break each cycle by
// dropping its smallest-coverage member, then drop manifests whose presence
// requirements no longer hold; same finalization path as compose.
CompositionResult run_baseline(const ProgramModel& program, const CompositionConfig& config);

struct ComparisonRecord {
  std::string program;
  int manifests_base = 0;
  int manifests_opt = 0;
  double cost_base = 0.0;
  double cost_opt = 0.0;
  double decrease_pct = 0.0;
  double explicit_instr = 0.0;  // optimized selection, proposal-score sum
  double implicit_instr = 0.0;
};

// Baseline first, then cost-minimizing composition under the baseline's
// achieved coverage as >= requirements.
ComparisonRecord compare(const ProgramModel& program, const CompositionConfig& config);

std::string comparison_csv(const std::vector<ComparisonRecord>& records);

}  // namespace bulwark
