#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bulwark/defense_graph.hpp"
#include "bulwark/manifest.hpp"

namespace bulwark {

enum class VarRole { ManifestSelect, ArcActive, GuardProtected };

struct BinaryVar {
  std::string name;
  VarRole role = VarRole::ManifestSelect;
  Id manifest = 0;   // ManifestSelect/GuardProtected: subject manifest
  Id protector = 0;  // ArcActive only
};

// lo <= sum coef*var <= hi (use +-infinity() for one-sided rows).
struct LinearConstraint {
  std::string name;
  std::vector<std::pair<int, double>> terms;  // (var index, coefficient)
  double lo = 0.0;
  double hi = 0.0;
};

struct IlpModel {
  std::vector<BinaryVar> vars;
  std::vector<LinearConstraint> constraints;
  std::vector<std::pair<int, double>> objective;
  bool maximize = false;

  int var_index(const std::string& name) const;  // -1 if absent
};

enum class SolveStatus { Optimal, Infeasible, TimedOut };

const char* status_name(SolveStatus s);

struct Solution {
  std::vector<int> assignment;  // 0/1 per var, aligned with model.vars
  double objective_value = 0.0;
  SolveStatus status = SolveStatus::Infeasible;
  std::int64_t nodes_explored = 0;

  int value(const IlpModel& model, const std::string& var_name) const;
};

enum class MetricKind {
  ExplicitInstructions,
  ExplicitBlocks,
  ImplicitInstructions,
  ImplicitBlocks,
  ManifestCount,
};

MetricKind metric_from_name(const std::string& name);  // throws UnknownKind
const char* metric_name(MetricKind m);

struct Requirement {
  MetricKind metric = MetricKind::ExplicitInstructions;
  bool at_least = true;  // false: <=
  double value = 0.0;
};

struct IlpBuildOptions {
  // Links each flag to its arcs with the single aggregated row
  // 0 <= |E_i|*f_i - sum(e) <= 1 instead of the exact OR linearization.
  // Infeasible whenever some but not all arcs are active; retained only so
  // tests can demonstrate that failure.
  bool aggregated_flag_row = false;
  // Replace the cost objective with phase-A coverage maximization:
  // maximize sum (1 + explicit score)*m_i + sum implicit score * f_i.
  bool maximize_coverage = false;
};

// Variables: m<i> per manifest, e_<j>_<i> per protection arc (j protects i),
// f<i> per manifest with incoming protection arcs. Constraints: cycle rows,
// present rows, SC/CM exclusions, arc linearization, guard-protected flag
// linking, one row per requirement. Objective: minimize sum cost(i)*m_i
// (unless maximize_coverage).
IlpModel build_model(const DefenseGraph& graph, const std::vector<Manifest>& manifests,
                     const std::vector<Cycle>& cycles,
                     const std::vector<Requirement>& requirements,
                     const std::map<Id, double>& costs, const IlpBuildOptions& options = {});

// Exact deterministic branch-and-bound (0-branch first, bound from fixed part
// plus negative-coefficient slack, feasibility propagation at every node).
Solution solve(const IlpModel& model, double time_limit_seconds = 10.0);

// CPLEX-LP text; double-bounded rows are split into _lo/_hi pairs.
std::string export_lp(const IlpModel& model);
IlpModel parse_lp(const std::string& text);

// Structural equality modulo row splitting/ordering.
bool models_equivalent(const IlpModel& a, const IlpModel& b);

std::string serialize_solution(const IlpModel& model, const Solution& solution);

// Validates an external {"assignment": {...}} JSON against the model.
// Returns the violated constraint names (empty = feasible).
std::vector<std::string> validate_assignment(const IlpModel& model, const std::string& json_text);

}  // namespace bulwark
