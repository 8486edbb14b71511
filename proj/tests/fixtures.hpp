#pragma once

// Shared fixtures: the mileage-counter regression program plus small
// hand-built programs/manifests used across the unit and acceptance suites.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "bulwark/composer.hpp"
#include "bulwark/defense_graph.hpp"
#include "bulwark/ilp.hpp"
#include "bulwark/manifest.hpp"
#include "bulwark/passes.hpp"
#include "bulwark/program.hpp"

namespace fixtures {

inline std::string data_path(const std::string& name) {
  return std::string(TEST_DATA_DIR) + "/" + name;
}

inline bulwark::ProgramModel mileage() {
  return bulwark::load_program(data_path("mileage.json"));
}

// Expected composition facts for the mileage program under default config.
// Derived by hand from the cost model and fold rules; the suite treats these
// as ground truth, not as recorded output.
struct MileageOracle {
  static constexpr int proposed = 12;
  static constexpr int selected = 11;
  static constexpr double objective = 119.6;
  static constexpr int dropped_id = 6;  // the verify half of the {1,6} cycle
};

inline std::vector<double> mileage_costs() {
  return {80.4, 4.02, 2.01, 2.01, 9.045, 9.09, 4.0, 2.02, 9.045, 2.0, 1.01, 4.04};
}

inline std::vector<bulwark::Id> mileage_order() {
  return {2, 3, 4, 7, 8, 9, 10, 11, 12, 1, 5};
}

// One function, one block; instruction ids start at `first_id`.
inline bulwark::Function flat_function(bulwark::Id fn_id, bulwark::Id block_id,
                                       bulwark::Id first_id, int n_instr,
                                       double freq = 1.0) {
  bulwark::Function fn;
  fn.id = fn_id;
  fn.name = "f" + std::to_string(fn_id);
  fn.entry_block = block_id;
  bulwark::BasicBlock block;
  block.id = block_id;
  block.exec_freq = freq;
  for (int k = 0; k < n_instr; ++k) {
    bulwark::Instruction instr;
    instr.id = first_id + k;
    instr.opcode = "add";
    instr.size_bytes = 4;
    block.instructions.push_back(instr);
  }
  fn.blocks.push_back(std::move(block));
  return fn;
}

inline bulwark::Manifest sc_manifest(bulwark::Id id, bulwark::Id placement,
                                     bulwark::Id protectee, double cost) {
  bulwark::Manifest m;
  m.id = id;
  m.kind = bulwark::ManifestKind::Sc;
  m.placement_block = placement;
  m.protectee_function = protectee;
  m.cost = cost;
  bulwark::AppliedGuard g;
  g.id = bulwark::guard_id(id, 0);
  g.manifest_id = id;
  g.pass_rank = m.rank();
  g.opcode = "sc.hash";
  g.size_bytes = 4;
  m.guards.push_back(g);
  return m;
}

// `from` can only be finalized after `to`: an arc from -> to.
inline void add_dependency(bulwark::Manifest& from, bulwark::Id to) {
  from.constraints.push_back(bulwark::OrderConstraint{
      bulwark::NodeRef::manifest(to), bulwark::NodeRef::manifest(from.id)});
}

// Nested-cycle proposal: SCC {1,2,3,4} built from two 2-cycles ({1,2} and
// {3,4}) bridged by 2->3 and 4->1, plus a conflict-free substitute 5. The
// whole-SCC constraint lets the first solve keep the {3,4} sub-cycle, so a
// second solve is forced; the coverage floor (>= 30) is then only reachable
// by paying for the substitute. Hand-verified optima: 15 cyclic, then 19.
struct NestedCycleFixture {
  bulwark::ProgramModel program;
  std::vector<bulwark::Manifest> proposal;
  bulwark::CompositionConfig config;
};

// Four manifests, three of them guarding the first one's bytes. Small enough
// to pin selection variables by hand and inspect the arc/flag linking rows.
struct FlagFixture {
  bulwark::DefenseGraph graph;
  std::vector<bulwark::Manifest> manifests;
  std::map<bulwark::Id, double> costs;
};

inline FlagFixture flag_fixture() {
  FlagFixture fx;
  for (bulwark::Id id = 1; id <= 4; ++id) {
    bulwark::Manifest m;
    m.id = id;
    m.kind = bulwark::ManifestKind::OhHash;
    m.cost = 1.0;
    fx.manifests.push_back(m);
    fx.graph.nodes.insert(bulwark::NodeRef::manifest(id));
    fx.costs[id] = 1.0;
  }
  for (bulwark::Id j : {2, 3, 4}) fx.graph.protection_arcs.push_back({j, 1});
  return fx;
}

inline void pin(bulwark::IlpModel& model, const std::string& var, int value) {
  int idx = model.var_index(var);
  if (idx < 0) throw std::logic_error("pin: missing variable " + var);
  model.constraints.push_back(
      {"pin_" + var, {{idx, 1.0}}, double(value), double(value)});
}

inline NestedCycleFixture nested_cycle_fixture() {
  NestedCycleFixture fx;
  fx.program.name = "nested";
  fx.program.functions.push_back(flat_function(0, 0, 1, 2));
  fx.program.functions.push_back(flat_function(1, 1, 100, 10));
  fx.program.functions.push_back(flat_function(2, 2, 200, 10));
  fx.program.functions.push_back(flat_function(3, 3, 300, 10));
  fx.program.functions.push_back(flat_function(4, 4, 400, 10));
  bulwark::validate_program(fx.program);

  auto m1 = sc_manifest(1, 0, 1, 1.0);  // no coverage: the cheap drop
  auto m2 = sc_manifest(2, 0, 1, 5.0);
  auto m3 = sc_manifest(3, 0, 2, 5.0);
  auto m4 = sc_manifest(4, 0, 3, 5.0);
  auto m5 = sc_manifest(5, 0, 4, 9.0);
  for (bulwark::Id i = 100; i < 110; ++i) m2.protected_instruction_ids.insert(i);
  for (bulwark::Id i = 200; i < 210; ++i) m3.protected_instruction_ids.insert(i);
  for (bulwark::Id i = 300; i < 310; ++i) m4.protected_instruction_ids.insert(i);
  for (bulwark::Id i = 400; i < 410; ++i) m5.protected_instruction_ids.insert(i);

  add_dependency(m1, 2);  // 1 -> 2
  add_dependency(m2, 1);  // 2 -> 1
  add_dependency(m2, 3);  // 2 -> 3 (bridge)
  add_dependency(m3, 4);  // 3 -> 4
  add_dependency(m4, 3);  // 4 -> 3
  add_dependency(m4, 1);  // 4 -> 1 (bridge back)

  fx.proposal = {m1, m2, m3, m4, m5};
  fx.config.two_phase = false;
  fx.config.requirements.push_back(
      {bulwark::MetricKind::ExplicitInstructions, true, 30.0});
  return fx;
}

}  // namespace fixtures
