#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "bulwark/manifest.hpp"
#include "bulwark/program.hpp"

namespace bulwark {

struct NodeAttributes {
  double exec_freq_norm = 0.0;
  bool preserve = false;
  bool static_presence_required = false;
};

using Arc = std::pair<NodeRef, NodeRef>;

// (protector manifest, protectee manifest): the protector's check witnesses the
// protectee's guard bytes. Feeds the e_{j,i} variables of the ILP.
struct ProtectionArc {
  Id protector = 0;
  Id protectee = 0;
  auto operator<=>(const ProtectionArc&) const = default;
};

struct DefenseGraph {
  std::set<NodeRef> nodes;
  // (from, to): `from` can only be finalized after `to` is stable.
  std::set<Arc> dependency_arcs;
  // (dependent, required): existence dependencies, drawn dashed.
  std::set<Arc> present_arcs;
  std::map<NodeRef, NodeAttributes> attributes;
  std::vector<ProtectionArc> protection_arcs;  // sorted (protectee, protector)
};

struct Cycle {
  std::vector<Id> manifest_ids;  // ascending; the removable members of one SCC
  bool operator==(const Cycle&) const = default;
};

// Builds nodes/arcs from Order and Present constraints, expands arcs that
// touch a Function node down to its instructions and co-placed manifests, and
// derives hash-variable and protection arcs from placement overlap.
// Throws DanglingReference when a constraint points at a missing node.
DefenseGraph build_graph(const std::vector<Manifest>& manifests, const ProgramModel& program);

// One Cycle per SCC of size >= 2 (or self-loop) of the dependency subgraph,
// projected to manifest ids, sorted by first member.
std::vector<Cycle> find_cycles(const DefenseGraph& graph);

std::string export_dot(const DefenseGraph& graph);

// Node/arc counts and SCC count, as JSON text.
std::string graph_summary(const DefenseGraph& graph);

}  // namespace bulwark
