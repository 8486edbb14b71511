#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "bulwark/program.hpp"

namespace bulwark {

enum class ManifestKind {
  Sc,
  OhHash,
  OhVerify,
  SrohHash,
  SrohVerify,
  CsivRegister,
  CsivVerify,
  Cm,
  Obf,
};

const char* kind_name(ManifestKind k);
ManifestKind kind_from_name(const std::string& name);  // throws UnknownKind

// Position of a kind's owning pass in the fixed pipeline order
// SC -> OH -> SROH -> CSIV -> CM -> OBF.
int pass_rank(ManifestKind k);

enum class NodeKind { Function, Instruction, Manifest };

struct NodeRef {
  NodeKind kind = NodeKind::Instruction;
  Id id = 0;

  static NodeRef function(Id id) { return {NodeKind::Function, id}; }
  static NodeRef instruction(Id id) { return {NodeKind::Instruction, id}; }
  static NodeRef manifest(Id id) { return {NodeKind::Manifest, id}; }

  auto operator<=>(const NodeRef&) const = default;
};

// `after` may only be finalized once `before` is stable.
struct OrderConstraint {
  NodeRef before;
  NodeRef after;
  bool operator==(const OrderConstraint&) const = default;
};

// The listed (guard) instruction ids must not be altered by later passes.
struct PreserveConstraint {
  std::vector<Id> instruction_ids;
  bool operator==(const PreserveConstraint&) const = default;
};

// `dependent` may only exist if at least min_count of `required` exist.
struct PresentConstraint {
  Id dependent = 0;
  std::vector<NodeRef> required;
  int min_count = 1;
  bool operator==(const PresentConstraint&) const = default;
};

using Constraint = std::variant<OrderConstraint, PreserveConstraint, PresentConstraint>;

// Guard instruction ids live far above program ids: base + manifest*1000 + ordinal.
inline constexpr Id kGuardIdBase = 10'000'000;
inline Id guard_id(Id manifest_id, int ordinal) {
  return kGuardIdBase + manifest_id * 1000 + ordinal;
}

struct Manifest {
  Id id = 0;
  ManifestKind kind = ManifestKind::Sc;
  Id placement_block = 0;
  std::vector<AppliedGuard> guards;
  std::set<Id> protected_instruction_ids;
  std::set<Id> protected_block_ids;
  std::vector<Constraint> constraints;
  double cost = 0.0;

  // Kind-specific payload.
  std::optional<Id> protectee_function;    // SC, CSIV_VERIFY, CM, OBF
  std::optional<Id> hash_variable;         // OH/SROH hash and verify: global instr id
  std::optional<std::uint64_t> token;      // CSIV_REGISTER path token
  std::optional<Id> negates_presence_of;   // CM: mobilized function

  int rank() const { return pass_rank(kind); }
  double explicit_instruction_score() const {
    return static_cast<double>(protected_instruction_ids.size());
  }
  double explicit_block_score() const {
    return static_cast<double>(protected_block_ids.size());
  }

  bool operator==(const Manifest&) const = default;
};

struct GuardSizes {
  int sc = 8;
  int verify = 3;          // OH/SROH verify
  int csiv_register = 1;
  int csiv_verify = 2;
  int obf = 1;
  bool operator==(const GuardSizes&) const = default;
};

enum class Pass { Sc, Oh, Sroh, Csiv, Cm, Obf };

const char* pass_name(Pass p);
Pass pass_from_name(const std::string& name);  // throws UnknownKind

// The fixed pipeline order.
const std::vector<Pass>& pass_order();
Pass pass_of_kind(ManifestKind k);

struct PassConfig {
  int sc_connectivity = 1;
  // CM and OBF are opt-in: they trade protection for conflicts and are only
  // useful when a config asks for them explicitly.
  std::set<Pass> enabled = {Pass::Sc, Pass::Oh, Pass::Sroh, Pass::Csiv};
  std::uint64_t seed = 1;
  std::map<ManifestKind, double> kind_weight;  // falls back to default_kind_weight
  GuardSizes guard_sizes;
};

// Defaults used when PassConfig.kind_weight has no entry for a kind.
double default_kind_weight(ManifestKind k);

// kind_weight * (1 + normalized placement frequency) * max(1, guard count).
double cost_model(ManifestKind kind, double placement_freq_norm, std::size_t guard_count,
                  const PassConfig& config);

}  // namespace bulwark
