#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace bulwark {

using Id = std::int64_t;

// Opcode marking a data slot (hash variables etc.) modeled as an instruction.
// Globals never count as code: passes skip them for coverage, placement and runs.
inline constexpr const char* kGlobalOpcode = "global";

struct Instruction {
  Id id = 0;
  std::string opcode;
  std::int64_t size_bytes = 1;
  bool deterministic = false;
  bool is_branch_condition = false;
  bool is_constant_data = false;

  bool is_global() const { return opcode == kGlobalOpcode; }
  bool operator==(const Instruction&) const = default;
};

// Synthetic instruction inserted by applying a manifest. Kept separate from
// Instruction so the original program ids stay untouched.
struct AppliedGuard {
  Id id = 0;  // globally unique synthetic id
  Id manifest_id = 0;
  int pass_rank = 0;
  int ordinal = 0;
  std::string opcode;
  std::int64_t size_bytes = 1;
  bool placeholder = false;  // patched during finalization
  bool preserved = false;    // covered by the owning manifest's Preserve marks

  bool operator==(const AppliedGuard&) const = default;
};

struct BasicBlock {
  Id id = 0;
  double exec_freq = 0.0;
  std::vector<Instruction> instructions;
  std::vector<AppliedGuard> guards;  // empty until manifests are applied

  bool globals_only() const;
  bool operator==(const BasicBlock&) const = default;
};

struct Function {
  Id id = 0;
  std::string name;
  bool sensitive = false;
  Id entry_block = 0;
  std::vector<BasicBlock> blocks;
  bool mobilized = false;        // set by applying a CM manifest
  bool presence_pinned = false;  // set by applying an SC manifest on this function

  bool operator==(const Function&) const = default;
};

struct ProgramModel {
  std::string name;
  std::vector<Function> functions;
  // (call-site instruction id, callee function id)
  std::vector<std::pair<Id, Id>> call_edges;

  bool operator==(const ProgramModel&) const = default;
};

// Lookup tables over a validated program. Rebuilt on demand; the program
// itself stays a plain value type.
class ProgramIndex {
 public:
  explicit ProgramIndex(const ProgramModel& program);

  const ProgramModel& program() const { return *program_; }
  const Function& function(Id id) const;
  const BasicBlock& block(Id id) const;
  const Instruction& instruction(Id id) const;
  bool has_block(Id id) const { return block_loc_.count(id) != 0; }
  bool has_instruction(Id id) const { return instr_loc_.count(id) != 0; }
  bool has_function(Id id) const { return fn_pos_.count(id) != 0; }

  Id block_of_instruction(Id instr_id) const;
  Id function_of_block(Id block_id) const;
  double max_exec_freq() const { return max_freq_; }

  // All global-opcode instructions in program order.
  const std::vector<Id>& globals() const { return globals_; }
  // Non-global instructions of a function, in block/program order.
  std::vector<Id> code_instructions(Id function_id) const;
  // Blocks of a function that contain at least one non-global instruction.
  std::vector<Id> code_blocks(Id function_id) const;
  // Function ids with at least one incoming call edge.
  const std::set<Id>& called_functions() const { return called_; }
  // caller function -> sorted callee function ids
  const std::map<Id, std::vector<Id>>& call_graph() const { return call_graph_; }

 private:
  const ProgramModel* program_;
  std::map<Id, std::size_t> fn_pos_;
  std::map<Id, std::pair<std::size_t, std::size_t>> block_loc_;           // block -> (fn, blk)
  std::map<Id, std::tuple<std::size_t, std::size_t, std::size_t>> instr_loc_;
  std::vector<Id> globals_;
  std::set<Id> called_;
  std::map<Id, std::vector<Id>> call_graph_;
  double max_freq_ = 0.0;
};

// Throws ValidationError on duplicate/dangling ids, bad entry blocks, etc.
void validate_program(const ProgramModel& program);

ProgramModel load_program(const std::string& path);
ProgramModel parse_program(const std::string& json_text);
std::string serialize_program(const ProgramModel& program);
void save_program(const ProgramModel& program, const std::string& path);

ProgramModel generate_program(std::uint64_t seed, int n_functions, int mean_blocks,
                              double det_ratio);

// exec_freq(block) / max exec_freq over the program; 0 when all frequencies are 0.
double normalized_freq(const ProgramModel& program, Id block_id);
double normalized_freq(const ProgramIndex& index, Id block_id);

}  // namespace bulwark
