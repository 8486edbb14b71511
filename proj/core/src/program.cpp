#include "bulwark/program.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bulwark/errors.hpp"
#include "bulwark/manifest.hpp"
#include "bulwark/random.hpp"

namespace bulwark {

using ordered_json = nlohmann::ordered_json;

bool BasicBlock::globals_only() const {
  return std::ranges::all_of(instructions, [](const Instruction& i) { return i.is_global(); });
}

namespace {

void reject_unknown_keys(const ordered_json& obj, std::initializer_list<const char*> allowed,
                         const char* where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::ranges::find(allowed, key) == allowed.end()) {
      fail(Errc::ParseError, std::string("unknown key '") + key + "' in " + where);
    }
  }
}

template <typename T>
T require(const ordered_json& obj, const char* key, const char* where) {
  if (!obj.contains(key)) {
    fail(Errc::ParseError, std::string("missing key '") + key + "' in " + where);
  }
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(Errc::ParseError, std::string("bad type for key '") + key + "' in " + where);
  }
}

Instruction parse_instruction(const ordered_json& j) {
  if (!j.is_object()) fail(Errc::ParseError, "instruction must be an object");
  reject_unknown_keys(
      j, {"id", "opcode", "size_bytes", "deterministic", "is_branch_condition", "is_constant_data"},
      "instruction");
  Instruction instr;
  instr.id = require<Id>(j, "id", "instruction");
  instr.opcode = require<std::string>(j, "opcode", "instruction");
  instr.size_bytes = require<std::int64_t>(j, "size_bytes", "instruction");
  instr.deterministic = require<bool>(j, "deterministic", "instruction");
  instr.is_branch_condition = require<bool>(j, "is_branch_condition", "instruction");
  instr.is_constant_data = require<bool>(j, "is_constant_data", "instruction");
  return instr;
}

AppliedGuard parse_guard(const ordered_json& j) {
  if (!j.is_object()) fail(Errc::ParseError, "guard must be an object");
  reject_unknown_keys(
      j, {"id", "manifest_id", "pass_rank", "ordinal", "opcode", "size_bytes", "placeholder",
          "preserved"},
      "guard");
  AppliedGuard g;
  g.id = require<Id>(j, "id", "guard");
  g.manifest_id = require<Id>(j, "manifest_id", "guard");
  g.pass_rank = require<int>(j, "pass_rank", "guard");
  g.ordinal = require<int>(j, "ordinal", "guard");
  g.opcode = require<std::string>(j, "opcode", "guard");
  g.size_bytes = require<std::int64_t>(j, "size_bytes", "guard");
  g.placeholder = require<bool>(j, "placeholder", "guard");
  g.preserved = require<bool>(j, "preserved", "guard");
  return g;
}

ordered_json instruction_to_json(const Instruction& i) {
  return ordered_json{{"id", i.id},
                      {"opcode", i.opcode},
                      {"size_bytes", i.size_bytes},
                      {"deterministic", i.deterministic},
                      {"is_branch_condition", i.is_branch_condition},
                      {"is_constant_data", i.is_constant_data}};
}

ordered_json guard_to_json(const AppliedGuard& g) {
  return ordered_json{{"id", g.id},           {"manifest_id", g.manifest_id},
                      {"pass_rank", g.pass_rank}, {"ordinal", g.ordinal},
                      {"opcode", g.opcode},   {"size_bytes", g.size_bytes},
                      {"placeholder", g.placeholder}, {"preserved", g.preserved}};
}

}  // namespace

ProgramModel parse_program_json(const ordered_json& root, bool allow_protected_fields) {
  if (!root.is_object()) fail(Errc::ParseError, "program root must be an object");
  if (allow_protected_fields) {
    reject_unknown_keys(root, {"name", "functions", "call_edges", "manifests",
                               "finalization_order"},
                        "program");
  } else {
    reject_unknown_keys(root, {"name", "functions", "call_edges"}, "program");
  }
  ProgramModel program;
  program.name = require<std::string>(root, "name", "program");
  if (!root.contains("functions") || !root.at("functions").is_array()) {
    fail(Errc::ParseError, "program requires a 'functions' array");
  }
  for (const auto& jf : root.at("functions")) {
    if (!jf.is_object()) fail(Errc::ParseError, "function must be an object");
    if (allow_protected_fields) {
      reject_unknown_keys(jf, {"id", "name", "sensitive", "entry_block", "blocks", "mobilized",
                               "presence_pinned"},
                          "function");
    } else {
      reject_unknown_keys(jf, {"id", "name", "sensitive", "entry_block", "blocks"}, "function");
    }
    Function fn;
    fn.id = require<Id>(jf, "id", "function");
    fn.name = require<std::string>(jf, "name", "function");
    fn.sensitive = require<bool>(jf, "sensitive", "function");
    fn.entry_block = require<Id>(jf, "entry_block", "function");
    if (jf.contains("mobilized")) fn.mobilized = jf.at("mobilized").get<bool>();
    if (jf.contains("presence_pinned")) fn.presence_pinned = jf.at("presence_pinned").get<bool>();
    if (!jf.contains("blocks") || !jf.at("blocks").is_array()) {
      fail(Errc::ParseError, "function requires a 'blocks' array");
    }
    for (const auto& jb : jf.at("blocks")) {
      if (!jb.is_object()) fail(Errc::ParseError, "block must be an object");
      if (allow_protected_fields) {
        reject_unknown_keys(jb, {"id", "exec_freq", "instructions", "guards"}, "block");
      } else {
        reject_unknown_keys(jb, {"id", "exec_freq", "instructions"}, "block");
      }
      BasicBlock block;
      block.id = require<Id>(jb, "id", "block");
      block.exec_freq = require<double>(jb, "exec_freq", "block");
      if (!jb.contains("instructions") || !jb.at("instructions").is_array()) {
        fail(Errc::ParseError, "block requires an 'instructions' array");
      }
      for (const auto& ji : jb.at("instructions")) block.instructions.push_back(parse_instruction(ji));
      if (jb.contains("guards")) {
        for (const auto& jg : jb.at("guards")) block.guards.push_back(parse_guard(jg));
      }
      fn.blocks.push_back(std::move(block));
    }
    program.functions.push_back(std::move(fn));
  }
  if (!root.contains("call_edges") || !root.at("call_edges").is_array()) {
    fail(Errc::ParseError, "program requires a 'call_edges' array");
  }
  for (const auto& je : root.at("call_edges")) {
    if (!je.is_array() || je.size() != 2) {
      fail(Errc::ParseError, "call edge must be a [instruction, function] pair");
    }
    program.call_edges.emplace_back(je.at(0).get<Id>(), je.at(1).get<Id>());
  }
  validate_program(program);
  return program;
}

ordered_json program_to_json(const ProgramModel& program, bool with_protected_fields) {
  ordered_json root;
  root["name"] = program.name;
  root["functions"] = ordered_json::array();
  for (const auto& fn : program.functions) {
    ordered_json jf;
    jf["id"] = fn.id;
    jf["name"] = fn.name;
    jf["sensitive"] = fn.sensitive;
    jf["entry_block"] = fn.entry_block;
    if (with_protected_fields) {
      jf["mobilized"] = fn.mobilized;
      jf["presence_pinned"] = fn.presence_pinned;
    }
    jf["blocks"] = ordered_json::array();
    for (const auto& block : fn.blocks) {
      ordered_json jb;
      jb["id"] = block.id;
      jb["exec_freq"] = block.exec_freq;
      jb["instructions"] = ordered_json::array();
      for (const auto& instr : block.instructions) {
        jb["instructions"].push_back(instruction_to_json(instr));
      }
      if (with_protected_fields) {
        jb["guards"] = ordered_json::array();
        for (const auto& g : block.guards) jb["guards"].push_back(guard_to_json(g));
      }
      jf["blocks"].push_back(std::move(jb));
    }
    root["functions"].push_back(std::move(jf));
  }
  root["call_edges"] = ordered_json::array();
  for (const auto& [instr, callee] : program.call_edges) {
    root["call_edges"].push_back(ordered_json::array({instr, callee}));
  }
  return root;
}

void validate_program(const ProgramModel& program) {
  std::set<Id> fn_ids, block_ids, instr_ids;
  for (const auto& fn : program.functions) {
    if (!fn_ids.insert(fn.id).second) {
      fail(Errc::ValidationError, "duplicate function id " + std::to_string(fn.id));
    }
    if (fn.blocks.empty()) {
      fail(Errc::ValidationError, "function " + std::to_string(fn.id) + " has no blocks");
    }
    bool entry_found = false;
    for (const auto& block : fn.blocks) {
      if (!block_ids.insert(block.id).second) {
        fail(Errc::ValidationError, "duplicate block id " + std::to_string(block.id));
      }
      if (block.exec_freq < 0) {
        fail(Errc::ValidationError, "negative exec_freq in block " + std::to_string(block.id));
      }
      entry_found = entry_found || block.id == fn.entry_block;
      for (const auto& instr : block.instructions) {
        if (!instr_ids.insert(instr.id).second) {
          fail(Errc::ValidationError, "duplicate instruction id " + std::to_string(instr.id));
        }
        if (instr.size_bytes < 1) {
          fail(Errc::ValidationError,
               "instruction " + std::to_string(instr.id) + " has size_bytes < 1");
        }
        if (instr.id >= kGuardIdBase) {
          fail(Errc::ValidationError, "instruction id " + std::to_string(instr.id) +
                                          " collides with the synthetic guard id range");
        }
      }
    }
    if (!entry_found) {
      fail(Errc::ValidationError, "entry_block " + std::to_string(fn.entry_block) +
                                      " not found in function " + std::to_string(fn.id));
    }
  }
  for (const auto& [instr, callee] : program.call_edges) {
    if (!instr_ids.contains(instr)) {
      fail(Errc::ValidationError, "call edge references missing instruction " +
                                      std::to_string(instr));
    }
    if (!fn_ids.contains(callee)) {
      fail(Errc::ValidationError, "call edge references missing function " +
                                      std::to_string(callee));
    }
  }
}

ProgramModel parse_program(const std::string& json_text) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, std::string("invalid JSON: ") + e.what());
  }
  return parse_program_json(root, false);
}

ProgramModel load_program(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_program(buffer.str());
}

std::string serialize_program(const ProgramModel& program) {
  return program_to_json(program, false).dump(2) + "\n";
}

void save_program(const ProgramModel& program, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::IoError, "cannot write " + path);
  out << serialize_program(program);
}

ProgramIndex::ProgramIndex(const ProgramModel& program) : program_(&program) {
  for (std::size_t fi = 0; fi < program.functions.size(); ++fi) {
    const auto& fn = program.functions[fi];
    fn_pos_[fn.id] = fi;
    for (std::size_t bi = 0; bi < fn.blocks.size(); ++bi) {
      const auto& block = fn.blocks[bi];
      block_loc_[block.id] = {fi, bi};
      max_freq_ = std::max(max_freq_, block.exec_freq);
      for (std::size_t ii = 0; ii < block.instructions.size(); ++ii) {
        const auto& instr = block.instructions[ii];
        instr_loc_[instr.id] = {fi, bi, ii};
        if (instr.is_global()) globals_.push_back(instr.id);
      }
    }
  }
  for (const auto& [instr, callee] : program.call_edges) {
    called_.insert(callee);
    auto loc = instr_loc_.find(instr);
    if (loc != instr_loc_.end()) {
      Id caller = program.functions[std::get<0>(loc->second)].id;
      auto& out = call_graph_[caller];
      if (std::ranges::find(out, callee) == out.end()) out.push_back(callee);
    }
  }
  for (auto& [_, callees] : call_graph_) std::ranges::sort(callees);
}

const Function& ProgramIndex::function(Id id) const {
  auto it = fn_pos_.find(id);
  if (it == fn_pos_.end()) fail(Errc::ValidationError, "unknown function " + std::to_string(id));
  return program_->functions[it->second];
}

const BasicBlock& ProgramIndex::block(Id id) const {
  auto it = block_loc_.find(id);
  if (it == block_loc_.end()) fail(Errc::UnknownBlock, "unknown block " + std::to_string(id));
  return program_->functions[it->second.first].blocks[it->second.second];
}

const Instruction& ProgramIndex::instruction(Id id) const {
  auto it = instr_loc_.find(id);
  if (it == instr_loc_.end()) {
    fail(Errc::UnknownInstruction, "unknown instruction " + std::to_string(id), id);
  }
  const auto& [fi, bi, ii] = it->second;
  return program_->functions[fi].blocks[bi].instructions[ii];
}

Id ProgramIndex::block_of_instruction(Id instr_id) const {
  auto it = instr_loc_.find(instr_id);
  if (it == instr_loc_.end()) {
    fail(Errc::UnknownInstruction, "unknown instruction " + std::to_string(instr_id), instr_id);
  }
  const auto& [fi, bi, ii] = it->second;
  return program_->functions[fi].blocks[bi].id;
}

Id ProgramIndex::function_of_block(Id block_id) const {
  auto it = block_loc_.find(block_id);
  if (it == block_loc_.end()) fail(Errc::UnknownBlock, "unknown block " + std::to_string(block_id));
  return program_->functions[it->second.first].id;
}

std::vector<Id> ProgramIndex::code_instructions(Id function_id) const {
  std::vector<Id> out;
  for (const auto& block : function(function_id).blocks) {
    for (const auto& instr : block.instructions) {
      if (!instr.is_global()) out.push_back(instr.id);
    }
  }
  return out;
}

std::vector<Id> ProgramIndex::code_blocks(Id function_id) const {
  std::vector<Id> out;
  for (const auto& block : function(function_id).blocks) {
    if (!block.instructions.empty() && !block.globals_only()) out.push_back(block.id);
  }
  return out;
}

double normalized_freq(const ProgramIndex& index, Id block_id) {
  const auto& block = index.block(block_id);
  double max = index.max_exec_freq();
  return max <= 0.0 ? 0.0 : block.exec_freq / max;
}

double normalized_freq(const ProgramModel& program, Id block_id) {
  ProgramIndex index(program);
  return normalized_freq(index, block_id);
}

ProgramModel generate_program(std::uint64_t seed, int n_functions, int mean_blocks,
                              double det_ratio) {
  if (n_functions < 1 || mean_blocks < 1) {
    fail(Errc::ValidationError, "generate_program requires n_functions >= 1 and mean_blocks >= 1");
  }
  Rng rng(seed);
  ProgramModel program;
  program.name = "gen_s" + std::to_string(seed) + "_f" + std::to_string(n_functions);

  const std::vector<std::string> opcodes = {"load", "store", "add", "mul",
                                            "xor",  "shl",   "mov", "cmp"};
  Id next_block = 0;
  Id next_instr = 1000;  // globals occupy 100..; keep ranges visually apart

  for (int fi = 0; fi < n_functions; ++fi) {
    Function fn;
    fn.id = fi;
    fn.name = "fn" + std::to_string(fi);
    fn.sensitive = fi > 0 && rng.bernoulli(0.25);

    if (fi == 0) {
      // Hash-variable pool: one shared accumulator plus one per function.
      BasicBlock globals;
      globals.id = next_block++;
      globals.exec_freq = 0.0;
      for (int g = 0; g <= n_functions; ++g) {
        Instruction var;
        var.id = 100 + g;
        var.opcode = kGlobalOpcode;
        var.size_bytes = 8;
        var.is_constant_data = true;
        globals.instructions.push_back(var);
      }
      fn.blocks.push_back(std::move(globals));
    }

    int n_blocks = static_cast<int>(rng.uniform_int(1, 2 * mean_blocks - 1));
    for (int bi = 0; bi < n_blocks; ++bi) {
      BasicBlock block;
      block.id = next_block++;
      block.exec_freq = std::round(rng.uniform_real(0.0, 100.0) * 100.0) / 100.0;
      int n_instr = static_cast<int>(rng.uniform_int(2, 6));
      for (int ii = 0; ii < n_instr; ++ii) {
        Instruction instr;
        instr.id = next_instr++;
        instr.opcode = rng.pick(opcodes);
        instr.size_bytes = rng.uniform_int(1, 4);
        instr.deterministic = rng.bernoulli(det_ratio);
        if (ii == n_instr - 1 && rng.bernoulli(0.3)) {
          instr.opcode = "cmp";
          instr.is_branch_condition = true;
        } else if (rng.bernoulli(0.1)) {
          instr.is_constant_data = true;
        }
        block.instructions.push_back(instr);
      }
      fn.blocks.push_back(std::move(block));
      if (bi == 0) fn.entry_block = fn.blocks.back().id;
    }
    if (fi == 0) fn.entry_block = fn.blocks[1].id;  // entry is the first code block
    program.functions.push_back(std::move(fn));
  }

  // Connect the call graph from function 0, then close the loop so every
  // function (including 0) has a caller and is eligible for SC.
  auto pick_call_site = [&](Id caller_fn) -> Id {
    auto& fn = program.functions[static_cast<std::size_t>(caller_fn)];
    std::vector<std::pair<std::size_t, std::size_t>> slots;
    for (std::size_t bi = 0; bi < fn.blocks.size(); ++bi) {
      const auto& block = fn.blocks[bi];
      for (std::size_t ii = 0; ii < block.instructions.size(); ++ii) {
        const auto& instr = block.instructions[ii];
        if (!instr.is_global() && !instr.is_branch_condition) slots.emplace_back(bi, ii);
      }
    }
    auto [bi, ii] =
        slots[static_cast<std::size_t>(rng.uniform_int(0, static_cast<Id>(slots.size()) - 1))];
    auto& instr = fn.blocks[bi].instructions[ii];
    instr.opcode = "call";
    instr.deterministic = false;
    instr.is_constant_data = false;
    return instr.id;
  };

  if (n_functions > 1) {
    for (int fi = 1; fi < n_functions; ++fi) {
      Id caller = rng.uniform_int(0, fi - 1);
      program.call_edges.emplace_back(pick_call_site(caller), fi);
    }
    Id closer = rng.uniform_int(1, n_functions - 1);
    program.call_edges.emplace_back(pick_call_site(closer), 0);
  }

  validate_program(program);
  return program;
}

}  // namespace bulwark
