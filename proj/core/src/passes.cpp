#include "bulwark/passes.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "bulwark/errors.hpp"
#include "bulwark/random.hpp"
#include "json_detail.hpp"

namespace bulwark {

using ordered_json = nlohmann::ordered_json;

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::ParseError: return "PARSE";
    case Errc::ValidationError: return "VALIDATION";
    case Errc::UnknownBlock: return "UNKNOWN_BLOCK";
    case Errc::UnknownInstruction: return "UNKNOWN_INSTRUCTION";
    case Errc::UnknownKind: return "UNKNOWN_KIND";
    case Errc::DisabledPass: return "DISABLED_PASS";
    case Errc::StaleManifest: return "STALE_MANIFEST";
    case Errc::PresenceViolation: return "PRESENCE_VIOLATION";
    case Errc::DanglingReference: return "DANGLING_REFERENCE";
    case Errc::InconsistentInput: return "INCONSISTENT_INPUT";
    case Errc::InfeasibleRequirements: return "INFEASIBLE";
    case Errc::IterationLimitExceeded: return "ITERATION_LIMIT";
    case Errc::FinalizationInconsistent: return "FINALIZATION_INCONSISTENT";
    case Errc::FalseAlarm: return "FALSE_ALARM";
    case Errc::CycleRemains: return "CYCLE_REMAINS";
    case Errc::IoError: return "IO";
    case Errc::UsageError: return "USAGE";
  }
  return "UNKNOWN";
}

const char* kind_name(ManifestKind k) {
  switch (k) {
    case ManifestKind::Sc: return "SC";
    case ManifestKind::OhHash: return "OH_HASH";
    case ManifestKind::OhVerify: return "OH_VERIFY";
    case ManifestKind::SrohHash: return "SROH_HASH";
    case ManifestKind::SrohVerify: return "SROH_VERIFY";
    case ManifestKind::CsivRegister: return "CSIV_REGISTER";
    case ManifestKind::CsivVerify: return "CSIV_VERIFY";
    case ManifestKind::Cm: return "CM";
    case ManifestKind::Obf: return "OBF";
  }
  return "?";
}

ManifestKind kind_from_name(const std::string& name) {
  static const std::map<std::string, ManifestKind> table = {
      {"SC", ManifestKind::Sc},
      {"OH_HASH", ManifestKind::OhHash},
      {"OH_VERIFY", ManifestKind::OhVerify},
      {"SROH_HASH", ManifestKind::SrohHash},
      {"SROH_VERIFY", ManifestKind::SrohVerify},
      {"CSIV_REGISTER", ManifestKind::CsivRegister},
      {"CSIV_VERIFY", ManifestKind::CsivVerify},
      {"CM", ManifestKind::Cm},
      {"OBF", ManifestKind::Obf}};
  auto it = table.find(name);
  if (it == table.end()) fail(Errc::UnknownKind, "unknown manifest kind '" + name + "'");
  return it->second;
}

const char* pass_name(Pass p) {
  switch (p) {
    case Pass::Sc: return "SC";
    case Pass::Oh: return "OH";
    case Pass::Sroh: return "SROH";
    case Pass::Csiv: return "CSIV";
    case Pass::Cm: return "CM";
    case Pass::Obf: return "OBF";
  }
  return "?";
}

Pass pass_from_name(const std::string& name) {
  static const std::map<std::string, Pass> table = {{"SC", Pass::Sc},     {"OH", Pass::Oh},
                                                    {"SROH", Pass::Sroh}, {"CSIV", Pass::Csiv},
                                                    {"CM", Pass::Cm},     {"OBF", Pass::Obf}};
  auto it = table.find(name);
  if (it == table.end()) fail(Errc::UnknownKind, "unknown pass '" + name + "'");
  return it->second;
}

const std::vector<Pass>& pass_order() {
  static const std::vector<Pass> order = {Pass::Sc, Pass::Oh,  Pass::Sroh,
                                          Pass::Csiv, Pass::Cm, Pass::Obf};
  return order;
}

Pass pass_of_kind(ManifestKind k) {
  switch (k) {
    case ManifestKind::Sc: return Pass::Sc;
    case ManifestKind::OhHash:
    case ManifestKind::OhVerify: return Pass::Oh;
    case ManifestKind::SrohHash:
    case ManifestKind::SrohVerify: return Pass::Sroh;
    case ManifestKind::CsivRegister:
    case ManifestKind::CsivVerify: return Pass::Csiv;
    case ManifestKind::Cm: return Pass::Cm;
    case ManifestKind::Obf: return Pass::Obf;
  }
  return Pass::Sc;
}

int pass_rank(ManifestKind k) { return static_cast<int>(pass_of_kind(k)); }

double default_kind_weight(ManifestKind k) {
  switch (k) {
    case ManifestKind::Sc: return 10.0;
    case ManifestKind::OhHash: return 2.0;
    case ManifestKind::OhVerify: return 3.0;
    case ManifestKind::SrohHash: return 2.0;
    case ManifestKind::SrohVerify: return 3.0;
    case ManifestKind::CsivRegister: return 1.0;
    case ManifestKind::CsivVerify: return 2.0;
    case ManifestKind::Cm: return 40.0;
    case ManifestKind::Obf: return 5.0;
  }
  return 1.0;
}

double cost_model(ManifestKind kind, double placement_freq_norm, std::size_t guard_count,
                  const PassConfig& config) {
  auto it = config.kind_weight.find(kind);
  double weight = it != config.kind_weight.end() ? it->second : default_kind_weight(kind);
  double guards = std::max<std::size_t>(1, guard_count);
  return weight * (1.0 + placement_freq_norm) * static_cast<double>(guards);
}

namespace {

// Streams are decorrelated per pass so each propose() is independently
// deterministic for a fixed config seed.
Rng pass_rng(const PassConfig& config, Pass pass) {
  return Rng(config.seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(pass) + 1));
}

AppliedGuard make_guard(Id manifest_id, int rank, int ordinal, std::string opcode,
                        std::int64_t size_bytes, bool placeholder) {
  AppliedGuard g;
  g.id = guard_id(manifest_id, ordinal);
  g.manifest_id = manifest_id;
  g.pass_rank = rank;
  g.ordinal = ordinal;
  g.opcode = std::move(opcode);
  g.size_bytes = size_bytes;
  g.placeholder = placeholder;
  g.preserved = placeholder;  // every placeholder is Preserve-marked by its manifest
  return g;
}

// n guards ending in a compare plus an expected-value placeholder.
std::vector<AppliedGuard> check_guards(Id manifest_id, int rank, int n, const std::string& prefix) {
  std::vector<AppliedGuard> out;
  for (int i = 0; i < n; ++i) {
    if (i == n - 1) {
      out.push_back(make_guard(manifest_id, rank, i, prefix + ".expected", 8, true));
    } else if (i == n - 2) {
      out.push_back(make_guard(manifest_id, rank, i, prefix + ".cmp", 1, false));
    } else {
      out.push_back(make_guard(manifest_id, rank, i, prefix + ".hash", 1, false));
    }
  }
  return out;
}

Id placeholder_id(const Manifest& m) {
  for (const auto& g : m.guards) {
    if (g.placeholder) return g.id;
  }
  return -1;
}

void add_preserve_for_placeholder(Manifest& m) {
  Id pid = placeholder_id(m);
  if (pid >= 0) m.constraints.push_back(PreserveConstraint{{pid}});
}

// Lowest normalized frequency, ties to the lowest id. -1 when the function
// has no code block to host a guard.
Id coldest_code_block(const ProgramIndex& index, Id function_id) {
  Id best = -1;
  double best_freq = std::numeric_limits<double>::infinity();
  for (Id b : index.code_blocks(function_id)) {
    double f = normalized_freq(index, b);
    if (f < best_freq) {
      best_freq = f;
      best = b;
    }
  }
  return best;
}

void finish(Manifest& m, const ProgramIndex& index, const PassConfig& config) {
  double freq = m.placement_block >= 0 && index.has_block(m.placement_block)
                    ? normalized_freq(index, m.placement_block)
                    : 0.0;
  m.cost = cost_model(m.kind, freq, m.guards.size(), config);
}

std::vector<Manifest> propose_sc(const ProgramModel& program, const PassConfig& config,
                                 Id first_id) {
  ProgramIndex index(program);
  Rng rng = pass_rng(config, Pass::Sc);
  std::vector<Manifest> out;
  Id next = first_id;
  for (const auto& fn : program.functions) {
    if (!index.called_functions().contains(fn.id)) continue;
    std::vector<Id> others;
    for (const auto& c : program.functions) {
      if (c.id != fn.id) others.push_back(c.id);
    }
    if (others.empty()) continue;
    int k = std::min<int>(config.sc_connectivity, static_cast<int>(others.size()));
    for (int pick = 0; pick < k; ++pick) {
      // partial Fisher-Yates: draw without replacement
      auto idx = static_cast<std::size_t>(
          rng.uniform_int(pick, static_cast<std::int64_t>(others.size()) - 1));
      std::swap(others[static_cast<std::size_t>(pick)], others[idx]);
      Id checker = others[static_cast<std::size_t>(pick)];
      Id place = coldest_code_block(index, checker);
      if (place < 0) continue;

      Manifest m;
      m.id = next++;
      m.kind = ManifestKind::Sc;
      m.placement_block = place;
      m.protectee_function = fn.id;
      m.guards = check_guards(m.id, m.rank(), config.guard_sizes.sc, "sc");
      auto code = index.code_instructions(fn.id);
      m.protected_instruction_ids.insert(code.begin(), code.end());
      auto blocks = index.code_blocks(fn.id);
      m.protected_block_ids.insert(blocks.begin(), blocks.end());
      m.constraints.push_back(
          OrderConstraint{NodeRef::function(fn.id), NodeRef::manifest(m.id)});
      m.constraints.push_back(PresentConstraint{m.id, {NodeRef::function(fn.id)}, 1});
      add_preserve_for_placeholder(m);
      finish(m, index, config);
      out.push_back(std::move(m));
    }
  }
  return out;
}

// Maximal runs of consecutive instructions satisfying `pred` within one block.
template <typename Pred>
std::vector<std::vector<Id>> runs_in_block(const BasicBlock& block, Pred pred) {
  std::vector<std::vector<Id>> runs;
  std::vector<Id> current;
  for (const auto& instr : block.instructions) {
    if (!instr.is_global() && pred(instr)) {
      current.push_back(instr.id);
    } else if (!current.empty()) {
      runs.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) runs.push_back(std::move(current));
  return runs;
}

Manifest make_hash_manifest(Id id, ManifestKind kind, Id variable, const std::vector<Id>& run,
                            Id block_id, const ProgramIndex& index, const PassConfig& config) {
  Manifest m;
  m.id = id;
  m.kind = kind;
  m.placement_block = block_id;
  m.hash_variable = variable;
  const char* prefix = kind == ManifestKind::OhHash ? "oh.hash" : "sroh.hash";
  for (std::size_t i = 0; i < run.size(); ++i) {
    m.guards.push_back(make_guard(id, m.rank(), static_cast<int>(i), prefix, 1, false));
  }
  m.protected_instruction_ids.insert(run.begin(), run.end());
  m.protected_block_ids.insert(block_id);
  finish(m, index, config);
  return m;
}

Manifest make_verify_manifest(Id id, ManifestKind kind, Id variable, Id place,
                              const std::vector<Id>& hashed_instructions,
                              const std::vector<Id>& hash_manifests, const ProgramIndex& index,
                              const PassConfig& config) {
  Manifest m;
  m.id = id;
  m.kind = kind;
  m.placement_block = place;
  m.hash_variable = variable;
  const char* prefix = kind == ManifestKind::OhVerify ? "oh" : "sroh";
  int n = config.guard_sizes.verify;
  for (int i = 0; i < n; ++i) {
    if (i == n - 1) {
      m.guards.push_back(make_guard(id, m.rank(), i, std::string(prefix) + ".expected", 8, true));
    } else if (i == n - 2) {
      m.guards.push_back(make_guard(id, m.rank(), i, std::string(prefix) + ".cmp", 1, false));
    } else {
      m.guards.push_back(make_guard(id, m.rank(), i, std::string(prefix) + ".read", 1, false));
    }
  }
  std::vector<NodeRef> required;
  for (Id h : hash_manifests) required.push_back(NodeRef::manifest(h));
  m.constraints.push_back(PresentConstraint{m.id, required, 1});
  add_preserve_for_placeholder(m);
  for (Id instr : hashed_instructions) {
    m.constraints.push_back(OrderConstraint{NodeRef::instruction(instr), NodeRef::manifest(m.id)});
  }
  m.constraints.push_back(
      OrderConstraint{NodeRef::instruction(variable), NodeRef::manifest(m.id)});
  finish(m, index, config);
  return m;
}

void add_hash_presents(std::vector<Manifest>& all, const std::vector<Id>& hash_manifests,
                       const std::vector<Id>& verify_manifests) {
  // Hashes without a surviving verify are dead weight; require one and let the
  // solver treat the pair as an existence dependency in both directions.
  std::vector<NodeRef> verify_refs;
  for (Id v : verify_manifests) verify_refs.push_back(NodeRef::manifest(v));
  for (auto& m : all) {
    if (std::ranges::find(hash_manifests, m.id) != hash_manifests.end()) {
      m.constraints.push_back(PresentConstraint{m.id, verify_refs, 1});
    }
  }
}

std::vector<Manifest> propose_oh(const ProgramModel& program, const PassConfig& config,
                                 Id first_id) {
  ProgramIndex index(program);
  std::vector<Manifest> out;
  if (index.globals().empty()) return out;
  Id variable = index.globals().front();
  Id next = first_id;

  std::vector<Id> hash_ids;
  std::vector<Id> hashed_instrs;
  for (const auto& fn : program.functions) {
    for (const auto& block : fn.blocks) {
      for (const auto& run :
           runs_in_block(block, [](const Instruction& i) { return i.deterministic; })) {
        out.push_back(
            make_hash_manifest(next, ManifestKind::OhHash, variable, run, block.id, index, config));
        hash_ids.push_back(next++);
        hashed_instrs.insert(hashed_instrs.end(), run.begin(), run.end());
      }
    }
  }
  if (hash_ids.empty()) return {};
  std::ranges::sort(hashed_instrs);

  std::vector<Id> verify_ids;
  for (const auto& fn : program.functions) {
    Id place = coldest_code_block(index, fn.id);
    if (place < 0) continue;
    out.push_back(make_verify_manifest(next, ManifestKind::OhVerify, variable, place,
                                       hashed_instrs, hash_ids, index, config));
    verify_ids.push_back(next++);
  }
  add_hash_presents(out, hash_ids, verify_ids);
  return out;
}

std::vector<Manifest> propose_sroh(const ProgramModel& program, const PassConfig& config,
                                   Id first_id) {
  ProgramIndex index(program);
  std::vector<Manifest> out;
  const auto& globals = index.globals();
  std::size_t pool = 1;  // globals[0] belongs to OH
  Id next = first_id;

  for (const auto& fn : program.functions) {
    // branch conditions and constant data inside blocks that carry
    // nondeterministic code
    std::vector<std::pair<Id, std::vector<Id>>> block_runs;
    for (const auto& block : fn.blocks) {
      bool nondet_block = std::ranges::any_of(block.instructions, [](const Instruction& i) {
        return !i.is_global() && !i.deterministic;
      });
      if (!nondet_block) continue;
      for (const auto& run : runs_in_block(block, [](const Instruction& i) {
             return i.is_branch_condition || i.is_constant_data;
           })) {
        block_runs.emplace_back(block.id, run);
      }
    }
    if (block_runs.empty()) continue;
    if (pool >= globals.size()) continue;  // no local hash variable left
    Id variable = globals[pool++];
    Id place = coldest_code_block(index, fn.id);
    if (place < 0) continue;

    std::vector<Id> hash_ids;
    std::vector<Id> hashed_instrs;
    for (const auto& [block_id, run] : block_runs) {
      out.push_back(
          make_hash_manifest(next, ManifestKind::SrohHash, variable, run, block_id, index, config));
      hash_ids.push_back(next++);
      hashed_instrs.insert(hashed_instrs.end(), run.begin(), run.end());
    }
    std::ranges::sort(hashed_instrs);
    out.push_back(make_verify_manifest(next, ManifestKind::SrohVerify, variable, place,
                                       hashed_instrs, hash_ids, index, config));
    add_hash_presents(out, hash_ids, {next});
    ++next;
  }
  return out;
}

std::vector<Manifest> propose_csiv(const ProgramModel& program, const PassConfig& config,
                                   Id first_id) {
  ProgramIndex index(program);
  Rng rng = pass_rng(config, Pass::Csiv);
  std::vector<Manifest> out;
  Id next = first_id;

  std::vector<Id> sensitive;
  for (const auto& fn : program.functions) {
    if (fn.sensitive) sensitive.push_back(fn.id);
  }
  if (sensitive.empty()) return out;

  // Entry function plus uncalled functions act as call-graph roots.
  std::set<Id> roots;
  if (!program.functions.empty()) roots.insert(program.functions.front().id);
  for (const auto& fn : program.functions) {
    if (!index.called_functions().contains(fn.id)) roots.insert(fn.id);
  }

  // Multi-source BFS; parent maps give the shortest root path per function.
  std::map<Id, Id> parent;
  std::deque<Id> queue;
  for (Id r : roots) {
    parent[r] = -1;
    queue.push_back(r);
  }
  while (!queue.empty()) {
    Id fn = queue.front();
    queue.pop_front();
    auto it = index.call_graph().find(fn);
    if (it == index.call_graph().end()) continue;
    for (Id callee : it->second) {
      if (parent.contains(callee)) continue;
      parent[callee] = fn;
      queue.push_back(callee);
    }
  }

  std::map<Id, Id> register_of_function;
  for (Id s : sensitive) {
    std::vector<Id> path;
    if (parent.contains(s)) {
      for (Id cur = s; cur != -1; cur = parent[cur]) path.push_back(cur);
      std::ranges::reverse(path);
    } else {
      path = {s};
    }

    std::vector<NodeRef> required;
    for (Id fn_id : path) {
      auto it = register_of_function.find(fn_id);
      if (it == register_of_function.end()) {
        Manifest reg;
        reg.id = next++;
        reg.kind = ManifestKind::CsivRegister;
        reg.placement_block = index.function(fn_id).entry_block;
        for (int i = 0; i < config.guard_sizes.csiv_register; ++i) {
          reg.guards.push_back(make_guard(reg.id, reg.rank(), i, "csiv.register", 1, false));
        }
        reg.token = rng.next_u64();
        reg.protectee_function = fn_id;
        finish(reg, index, config);
        it = register_of_function.emplace(fn_id, reg.id).first;
        out.push_back(std::move(reg));
      }
      required.push_back(NodeRef::manifest(it->second));
    }

    Manifest verify;
    verify.id = next++;
    verify.kind = ManifestKind::CsivVerify;
    verify.placement_block = index.function(s).entry_block;
    verify.protectee_function = s;
    int n = config.guard_sizes.csiv_verify;
    for (int i = 0; i < n; ++i) {
      if (i == n - 1) {
        verify.guards.push_back(make_guard(verify.id, verify.rank(), i, "csiv.expected", 8, true));
      } else {
        verify.guards.push_back(make_guard(verify.id, verify.rank(), i, "csiv.cmp", 1, false));
      }
    }
    for (const auto& instr : index.block(verify.placement_block).instructions) {
      if (!instr.is_global()) verify.protected_instruction_ids.insert(instr.id);
    }
    if (!index.block(verify.placement_block).globals_only()) {
      verify.protected_block_ids.insert(verify.placement_block);
    }
    verify.constraints.push_back(
        PresentConstraint{verify.id, required, static_cast<int>(path.size())});
    add_preserve_for_placeholder(verify);
    finish(verify, index, config);
    out.push_back(std::move(verify));
  }
  return out;
}

std::vector<Manifest> propose_cm(const ProgramModel& program, const PassConfig& config,
                                 Id first_id) {
  ProgramIndex index(program);
  std::vector<Manifest> out;
  Id next = first_id;
  for (std::size_t i = 1; i < program.functions.size(); ++i) {
    const auto& fn = program.functions[i];
    Manifest m;
    m.id = next++;
    m.kind = ManifestKind::Cm;
    m.placement_block = fn.entry_block;
    m.protectee_function = fn.id;
    m.negates_presence_of = fn.id;
    finish(m, index, config);
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<Manifest> propose_obf(const ProgramModel& program, const PassConfig& config,
                                  Id first_id) {
  ProgramIndex index(program);
  std::vector<Manifest> out;
  Id next = first_id;
  for (const auto& fn : program.functions) {
    Manifest m;
    m.id = next++;
    m.kind = ManifestKind::Obf;
    m.placement_block = fn.entry_block;
    m.protectee_function = fn.id;
    for (int i = 0; i < config.guard_sizes.obf; ++i) {
      m.guards.push_back(make_guard(m.id, m.rank(), i, "obf.tag", 1, false));
    }
    finish(m, index, config);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace

std::vector<Manifest> propose(Pass pass, const ProgramModel& program, const PassConfig& config,
                              Id first_id) {
  if (!config.enabled.contains(pass)) {
    fail(Errc::DisabledPass, std::string("pass ") + pass_name(pass) + " is disabled");
  }
  switch (pass) {
    case Pass::Sc: return propose_sc(program, config, first_id);
    case Pass::Oh: return propose_oh(program, config, first_id);
    case Pass::Sroh: return propose_sroh(program, config, first_id);
    case Pass::Csiv: return propose_csiv(program, config, first_id);
    case Pass::Cm: return propose_cm(program, config, first_id);
    case Pass::Obf: return propose_obf(program, config, first_id);
  }
  fail(Errc::UnknownKind, "unknown pass");
}

std::vector<Manifest> propose_all(const ProgramModel& program, const PassConfig& config) {
  std::vector<Manifest> all;
  Id next = 1;
  for (Pass pass : pass_order()) {
    if (!config.enabled.contains(pass)) continue;
    auto batch = propose(pass, program, config, next);
    next += static_cast<Id>(batch.size());
    for (auto& m : batch) all.push_back(std::move(m));
  }
  return all;
}

namespace {

void insert_guards_sorted(BasicBlock& block, const std::vector<AppliedGuard>& guards) {
  for (const auto& g : guards) {
    auto pos = std::ranges::find_if(block.guards, [&](const AppliedGuard& other) {
      return std::tuple(other.pass_rank, other.manifest_id, other.ordinal) >
             std::tuple(g.pass_rank, g.manifest_id, g.ordinal);
    });
    block.guards.insert(pos, g);
  }
}

BasicBlock* find_block(ProgramModel& program, Id block_id) {
  for (auto& fn : program.functions) {
    for (auto& block : fn.blocks) {
      if (block.id == block_id) return &block;
    }
  }
  return nullptr;
}

Function* find_function(ProgramModel& program, Id fn_id) {
  for (auto& fn : program.functions) {
    if (fn.id == fn_id) return &fn;
  }
  return nullptr;
}

}  // namespace

ProgramModel apply(const Manifest& manifest, const ProgramModel& program) {
  ProgramModel next = program;
  ProgramIndex index(next);

  for (Id instr : manifest.protected_instruction_ids) {
    if (!index.has_instruction(instr)) {
      fail(Errc::StaleManifest, "manifest " + std::to_string(manifest.id) +
                                    " protects missing instruction " + std::to_string(instr));
    }
  }
  if (manifest.protectee_function && !index.has_function(*manifest.protectee_function)) {
    fail(Errc::StaleManifest, "manifest " + std::to_string(manifest.id) +
                                  " references missing function " +
                                  std::to_string(*manifest.protectee_function));
  }

  switch (manifest.kind) {
    case ManifestKind::Cm: {
      Function* fn = find_function(next, *manifest.negates_presence_of);
      if (!fn) fail(Errc::StaleManifest, "CM target function missing");
      if (fn->presence_pinned) {
        fail(Errc::PresenceViolation, "function " + std::to_string(fn->id) +
                                          " is presence-pinned and cannot be mobilized");
      }
      fn->mobilized = true;
      return next;
    }
    case ManifestKind::Obf: {
      Function* fn = find_function(next, *manifest.protectee_function);
      if (!fn) fail(Errc::StaleManifest, "OBF target function missing");
      for (auto& block : fn->blocks) {
        for (auto& instr : block.instructions) {
          if (!instr.is_global()) instr.opcode = "obf." + instr.opcode;
        }
        for (auto& g : block.guards) {
          if (!g.preserved) g.opcode = "obf." + g.opcode;
        }
      }
      BasicBlock* place = find_block(next, manifest.placement_block);
      if (!place) fail(Errc::StaleManifest, "OBF placement block missing");
      insert_guards_sorted(*place, manifest.guards);
      return next;
    }
    default: {
      BasicBlock* place = find_block(next, manifest.placement_block);
      if (!place) {
        fail(Errc::StaleManifest, "manifest " + std::to_string(manifest.id) +
                                      " placement block " +
                                      std::to_string(manifest.placement_block) + " missing");
      }
      insert_guards_sorted(*place, manifest.guards);
      if (manifest.kind == ManifestKind::Sc) {
        Function* fn = find_function(next, *manifest.protectee_function);
        if (!fn) fail(Errc::StaleManifest, "SC protectee missing");
        fn->presence_pinned = true;
      }
      return next;
    }
  }
}

ProgramModel apply_all(const std::vector<Manifest>& manifests, const ProgramModel& program) {
  std::vector<const Manifest*> order;
  for (const auto& m : manifests) order.push_back(&m);
  std::ranges::sort(order, [](const Manifest* a, const Manifest* b) {
    return std::tuple(a->rank(), a->id) < std::tuple(b->rank(), b->id);
  });
  ProgramModel current = program;
  for (const Manifest* m : order) current = apply(*m, current);
  return current;
}

namespace {

ordered_json ref_to_json(const NodeRef& ref) {
  const char* kind = ref.kind == NodeKind::Function     ? "function"
                     : ref.kind == NodeKind::Instruction ? "instruction"
                                                         : "manifest";
  return ordered_json{{"kind", kind}, {"id", ref.id}};
}

NodeRef ref_from_json(const ordered_json& j) {
  std::string kind = j.at("kind").get<std::string>();
  Id id = j.at("id").get<Id>();
  if (kind == "function") return NodeRef::function(id);
  if (kind == "instruction") return NodeRef::instruction(id);
  if (kind == "manifest") return NodeRef::manifest(id);
  fail(Errc::ParseError, "unknown node ref kind '" + kind + "'");
}

ordered_json guard_json(const AppliedGuard& g) {
  return ordered_json{{"id", g.id},           {"manifest_id", g.manifest_id},
                      {"pass_rank", g.pass_rank}, {"ordinal", g.ordinal},
                      {"opcode", g.opcode},   {"size_bytes", g.size_bytes},
                      {"placeholder", g.placeholder}, {"preserved", g.preserved}};
}

AppliedGuard guard_from_json(const ordered_json& j) {
  AppliedGuard g;
  g.id = j.at("id").get<Id>();
  g.manifest_id = j.at("manifest_id").get<Id>();
  g.pass_rank = j.at("pass_rank").get<int>();
  g.ordinal = j.at("ordinal").get<int>();
  g.opcode = j.at("opcode").get<std::string>();
  g.size_bytes = j.at("size_bytes").get<std::int64_t>();
  g.placeholder = j.at("placeholder").get<bool>();
  g.preserved = j.at("preserved").get<bool>();
  return g;
}

}  // namespace

ordered_json manifest_to_json(const Manifest& m) {
  ordered_json j;
  j["id"] = m.id;
  j["kind"] = kind_name(m.kind);
  j["placement_block"] = m.placement_block;
  j["guards"] = ordered_json::array();
  for (const auto& g : m.guards) j["guards"].push_back(guard_json(g));
  j["protected_instruction_ids"] = m.protected_instruction_ids;
  j["protected_block_ids"] = m.protected_block_ids;
  j["constraints"] = ordered_json::array();
  for (const auto& c : m.constraints) {
    if (const auto* order = std::get_if<OrderConstraint>(&c)) {
      j["constraints"].push_back(ordered_json{{"type", "order"},
                                              {"before", ref_to_json(order->before)},
                                              {"after", ref_to_json(order->after)}});
    } else if (const auto* preserve = std::get_if<PreserveConstraint>(&c)) {
      j["constraints"].push_back(
          ordered_json{{"type", "preserve"}, {"instruction_ids", preserve->instruction_ids}});
    } else if (const auto* present = std::get_if<PresentConstraint>(&c)) {
      ordered_json req = ordered_json::array();
      for (const auto& r : present->required) req.push_back(ref_to_json(r));
      j["constraints"].push_back(ordered_json{{"type", "present"},
                                              {"dependent", present->dependent},
                                              {"required", req},
                                              {"min_count", present->min_count}});
    }
  }
  j["cost"] = m.cost;
  j["protectee_function"] = m.protectee_function ? ordered_json(*m.protectee_function)
                                                 : ordered_json(nullptr);
  j["hash_variable"] = m.hash_variable ? ordered_json(*m.hash_variable) : ordered_json(nullptr);
  j["token"] = m.token ? ordered_json(*m.token) : ordered_json(nullptr);
  j["negates_presence_of"] =
      m.negates_presence_of ? ordered_json(*m.negates_presence_of) : ordered_json(nullptr);
  return j;
}

Manifest manifest_from_json(const ordered_json& j) {
  Manifest m;
  try {
    m.id = j.at("id").get<Id>();
    m.kind = kind_from_name(j.at("kind").get<std::string>());
    m.placement_block = j.at("placement_block").get<Id>();
    for (const auto& jg : j.at("guards")) m.guards.push_back(guard_from_json(jg));
    for (const auto& v : j.at("protected_instruction_ids")) {
      m.protected_instruction_ids.insert(v.get<Id>());
    }
    for (const auto& v : j.at("protected_block_ids")) m.protected_block_ids.insert(v.get<Id>());
    for (const auto& jc : j.at("constraints")) {
      std::string type = jc.at("type").get<std::string>();
      if (type == "order") {
        m.constraints.push_back(OrderConstraint{ref_from_json(jc.at("before")),
                                                ref_from_json(jc.at("after"))});
      } else if (type == "preserve") {
        PreserveConstraint p;
        for (const auto& v : jc.at("instruction_ids")) p.instruction_ids.push_back(v.get<Id>());
        m.constraints.push_back(std::move(p));
      } else if (type == "present") {
        PresentConstraint p;
        p.dependent = jc.at("dependent").get<Id>();
        for (const auto& r : jc.at("required")) p.required.push_back(ref_from_json(r));
        p.min_count = jc.at("min_count").get<int>();
        m.constraints.push_back(std::move(p));
      } else {
        fail(Errc::ParseError, "unknown constraint type '" + type + "'");
      }
    }
    m.cost = j.at("cost").get<double>();
    if (!j.at("protectee_function").is_null()) {
      m.protectee_function = j.at("protectee_function").get<Id>();
    }
    if (!j.at("hash_variable").is_null()) m.hash_variable = j.at("hash_variable").get<Id>();
    if (!j.at("token").is_null()) m.token = j.at("token").get<std::uint64_t>();
    if (!j.at("negates_presence_of").is_null()) {
      m.negates_presence_of = j.at("negates_presence_of").get<Id>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, std::string("bad manifest JSON: ") + e.what());
  }
  return m;
}

std::string serialize_manifests(const std::vector<Manifest>& manifests) {
  ordered_json root;
  root["manifests"] = ordered_json::array();
  for (const auto& m : manifests) root["manifests"].push_back(manifest_to_json(m));
  return root.dump(2) + "\n";
}

std::vector<Manifest> parse_manifests(const std::string& json_text) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, std::string("invalid JSON: ") + e.what());
  }
  std::vector<Manifest> out;
  if (!root.contains("manifests") || !root.at("manifests").is_array()) {
    fail(Errc::ParseError, "expected a 'manifests' array");
  }
  for (const auto& jm : root.at("manifests")) out.push_back(manifest_from_json(jm));
  return out;
}

}  // namespace bulwark
