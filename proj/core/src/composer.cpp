#include "bulwark/composer.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bulwark/errors.hpp"
#include "bulwark/passes.hpp"
#include "json_detail.hpp"

namespace bulwark {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;
constexpr std::uint64_t kTamperMask = 0x0D15EA5EDBADC0DEULL;

std::uint64_t fold_step(std::uint64_t acc, std::uint64_t value) {
  return (acc ^ value) * kFnvPrime;
}

// Stand-in for "the bytes of this instruction": a digest of everything the
// simulator knows about it. Tampering flips the digest.
std::uint64_t base_sig(Id id, const std::string& opcode, std::int64_t size_bytes) {
  std::uint64_t acc = kFnvOffset;
  acc = fold_step(acc, static_cast<std::uint64_t>(id));
  for (char c : opcode) acc = fold_step(acc, static_cast<unsigned char>(c));
  acc = fold_step(acc, static_cast<std::uint64_t>(size_bytes));
  return acc;
}

struct Simulator {
  const ProgramModel& program;
  const std::vector<Manifest>& selected;
  ProgramIndex index;
  std::map<Id, const Manifest*> by_id;
  Id tamper_id = -1;  // instruction or guard id whose bytes are flipped

  Simulator(const ProgramModel& p, const std::vector<Manifest>& sel)
      : program(p), selected(sel), index(p) {
    for (const auto& m : sel) by_id.emplace(m.id, &m);
  }

  std::uint64_t instr_sig(const Instruction& instr) const {
    std::uint64_t sig = base_sig(instr.id, instr.opcode, instr.size_bytes);
    return instr.id == tamper_id ? sig ^ kTamperMask : sig;
  }

  // Placeholder guards carry their manifest's patched slot as payload.
  std::uint64_t guard_sig(const AppliedGuard& g, const PatchState& patches) const {
    std::uint64_t sig = base_sig(g.id, g.opcode, g.size_bytes);
    if (g.placeholder) {
      auto it = patches.slots.find(g.manifest_id);
      sig = fold_step(sig, it != patches.slots.end() ? it->second : 0);
    }
    return g.id == tamper_id ? sig ^ kTamperMask : sig;
  }

  // Blocks whose digest feeds a hash family's variable: every covered block of
  // the selected hash manifests sharing the variable.
  std::vector<const Manifest*> family_hashes(const Manifest& verify) const {
    ManifestKind want =
        verify.kind == ManifestKind::OhVerify ? ManifestKind::OhHash : ManifestKind::SrohHash;
    std::vector<const Manifest*> out;
    for (const auto& m : selected) {
      if (m.kind == want && m.hash_variable == verify.hash_variable) out.push_back(&m);
    }
    std::ranges::sort(out, [](const Manifest* a, const Manifest* b) { return a->id < b->id; });
    return out;
  }

  std::set<Id> covered_blocks(const Manifest& verify) const {
    std::set<Id> blocks;
    for (const Manifest* h : family_hashes(verify)) {
      blocks.insert(h->protected_block_ids.begin(), h->protected_block_ids.end());
    }
    return blocks;
  }

  std::vector<const Manifest*> required_registers(const Manifest& verify) const {
    std::vector<const Manifest*> out;
    for (const auto& c : verify.constraints) {
      const auto* present = std::get_if<PresentConstraint>(&c);
      if (!present) continue;
      for (const auto& ref : present->required) {
        if (ref.kind != NodeKind::Manifest) continue;
        auto it = by_id.find(ref.id);
        if (it != by_id.end() && it->second->kind == ManifestKind::CsivRegister) {
          out.push_back(it->second);
        }
      }
    }
    std::ranges::sort(out, [](const Manifest* a, const Manifest* b) { return a->id < b->id; });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::uint64_t slot_value(const Manifest& m, const PatchState& patches) const {
    switch (m.kind) {
      case ManifestKind::Sc: {
        // Digest of the protectee: original code plus whatever guards other
        // manifests parked there, placeholders included.
        std::uint64_t acc = kFnvOffset;
        for (const auto& block : index.function(*m.protectee_function).blocks) {
          if (block.globals_only()) continue;
          for (const auto& instr : block.instructions) {
            if (!instr.is_global()) acc = fold_step(acc, instr_sig(instr));
          }
          for (const auto& g : block.guards) acc = fold_step(acc, guard_sig(g, patches));
        }
        return acc;
      }
      case ManifestKind::OhHash:
      case ManifestKind::SrohHash: {
        std::uint64_t acc = kFnvOffset;
        for (Id id : m.protected_instruction_ids) {
          acc = fold_step(acc, instr_sig(index.instruction(id)));
        }
        return acc;
      }
      case ManifestKind::OhVerify:
      case ManifestKind::SrohVerify: {
        // What the variable will hold at runtime...
        std::uint64_t runs = kFnvOffset;
        for (const Manifest* h : family_hashes(m)) {
          runs = fold_step(runs, slot_value(*h, patches));
        }
        // ...plus the earlier-pass guard bytes hashed alongside.
        std::uint64_t guards = kFnvOffset;
        for (Id block_id : covered_blocks(m)) {
          for (const auto& g : index.block(block_id).guards) {
            if (g.pass_rank < m.rank()) guards = fold_step(guards, guard_sig(g, patches));
          }
        }
        return runs ^ guards;
      }
      case ManifestKind::CsivVerify: {
        std::uint64_t code = kFnvOffset;
        for (const auto& instr : index.block(m.placement_block).instructions) {
          if (!instr.is_global()) code = fold_step(code, instr_sig(instr));
        }
        std::uint64_t tokens = kFnvOffset;
        for (const Manifest* reg : required_registers(m)) {
          tokens = fold_step(tokens, reg->token.value_or(0));
        }
        return code ^ tokens;
      }
      case ManifestKind::CsivRegister: return m.token.value_or(0);
      case ManifestKind::Cm:
      case ManifestKind::Obf: return 0;  // no runtime check to trip
    }
    return 0;
  }
};

}  // namespace

std::vector<Id> finalization_order(const DefenseGraph& selected_graph,
                                   const std::vector<Manifest>& selected) {
  std::set<Id> manifest_ids;
  for (const auto& m : selected) manifest_ids.insert(m.id);

  // Contract dependencies that run through instruction/function nodes:
  // a manifest depends on every manifest reachable through non-manifest hops.
  std::map<NodeRef, std::vector<NodeRef>> adj;
  for (const auto& [from, to] : selected_graph.dependency_arcs) adj[from].push_back(to);

  std::map<Id, std::set<Id>> deps;
  for (Id id : manifest_ids) deps[id] = {};
  for (Id id : manifest_ids) {
    std::vector<NodeRef> stack{NodeRef::manifest(id)};
    std::set<NodeRef> seen{stack.front()};
    while (!stack.empty()) {
      NodeRef cur = stack.back();
      stack.pop_back();
      auto it = adj.find(cur);
      if (it == adj.end()) continue;
      for (const NodeRef& next : it->second) {
        if (seen.contains(next)) continue;
        seen.insert(next);
        if (next.kind == NodeKind::Manifest) {
          if (manifest_ids.contains(next.id)) deps[id].insert(next.id);
          // stop at manifest nodes: their own deps are ordered separately
        } else {
          stack.push_back(next);
        }
      }
    }
  }

  std::map<Id, std::set<Id>> dependents;
  std::map<Id, int> pending;
  for (const auto& [id, d] : deps) {
    pending[id] = static_cast<int>(d.size());
    for (Id dep : d) dependents[dep].insert(id);
  }
  std::set<Id> ready;
  for (const auto& [id, count] : pending) {
    if (count == 0) ready.insert(id);
  }
  std::vector<Id> order;
  while (!ready.empty()) {
    Id id = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(id);
    for (Id dependent : dependents[id]) {
      if (--pending[dependent] == 0) ready.insert(dependent);
    }
  }
  if (order.size() != manifest_ids.size()) {
    fail(Errc::CycleRemains, "selected manifests still form a dependency cycle");
  }
  return order;
}

PatchState finalize_and_verify(const ProgramModel& protected_program,
                               const std::vector<Manifest>& selected,
                               const std::vector<Id>& order) {
  std::set<Id> selected_ids, order_ids;
  for (const auto& m : selected) selected_ids.insert(m.id);
  for (Id id : order) order_ids.insert(id);
  if (order_ids.size() != order.size() || order_ids != selected_ids) {
    fail(Errc::FinalizationInconsistent,
         "finalization order is not a permutation of the selection");
  }

  Simulator sim(protected_program, selected);
  PatchState patches;
  for (Id id : order) {
    patches.slots[id] = sim.slot_value(*sim.by_id.at(id), patches);
    patches.finalized.push_back(id);
  }
  for (const auto& m : selected) {
    if (sim.slot_value(m, patches) != patches.slots.at(m.id)) {
      fail(Errc::FalseAlarm,
           "check of manifest " + std::to_string(m.id) + " trips on the untampered program",
           m.id);
    }
  }
  return patches;
}

std::set<Id> tamper_check(const ProgramModel& protected_program,
                          const std::vector<Manifest>& selected, const PatchState& patches,
                          Id instruction_id) {
  Simulator sim(protected_program, selected);
  bool known = sim.index.has_instruction(instruction_id);
  if (!known) {
    for (const auto& fn : protected_program.functions) {
      for (const auto& block : fn.blocks) {
        for (const auto& g : block.guards) known = known || g.id == instruction_id;
      }
    }
  }
  if (!known) {
    fail(Errc::UnknownInstruction, "no instruction " + std::to_string(instruction_id),
         instruction_id);
  }
  sim.tamper_id = instruction_id;
  std::set<Id> triggered;
  for (const auto& m : selected) {
    if (sim.slot_value(m, patches) != patches.slots.at(m.id)) triggered.insert(m.id);
  }
  return triggered;
}

std::set<Id> effective_instructions(const Manifest& manifest,
                                    const std::vector<Manifest>& selected,
                                    const ProgramModel& protected_program) {
  Simulator sim(protected_program, selected);
  std::set<Id> out;
  switch (manifest.kind) {
    case ManifestKind::Sc: {
      for (const auto& block : sim.index.function(*manifest.protectee_function).blocks) {
        if (block.globals_only()) continue;
        for (const auto& instr : block.instructions) {
          if (!instr.is_global()) out.insert(instr.id);
        }
        for (const auto& g : block.guards) out.insert(g.id);
      }
      return out;
    }
    case ManifestKind::OhHash:
    case ManifestKind::SrohHash: return manifest.protected_instruction_ids;
    case ManifestKind::OhVerify:
    case ManifestKind::SrohVerify: {
      for (const Manifest* h : sim.family_hashes(manifest)) {
        out.insert(h->protected_instruction_ids.begin(), h->protected_instruction_ids.end());
      }
      for (Id block_id : sim.covered_blocks(manifest)) {
        for (const auto& g : sim.index.block(block_id).guards) {
          if (g.pass_rank < manifest.rank()) out.insert(g.id);
        }
      }
      return out;
    }
    case ManifestKind::CsivVerify: {
      for (const auto& instr : sim.index.block(manifest.placement_block).instructions) {
        if (!instr.is_global()) out.insert(instr.id);
      }
      return out;
    }
    case ManifestKind::CsivRegister:
    case ManifestKind::Cm:
    case ManifestKind::Obf: return out;
  }
  return out;
}

std::set<Id> effective_blocks(const Manifest& manifest, const std::vector<Manifest>& selected,
                              const ProgramModel& protected_program) {
  Simulator sim(protected_program, selected);
  std::set<Id> out;
  switch (manifest.kind) {
    case ManifestKind::Sc: {
      for (const auto& block : sim.index.function(*manifest.protectee_function).blocks) {
        if (!block.globals_only()) out.insert(block.id);
      }
      return out;
    }
    case ManifestKind::OhHash:
    case ManifestKind::SrohHash: return manifest.protected_block_ids;
    case ManifestKind::OhVerify:
    case ManifestKind::SrohVerify: return sim.covered_blocks(manifest);
    case ManifestKind::CsivVerify: {
      if (!sim.index.block(manifest.placement_block).globals_only()) {
        out.insert(manifest.placement_block);
      }
      return out;
    }
    case ManifestKind::CsivRegister:
    case ManifestKind::Cm:
    case ManifestKind::Obf: return out;
  }
  return out;
}

namespace {

struct SolveOutcome {
  std::vector<Id> selected_ids;
  std::set<Id> flagged;  // manifests whose f variable is 1
  double objective = 0.0;
};

// Manifest-to-manifest reachability through non-manifest nodes only. Such a
// path exists in every future selection that keeps both endpoints (arcs appear
// when their own endpoints are selected, and intermediate instruction/function
// nodes are structural), so conflict rows built on it stay valid.
std::map<Id, std::set<Id>> manifest_reach(const DefenseGraph& graph) {
  std::map<NodeRef, std::vector<NodeRef>> out_arcs;
  for (const auto& [from, to] : graph.dependency_arcs) out_arcs[from].push_back(to);
  std::map<Id, std::set<Id>> reach;
  for (const auto& node : graph.nodes) {
    if (node.kind != NodeKind::Manifest) continue;
    std::set<Id>& hits = reach[node.id];
    std::set<NodeRef> seen{node};
    std::vector<NodeRef> frontier{node};
    while (!frontier.empty()) {
      NodeRef cur = frontier.back();
      frontier.pop_back();
      auto arcs = out_arcs.find(cur);
      if (arcs == out_arcs.end()) continue;
      for (const NodeRef& next : arcs->second) {
        if (!seen.insert(next).second) continue;
        if (next.kind == NodeKind::Manifest) {
          hits.insert(next.id);  // stop here: no traversal through manifests
        } else {
          frontier.push_back(next);
        }
      }
    }
  }
  return reach;
}

std::vector<Id> shortest_cycle_through(const std::vector<Id>& members,
                                       const std::map<Id, std::set<Id>>& reach) {
  std::set<Id> inside(members.begin(), members.end());
  std::vector<Id> best;
  for (Id start : members) {
    std::map<Id, Id> parent;
    std::vector<Id> queue{start};
    for (std::size_t head = 0; head < queue.size(); ++head) {
      Id cur = queue[head];
      auto it = reach.find(cur);
      if (it == reach.end()) continue;
      for (Id next : it->second) {
        if (!inside.contains(next)) continue;
        if (next == start) {
          std::vector<Id> cycle{start};
          for (Id walk = cur; walk != start; walk = parent.at(walk)) cycle.push_back(walk);
          if (best.empty() || cycle.size() < best.size()) best = std::move(cycle);
          break;
        }
        if (!parent.contains(next)) {
          parent[next] = cur;
          queue.push_back(next);
        }
      }
      if (!best.empty() && best.size() == 2) return best;  // cannot get shorter
    }
  }
  return best;
}

// An SCC row (keep at most all-but-one member) is the weakest valid cut: a
// dense conflict cluster has exponentially many cyclic subsets, and banning
// them one solve at a time does not converge. Sharpen each residual SCC into
// the strongest rows it supports: one per mutual pair, or one shortest
// elementary cycle when every conflict in the cluster is longer than two.
std::vector<Cycle> sharpen_conflicts(const DefenseGraph& subgraph,
                                     const std::vector<Cycle>& residual) {
  std::map<Id, std::set<Id>> reach = manifest_reach(subgraph);
  auto mutual = [&](Id a, Id b) {
    auto ra = reach.find(a), rb = reach.find(b);
    return ra != reach.end() && rb != reach.end() && ra->second.contains(b) &&
           rb->second.contains(a);
  };
  std::vector<Cycle> rows;
  for (const Cycle& scc : residual) {
    const std::vector<Id>& ids = scc.manifest_ids;
    if (ids.size() < 2) {
      rows.push_back(scc);  // self-loop: the row pins the manifest to zero
      continue;
    }
    std::size_t found = rows.size();
    for (std::size_t a = 0; a < ids.size(); ++a) {
      for (std::size_t b = a + 1; b < ids.size(); ++b) {
        if (mutual(ids[a], ids[b])) rows.push_back(Cycle{{ids[a], ids[b]}});
      }
    }
    if (rows.size() != found) continue;
    std::vector<Id> cycle = shortest_cycle_through(ids, reach);
    if (cycle.size() >= 2) {
      std::ranges::sort(cycle);
      rows.push_back(Cycle{std::move(cycle)});
    } else {
      rows.push_back(scc);
    }
  }
  return rows;
}

// One phase: solve, re-check the chosen subset for leftover dependency
// cycles, add their rows, repeat.
SolveOutcome solve_phase(const DefenseGraph& graph, const std::vector<Manifest>& proposal,
                         std::vector<Cycle>& accumulated, const ProgramModel& program,
                         const std::vector<Requirement>& requirements,
                         const std::map<Id, double>& costs, const IlpBuildOptions& options,
                         const CompositionConfig& config, int& iterations_used) {
  std::map<Id, const Manifest*> by_id;
  for (const auto& m : proposal) by_id[m.id] = &m;

  for (int iteration = 0; iteration < config.max_iterations; ++iteration) {
    IlpModel model = build_model(graph, proposal, accumulated, requirements, costs, options);
    Solution solution = solve(model, config.time_limit_s);
    ++iterations_used;
    if (solution.status == SolveStatus::Infeasible) {
      fail(Errc::InfeasibleRequirements, "no conflict-free selection meets the requirements");
    }
    if (solution.status == SolveStatus::TimedOut) {
      // accept the incumbent only if it is genuinely feasible
      for (const auto& row : model.constraints) {
        double sum = 0.0;
        for (const auto& [idx, coef] : row.terms) {
          sum += coef * solution.assignment[static_cast<std::size_t>(idx)];
        }
        if (sum < row.lo - 1e-6 || sum > row.hi + 1e-6) {
          fail(Errc::IterationLimitExceeded,
               "solver hit the time limit without a feasible selection");
        }
      }
    }

    SolveOutcome outcome;
    outcome.objective = solution.objective_value;
    for (std::size_t i = 0; i < model.vars.size(); ++i) {
      if (solution.assignment[i] != 1) continue;
      if (model.vars[i].role == VarRole::ManifestSelect) {
        outcome.selected_ids.push_back(model.vars[i].manifest);
      } else if (model.vars[i].role == VarRole::GuardProtected) {
        outcome.flagged.insert(model.vars[i].manifest);
      }
    }
    std::ranges::sort(outcome.selected_ids);

    std::vector<Manifest> chosen;
    for (Id id : outcome.selected_ids) chosen.push_back(*by_id.at(id));
    DefenseGraph subgraph = build_graph(chosen, program);
    std::vector<Cycle> residual = find_cycles(subgraph);
    if (residual.empty()) return outcome;
    for (auto& row : sharpen_conflicts(subgraph, residual)) accumulated.push_back(std::move(row));
  }
  fail(Errc::IterationLimitExceeded, "conflict refinement did not converge within the limit");
}

double score_sum(const std::vector<Id>& ids, const std::map<Id, const Manifest*>& by_id,
                 bool blocks) {
  double sum = 0.0;
  for (Id id : ids) {
    const Manifest* m = by_id.at(id);
    sum += blocks ? m->explicit_block_score() : m->explicit_instruction_score();
  }
  return sum;
}

double score_sum(const std::set<Id>& ids, const std::map<Id, const Manifest*>& by_id,
                 bool blocks) {
  return score_sum(std::vector<Id>(ids.begin(), ids.end()), by_id, blocks);
}

}  // namespace

CompositionResult compose_from_proposal(const ProgramModel& program,
                                        const std::vector<Manifest>& proposal,
                                        const CompositionConfig& config) {
  validate_program(program);
  CompositionResult result;
  result.proposal = proposal;

  DefenseGraph graph = build_graph(proposal, program);
  result.initial_cycles = find_cycles(graph);

  std::map<Id, double> costs;
  std::map<Id, const Manifest*> by_id;
  for (const auto& m : proposal) {
    costs[m.id] = m.cost;
    by_id[m.id] = &m;
  }

  std::vector<Cycle> accumulated = result.initial_cycles;
  result.iterations_used = 0;

  SolveOutcome final_outcome;
  if (config.two_phase) {
    IlpBuildOptions coverage;
    coverage.maximize_coverage = true;
    SolveOutcome phase_a = solve_phase(graph, proposal, accumulated, program, {}, costs,
                                       coverage, config, result.iterations_used);
    PhaseReport report;
    report.objective = phase_a.objective;
    for (Id id : phase_a.selected_ids) report.selection_cost += costs.at(id);
    report.explicit_instructions = score_sum(phase_a.selected_ids, by_id, false);
    report.explicit_blocks = score_sum(phase_a.selected_ids, by_id, true);
    report.implicit_instructions = score_sum(phase_a.flagged, by_id, false);
    report.implicit_blocks = score_sum(phase_a.flagged, by_id, true);
    result.phase_a = report;

    std::vector<Requirement> floors = {
        {MetricKind::ExplicitInstructions, true, report.explicit_instructions},
        {MetricKind::ExplicitBlocks, true, report.explicit_blocks},
        {MetricKind::ImplicitInstructions, true, report.implicit_instructions},
        {MetricKind::ImplicitBlocks, true, report.implicit_blocks},
    };
    final_outcome = solve_phase(graph, proposal, accumulated, program, floors, costs, {},
                                config, result.iterations_used);
  } else {
    final_outcome = solve_phase(graph, proposal, accumulated, program, config.requirements,
                                costs, {}, config, result.iterations_used);
  }

  result.selected_ids = final_outcome.selected_ids;
  result.objective_value = final_outcome.objective;
  for (Id id : result.selected_ids) result.selected.push_back(*by_id.at(id));

  DefenseGraph selected_graph = build_graph(result.selected, program);
  result.finalization_order = finalization_order(selected_graph, result.selected);
  result.protected_program = apply_all(result.selected, program);
  finalize_and_verify(result.protected_program, result.selected, result.finalization_order);
  result.metrics = compute_metrics(result, program);
  return result;
}

CompositionResult compose(const ProgramModel& program, const CompositionConfig& config) {
  validate_program(program);
  return compose_from_proposal(program, propose_all(program, config.pass_config), config);
}

std::string serialize_bundle(const ProtectedBundle& bundle) {
  ordered_json root = program_to_json(bundle.program, true);
  root["manifests"] = ordered_json::array();
  for (const auto& m : bundle.manifests) root["manifests"].push_back(manifest_to_json(m));
  root["finalization_order"] = bundle.finalization_order;
  return root.dump(2) + "\n";
}

ProtectedBundle parse_bundle(const std::string& json_text) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, std::string("invalid JSON: ") + e.what());
  }
  ProtectedBundle bundle;
  bundle.program = parse_program_json(root, true);
  if (!root.contains("manifests") || !root["manifests"].is_array()) {
    fail(Errc::ParseError, "bundle is missing its 'manifests' array");
  }
  for (const auto& jm : root["manifests"]) bundle.manifests.push_back(manifest_from_json(jm));
  if (!root.contains("finalization_order") || !root["finalization_order"].is_array()) {
    fail(Errc::ParseError, "bundle is missing its 'finalization_order' array");
  }
  for (const auto& v : root["finalization_order"]) {
    bundle.finalization_order.push_back(v.get<Id>());
  }
  return bundle;
}

ProtectedBundle load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_bundle(buffer.str());
}

std::string serialize_report(const CompositionResult& result) {
  ordered_json j;
  j["objective_value"] = result.objective_value;
  j["status"] = "OPTIMAL";
  j["iterations_used"] = result.iterations_used;
  j["manifest_total"] = result.proposal.size();
  j["initial_cycles"] = ordered_json::array();
  for (const auto& c : result.initial_cycles) j["initial_cycles"].push_back(c.manifest_ids);
  j["selected"] = result.selected_ids;
  j["finalization_order"] = result.finalization_order;
  if (result.phase_a) {
    j["phase_a"] = ordered_json{{"objective", result.phase_a->objective},
                                {"selection_cost", result.phase_a->selection_cost},
                                {"explicit_instructions", result.phase_a->explicit_instructions},
                                {"explicit_blocks", result.phase_a->explicit_blocks},
                                {"implicit_instructions", result.phase_a->implicit_instructions},
                                {"implicit_blocks", result.phase_a->implicit_blocks}};
  } else {
    j["phase_a"] = nullptr;
  }
  const MetricsReport& m = result.metrics;
  ordered_json hist;
  for (const auto& [k, v] : m.connectivity_histogram) hist[std::to_string(k)] = v;
  j["metrics"] = ordered_json{{"explicit_instr_sum", m.explicit_instr_sum},
                              {"explicit_instr_union", m.explicit_instr_union},
                              {"explicit_block_sum", m.explicit_block_sum},
                              {"explicit_block_union", m.explicit_block_union},
                              {"implicit_instr", m.implicit_instr},
                              {"implicit_block", m.implicit_block},
                              {"estimated_cost", m.estimated_cost},
                              {"connectivity_histogram", hist},
                              {"manifest_count", m.manifest_count}};
  return j.dump(2) + "\n";
}

}  // namespace bulwark
