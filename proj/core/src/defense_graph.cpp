#include "bulwark/defense_graph.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "bulwark/errors.hpp"

namespace bulwark {

namespace {

std::string node_name(const NodeRef& n) {
  switch (n.kind) {
    case NodeKind::Function: return "f" + std::to_string(n.id);
    case NodeKind::Instruction: return "i" + std::to_string(n.id);
    case NodeKind::Manifest: return "m" + std::to_string(n.id);
  }
  return "?";
}

struct BuildContext {
  const std::vector<Manifest>& manifests;
  const ProgramIndex& index;
  std::map<Id, const Manifest*> by_id;
  std::map<Id, std::vector<Id>> placed_in_block;  // block -> manifest ids (ascending)
  std::set<Id> guard_ids;                         // every proposed guard id
};

// Program nodes are structural: a reference to a missing one is an error.
// Manifest references are conditional on selection — when the target is not in
// the working set the constraint is vacuous, so the caller skips the arc.
bool check_ref(const BuildContext& ctx, const NodeRef& ref, Id owner) {
  if (ref.kind == NodeKind::Manifest) return ctx.by_id.count(ref.id) != 0;
  bool ok = ref.kind == NodeKind::Function ? ctx.index.has_function(ref.id)
                                           : ctx.index.has_instruction(ref.id);
  if (!ok) {
    fail(Errc::DanglingReference,
         "manifest " + std::to_string(owner) + " references missing node " + node_name(ref),
         ref.id);
  }
  return true;
}

// X -> Function(F) stands for: X after every non-global instruction of F and
// after every other manifest placed inside F.
void expand_function_arc(const BuildContext& ctx, const NodeRef& from, Id fn_id,
                         std::set<Arc>& out) {
  for (Id instr : ctx.index.code_instructions(fn_id)) {
    out.insert({from, NodeRef::instruction(instr)});
  }
  for (const auto& block : ctx.index.function(fn_id).blocks) {
    auto it = ctx.placed_in_block.find(block.id);
    if (it == ctx.placed_in_block.end()) continue;
    for (Id mid : it->second) {
      NodeRef target = NodeRef::manifest(mid);
      if (target != from) out.insert({from, target});
    }
  }
}

}  // namespace

DefenseGraph build_graph(const std::vector<Manifest>& manifests, const ProgramModel& program) {
  ProgramIndex index(program);
  BuildContext ctx{manifests, index, {}, {}, {}};
  for (const auto& m : manifests) {
    if (!ctx.by_id.emplace(m.id, &m).second) {
      fail(Errc::InconsistentInput, "duplicate manifest id " + std::to_string(m.id), m.id);
    }
    for (const auto& g : m.guards) ctx.guard_ids.insert(g.id);
  }
  for (const auto& m : manifests) {
    if (m.placement_block >= 0) ctx.placed_in_block[m.placement_block].push_back(m.id);
  }

  DefenseGraph graph;
  for (const auto& m : manifests) graph.nodes.insert(NodeRef::manifest(m.id));

  for (const auto& m : manifests) {
    for (const auto& c : m.constraints) {
      if (const auto* order = std::get_if<OrderConstraint>(&c)) {
        if (!check_ref(ctx, order->after, m.id)) continue;
        if (!check_ref(ctx, order->before, m.id)) continue;
        if (order->before.kind == NodeKind::Function) {
          expand_function_arc(ctx, order->after, order->before.id, graph.dependency_arcs);
        } else {
          graph.dependency_arcs.insert({order->after, order->before});
        }
      } else if (const auto* preserve = std::get_if<PreserveConstraint>(&c)) {
        for (Id id : preserve->instruction_ids) {
          if (!index.has_instruction(id) && !ctx.guard_ids.contains(id)) {
            fail(Errc::DanglingReference,
                 "manifest " + std::to_string(m.id) + " preserves unknown instruction " +
                     std::to_string(id),
                 id);
          }
        }
      } else if (const auto* present = std::get_if<PresentConstraint>(&c)) {
        if (!ctx.by_id.count(present->dependent)) continue;  // dependent not selected
        for (const auto& ref : present->required) {
          if (!check_ref(ctx, ref, m.id)) continue;
          graph.present_arcs.insert({NodeRef::manifest(present->dependent), ref});
        }
      }
    }
  }

  // A hash family's variable carries a digest over its covered blocks, so the
  // value is only final once every earlier-pass manifest placed there is.
  // The same overlap makes the hash witness those manifests' guard bytes.
  for (const auto& h : manifests) {
    bool is_hash = h.kind == ManifestKind::OhHash || h.kind == ManifestKind::SrohHash;
    if (!is_hash || !h.hash_variable) continue;
    for (Id block : h.protected_block_ids) {
      auto it = ctx.placed_in_block.find(block);
      if (it == ctx.placed_in_block.end()) continue;
      for (Id other : it->second) {
        if (other == h.id) continue;
        if (ctx.by_id.at(other)->rank() >= h.rank()) continue;
        graph.dependency_arcs.insert(
            {NodeRef::instruction(*h.hash_variable), NodeRef::manifest(other)});
        graph.protection_arcs.push_back({h.id, other});
      }
    }
  }

  // A region checker witnesses every guard byte later passes drop into the
  // protectee, so each co-located manifest gains a protector.
  for (const auto& s : manifests) {
    if (s.kind != ManifestKind::Sc || !s.protectee_function) continue;
    for (const auto& block : index.function(*s.protectee_function).blocks) {
      auto it = ctx.placed_in_block.find(block.id);
      if (it == ctx.placed_in_block.end()) continue;
      for (Id other : it->second) {
        if (other != s.id) graph.protection_arcs.push_back({s.id, other});
      }
    }
  }

  std::ranges::sort(graph.protection_arcs, [](const ProtectionArc& a, const ProtectionArc& b) {
    return std::tie(a.protectee, a.protector) < std::tie(b.protectee, b.protector);
  });
  graph.protection_arcs.erase(std::unique(graph.protection_arcs.begin(),
                                          graph.protection_arcs.end()),
                              graph.protection_arcs.end());

  for (const auto& [from, to] : graph.dependency_arcs) {
    graph.nodes.insert(from);
    graph.nodes.insert(to);
  }
  for (const auto& [from, to] : graph.present_arcs) {
    graph.nodes.insert(from);
    graph.nodes.insert(to);
  }

  std::set<Id> preserved_ids;
  for (const auto& m : manifests) {
    for (const auto& c : m.constraints) {
      if (const auto* p = std::get_if<PreserveConstraint>(&c)) {
        preserved_ids.insert(p->instruction_ids.begin(), p->instruction_ids.end());
      }
    }
  }
  // Preserve marks are cross-manifest state (later passes must keep these
  // bytes literal), so they show up as nodes even without an arc.
  for (Id id : preserved_ids) graph.nodes.insert(NodeRef::instruction(id));

  std::set<Id> pinned_functions;
  for (const auto& m : manifests) {
    if (m.kind == ManifestKind::Sc && m.protectee_function) {
      pinned_functions.insert(*m.protectee_function);
    }
  }
  for (const auto& node : graph.nodes) {
    NodeAttributes attrs;
    switch (node.kind) {
      case NodeKind::Manifest: {
        const Manifest* m = ctx.by_id.at(node.id);
        if (m->placement_block >= 0 && index.has_block(m->placement_block)) {
          attrs.exec_freq_norm = normalized_freq(index, m->placement_block);
        }
        break;
      }
      case NodeKind::Instruction: {
        if (index.has_instruction(node.id)) {  // guard bytes have no block yet
          attrs.exec_freq_norm = normalized_freq(index, index.block_of_instruction(node.id));
        }
        attrs.preserve = preserved_ids.contains(node.id);
        break;
      }
      case NodeKind::Function:
        attrs.static_presence_required = pinned_functions.contains(node.id);
        break;
    }
    graph.attributes[node] = attrs;
  }
  return graph;
}

namespace {

// Iterative Tarjan; recursion depth would track path length otherwise.
std::vector<std::vector<NodeRef>> strongly_connected(const DefenseGraph& graph) {
  std::map<NodeRef, std::vector<NodeRef>> adj;
  for (const auto& [from, to] : graph.dependency_arcs) adj[from].push_back(to);

  std::map<NodeRef, int> number, low;
  std::map<NodeRef, bool> on_stack;
  std::vector<NodeRef> stack;
  std::vector<std::vector<NodeRef>> components;
  int counter = 0;

  struct Frame {
    NodeRef node;
    std::size_t next_edge = 0;
  };

  for (const auto& root : graph.nodes) {
    if (number.count(root)) continue;
    std::vector<Frame> frames{{root, 0}};
    number[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;

    while (!frames.empty()) {
      Frame& frame = frames.back();
      const auto* edges = adj.count(frame.node) ? &adj.at(frame.node) : nullptr;
      if (edges && frame.next_edge < edges->size()) {
        NodeRef next = (*edges)[frame.next_edge++];
        if (!number.count(next)) {
          number[next] = low[next] = counter++;
          stack.push_back(next);
          on_stack[next] = true;
          frames.push_back({next, 0});
        } else if (on_stack[next]) {
          low[frame.node] = std::min(low[frame.node], number[next]);
        }
      } else {
        if (low[frame.node] == number[frame.node]) {
          std::vector<NodeRef> component;
          for (;;) {
            NodeRef top = stack.back();
            stack.pop_back();
            on_stack[top] = false;
            component.push_back(top);
            if (top == frame.node) break;
          }
          components.push_back(std::move(component));
        }
        NodeRef finished = frame.node;
        frames.pop_back();
        if (!frames.empty()) {
          low[frames.back().node] = std::min(low[frames.back().node], low[finished]);
        }
      }
    }
  }
  return components;
}

}  // namespace

std::vector<Cycle> find_cycles(const DefenseGraph& graph) {
  std::vector<Cycle> cycles;
  for (auto& component : strongly_connected(graph)) {
    bool cyclic = component.size() >= 2;
    if (!cyclic) {
      cyclic = graph.dependency_arcs.contains({component.front(), component.front()});
    }
    if (!cyclic) continue;
    Cycle cycle;
    for (const auto& node : component) {
      if (node.kind == NodeKind::Manifest) cycle.manifest_ids.push_back(node.id);
    }
    if (cycle.manifest_ids.empty()) continue;
    std::ranges::sort(cycle.manifest_ids);
    cycles.push_back(std::move(cycle));
  }
  std::ranges::sort(cycles, [](const Cycle& a, const Cycle& b) {
    return a.manifest_ids < b.manifest_ids;
  });
  return cycles;
}

std::string export_dot(const DefenseGraph& graph) {
  std::ostringstream out;
  out << "digraph defense {\n";
  out << "  rankdir=LR;\n";
  for (const auto& node : graph.nodes) {
    out << "  " << node_name(node) << " [";
    switch (node.kind) {
      case NodeKind::Manifest: out << "shape=box"; break;
      case NodeKind::Instruction: out << "shape=ellipse"; break;
      case NodeKind::Function: out << "shape=hexagon"; break;
    }
    auto it = graph.attributes.find(node);
    if (it != graph.attributes.end()) {
      if (it->second.preserve) out << ", style=filled, fillcolor=lightyellow";
      if (it->second.static_presence_required) out << ", peripheries=2";
    }
    out << "];\n";
  }
  for (const auto& [from, to] : graph.dependency_arcs) {
    out << "  " << node_name(from) << " -> " << node_name(to) << ";\n";
  }
  for (const auto& [from, to] : graph.present_arcs) {
    out << "  " << node_name(from) << " -> " << node_name(to) << " [style=dashed];\n";
  }
  for (const auto& arc : graph.protection_arcs) {
    out << "  m" << arc.protector << " -> m" << arc.protectee
        << " [style=dotted, color=gray40];\n";
  }
  out << "}\n";
  return out.str();
}

std::string graph_summary(const DefenseGraph& graph) {
  nlohmann::ordered_json j;
  int manifest_nodes = 0;
  for (const auto& n : graph.nodes) {
    if (n.kind == NodeKind::Manifest) ++manifest_nodes;
  }
  j["nodes"] = graph.nodes.size();
  j["manifest_nodes"] = manifest_nodes;
  j["dependency_arcs"] = graph.dependency_arcs.size();
  j["present_arcs"] = graph.present_arcs.size();
  j["protection_arcs"] = graph.protection_arcs.size();
  auto cycles = find_cycles(graph);
  j["cycles"] = nlohmann::ordered_json::array();
  for (const auto& c : cycles) j["cycles"].push_back(c.manifest_ids);
  return j.dump(2) + "\n";
}

}  // namespace bulwark
