#include "bulwark/ilp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "bulwark/errors.hpp"

namespace bulwark {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

int IlpModel::var_index(const std::string& name) const {
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int Solution::value(const IlpModel& model, const std::string& var_name) const {
  int idx = model.var_index(var_name);
  if (idx < 0 || static_cast<std::size_t>(idx) >= assignment.size()) {
    fail(Errc::InconsistentInput, "no variable named " + var_name);
  }
  return assignment[static_cast<std::size_t>(idx)];
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "OPTIMAL";
    case SolveStatus::Infeasible: return "INFEASIBLE";
    case SolveStatus::TimedOut: return "TIMED_OUT";
  }
  return "?";
}

const char* metric_name(MetricKind m) {
  switch (m) {
    case MetricKind::ExplicitInstructions: return "explicit_instructions";
    case MetricKind::ExplicitBlocks: return "explicit_blocks";
    case MetricKind::ImplicitInstructions: return "implicit_instructions";
    case MetricKind::ImplicitBlocks: return "implicit_blocks";
    case MetricKind::ManifestCount: return "manifest_count";
  }
  return "?";
}

MetricKind metric_from_name(const std::string& name) {
  if (name == "explicit_instructions") return MetricKind::ExplicitInstructions;
  if (name == "explicit_blocks") return MetricKind::ExplicitBlocks;
  if (name == "implicit_instructions") return MetricKind::ImplicitInstructions;
  if (name == "implicit_blocks") return MetricKind::ImplicitBlocks;
  if (name == "manifest_count") return MetricKind::ManifestCount;
  fail(Errc::UnknownKind, "unknown metric '" + name + "'");
}

IlpModel build_model(const DefenseGraph& graph, const std::vector<Manifest>& manifests,
                     const std::vector<Cycle>& cycles,
                     const std::vector<Requirement>& requirements,
                     const std::map<Id, double>& costs, const IlpBuildOptions& options) {
  IlpModel model;

  std::vector<const Manifest*> sorted;
  for (const auto& m : manifests) sorted.push_back(&m);
  std::ranges::sort(sorted, [](const Manifest* a, const Manifest* b) { return a->id < b->id; });

  std::map<Id, int> select_var;
  for (const Manifest* m : sorted) {
    select_var[m->id] = static_cast<int>(model.vars.size());
    model.vars.push_back({"m" + std::to_string(m->id), VarRole::ManifestSelect, m->id, 0});
  }

  // Arc variables follow the graph's (protectee, protector) order so every
  // protectee's arc block is contiguous.
  std::map<std::pair<Id, Id>, int> arc_var;  // (protector, protectee) -> var
  std::map<Id, std::vector<Id>> protectors_of;
  for (const auto& arc : graph.protection_arcs) {
    if (!select_var.count(arc.protector) || !select_var.count(arc.protectee)) {
      fail(Errc::DanglingReference, "protection arc references unknown manifest");
    }
    std::string name =
        "e_" + std::to_string(arc.protector) + "_" + std::to_string(arc.protectee);
    arc_var[{arc.protector, arc.protectee}] = static_cast<int>(model.vars.size());
    model.vars.push_back({name, VarRole::ArcActive, arc.protectee, arc.protector});
    protectors_of[arc.protectee].push_back(arc.protector);
  }

  std::map<Id, int> flag_var;
  for (const auto& [protectee, list] : protectors_of) {
    (void)list;
    flag_var[protectee] = static_cast<int>(model.vars.size());
    model.vars.push_back(
        {"f" + std::to_string(protectee), VarRole::GuardProtected, protectee, 0});
  }

  // Every member set of a dependency cycle must lose at least one element.
  int cycle_no = 0;
  for (const auto& cycle : cycles) {
    LinearConstraint row;
    row.name = "cycle_" + std::to_string(++cycle_no);
    for (Id id : cycle.manifest_ids) {
      auto it = select_var.find(id);
      if (it == select_var.end()) {
        fail(Errc::DanglingReference, "cycle references unknown manifest " + std::to_string(id));
      }
      row.terms.push_back({it->second, 1.0});
    }
    row.lo = -kInf;
    row.hi = static_cast<double>(cycle.manifest_ids.size()) - 1.0;
    model.constraints.push_back(std::move(row));
  }

  // Existence dependencies. Function/instruction requirements hold trivially
  // in a valid program, so they enter as constants.
  for (const Manifest* m : sorted) {
    int present_no = 0;
    for (const auto& c : m->constraints) {
      const auto* present = std::get_if<PresentConstraint>(&c);
      if (!present) continue;
      ++present_no;
      int constant_refs = 0;
      std::vector<int> required_vars;
      for (const auto& ref : present->required) {
        if (ref.kind == NodeKind::Manifest) {
          auto it = select_var.find(ref.id);
          if (it == select_var.end()) {
            fail(Errc::DanglingReference,
                 "present constraint references unknown manifest " + std::to_string(ref.id));
          }
          required_vars.push_back(it->second);
        } else {
          ++constant_refs;
        }
      }
      if (required_vars.empty()) {
        if (constant_refs >= present->min_count) continue;  // satisfied outright
        LinearConstraint row;
        row.name = "present_m" + std::to_string(present->dependent) + "_" +
                   std::to_string(present_no);
        row.terms.push_back({select_var.at(present->dependent), 1.0});
        row.lo = -kInf;
        row.hi = 0.0;  // requirement can never be met
        model.constraints.push_back(std::move(row));
        continue;
      }
      LinearConstraint row;
      row.name =
          "present_m" + std::to_string(present->dependent) + "_" + std::to_string(present_no);
      for (int idx : required_vars) row.terms.push_back({idx, 1.0});
      row.terms.push_back(
          {select_var.at(present->dependent), -static_cast<double>(present->min_count)});
      row.lo = -static_cast<double>(constant_refs);
      row.hi = kInf;
      model.constraints.push_back(std::move(row));
    }
  }

  // A checksum pins its protectee's bytes in place; mobilizing the same
  // function removes them. Both together can never be finalized.
  for (const Manifest* s : sorted) {
    if (s->kind != ManifestKind::Sc || !s->protectee_function) continue;
    for (const Manifest* c : sorted) {
      if (c->kind != ManifestKind::Cm || !c->negates_presence_of) continue;
      if (*c->negates_presence_of != *s->protectee_function) continue;
      LinearConstraint row;
      row.name = "exclusion_m" + std::to_string(s->id) + "_m" + std::to_string(c->id);
      row.terms.push_back({select_var.at(s->id), 1.0});
      row.terms.push_back({select_var.at(c->id), 1.0});
      row.lo = -kInf;
      row.hi = 1.0;
      model.constraints.push_back(std::move(row));
    }
  }

  // e_{j,i} = m_i AND m_j.
  for (const auto& arc : graph.protection_arcs) {
    int e = arc_var.at({arc.protector, arc.protectee});
    LinearConstraint row;
    row.name = "arc_e_" + std::to_string(arc.protector) + "_" + std::to_string(arc.protectee);
    row.terms.push_back({select_var.at(arc.protectee), 1.0});
    row.terms.push_back({select_var.at(arc.protector), 1.0});
    row.terms.push_back({e, -2.0});
    row.lo = 0.0;
    row.hi = 1.0;
    model.constraints.push_back(std::move(row));
  }

  // f_i = OR over the protectee's arc variables.
  for (const auto& [protectee, protectors] : protectors_of) {
    int f = flag_var.at(protectee);
    if (options.aggregated_flag_row) {
      LinearConstraint row;
      row.name = "flag_m" + std::to_string(protectee);
      row.terms.push_back({f, static_cast<double>(protectors.size())});
      for (Id j : protectors) row.terms.push_back({arc_var.at({j, protectee}), -1.0});
      row.lo = 0.0;
      row.hi = 1.0;
      model.constraints.push_back(std::move(row));
      continue;
    }
    LinearConstraint ub;
    ub.name = "flag_ub_m" + std::to_string(protectee);
    for (Id j : protectors) ub.terms.push_back({arc_var.at({j, protectee}), 1.0});
    ub.terms.push_back({f, -1.0});
    ub.lo = 0.0;
    ub.hi = kInf;
    model.constraints.push_back(std::move(ub));
    for (Id j : protectors) {
      LinearConstraint lb;
      lb.name = "flag_lb_m" + std::to_string(protectee) + "_" + std::to_string(j);
      lb.terms.push_back({f, 1.0});
      lb.terms.push_back({arc_var.at({j, protectee}), -1.0});
      lb.lo = 0.0;
      lb.hi = kInf;
      model.constraints.push_back(std::move(lb));
    }
  }

  std::map<Id, const Manifest*> by_id;
  for (const Manifest* m : sorted) by_id[m->id] = m;
  auto metric_coef = [&](MetricKind metric, const Manifest& m) -> double {
    switch (metric) {
      case MetricKind::ExplicitInstructions: return m.explicit_instruction_score();
      case MetricKind::ExplicitBlocks: return m.explicit_block_score();
      case MetricKind::ImplicitInstructions: return m.explicit_instruction_score();
      case MetricKind::ImplicitBlocks: return m.explicit_block_score();
      case MetricKind::ManifestCount: return 1.0;
    }
    return 0.0;
  };

  int req_no = 0;
  for (const auto& req : requirements) {
    LinearConstraint row;
    row.name = "req_" + std::to_string(++req_no);
    bool implicit = req.metric == MetricKind::ImplicitInstructions ||
                    req.metric == MetricKind::ImplicitBlocks;
    if (implicit) {
      for (const auto& [protectee, f] : flag_var) {
        double coef = metric_coef(req.metric, *by_id.at(protectee));
        if (coef != 0.0) row.terms.push_back({f, coef});
      }
    } else {
      for (const Manifest* m : sorted) {
        double coef = metric_coef(req.metric, *m);
        if (coef != 0.0) row.terms.push_back({select_var.at(m->id), coef});
      }
    }
    if (req.at_least) {
      row.lo = req.value;
      row.hi = kInf;
    } else {
      row.lo = -kInf;
      row.hi = req.value;
    }
    model.constraints.push_back(std::move(row));
  }

  if (options.maximize_coverage) {
    model.maximize = true;
    for (const Manifest* m : sorted) {
      double score = 1.0 + m->explicit_instruction_score() + m->explicit_block_score();
      model.objective.push_back({select_var.at(m->id), score});
    }
    for (const auto& [protectee, f] : flag_var) {
      const Manifest* m = by_id.at(protectee);
      double score = m->explicit_instruction_score() + m->explicit_block_score();
      if (score != 0.0) model.objective.push_back({f, score});
    }
  } else {
    model.maximize = false;
    for (const Manifest* m : sorted) {
      auto it = costs.find(m->id);
      double cost = it != costs.end() ? it->second : m->cost;
      model.objective.push_back({select_var.at(m->id), cost});
    }
  }
  return model;
}

std::string serialize_solution(const IlpModel& model, const Solution& solution) {
  nlohmann::ordered_json j;
  j["status"] = status_name(solution.status);
  j["objective_value"] = solution.objective_value;
  j["nodes_explored"] = solution.nodes_explored;
  nlohmann::ordered_json assign;
  for (std::size_t i = 0; i < model.vars.size(); ++i) {
    int v = i < solution.assignment.size() ? solution.assignment[i] : 0;
    assign[model.vars[i].name] = v;
  }
  j["assignment"] = std::move(assign);
  return j.dump(2) + "\n";
}

std::vector<std::string> validate_assignment(const IlpModel& model,
                                             const std::string& json_text) {
  nlohmann::ordered_json root;
  try {
    root = nlohmann::ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, std::string("invalid JSON: ") + e.what());
  }
  if (!root.contains("assignment") || !root["assignment"].is_object()) {
    fail(Errc::ParseError, "expected an 'assignment' object");
  }
  std::vector<int> values(model.vars.size(), 0);
  for (const auto& [name, value] : root["assignment"].items()) {
    int idx = model.var_index(name);
    if (idx < 0) fail(Errc::InconsistentInput, "unknown variable '" + name + "'");
    if (!value.is_number_integer() ||
        (value.get<int>() != 0 && value.get<int>() != 1)) {
      fail(Errc::InconsistentInput, "variable '" + name + "' must be 0 or 1");
    }
    values[static_cast<std::size_t>(idx)] = value.get<int>();
  }
  std::vector<std::string> violated;
  constexpr double eps = 1e-6;
  for (const auto& row : model.constraints) {
    double sum = 0.0;
    for (const auto& [idx, coef] : row.terms) {
      sum += coef * values[static_cast<std::size_t>(idx)];
    }
    if (sum < row.lo - eps || sum > row.hi + eps) violated.push_back(row.name);
  }
  return violated;
}

}  // namespace bulwark
