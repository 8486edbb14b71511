#include "bulwark/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "bulwark/composer.hpp"
#include "bulwark/defense_graph.hpp"
#include "bulwark/errors.hpp"
#include "bulwark/passes.hpp"

namespace bulwark {

namespace {

// Manifests whose guards end up witnessed by some other selected check.
std::set<Id> flagged_manifests(const std::vector<Manifest>& selected,
                               const ProgramModel& program) {
  std::set<Id> flagged;
  for (const auto& arc : build_graph(selected, program).protection_arcs) {
    flagged.insert(arc.protectee);
  }
  return flagged;
}

double proposal_score(const std::vector<Manifest>& manifests, const std::set<Id>& ids,
                      bool blocks) {
  double sum = 0.0;
  for (const auto& m : manifests) {
    if (!ids.contains(m.id)) continue;
    sum += blocks ? m.explicit_block_score() : m.explicit_instruction_score();
  }
  return sum;
}

}  // namespace

MetricsReport compute_metrics(const CompositionResult& result, const ProgramModel& program) {
  MetricsReport report;
  const auto& selected = result.selected;
  const auto& protected_program = result.protected_program;

  std::set<Id> instr_union, block_union;
  std::map<Id, int> witnesses;
  for (const auto& m : selected) {
    auto instrs = effective_instructions(m, selected, protected_program);
    auto blocks = effective_blocks(m, selected, protected_program);
    report.explicit_instr_sum += static_cast<double>(instrs.size());
    report.explicit_block_sum += static_cast<double>(blocks.size());
    instr_union.insert(instrs.begin(), instrs.end());
    block_union.insert(blocks.begin(), blocks.end());
    for (Id id : instrs) ++witnesses[id];
    report.estimated_cost += m.cost;
  }
  report.explicit_instr_union = static_cast<double>(instr_union.size());
  report.explicit_block_union = static_cast<double>(block_union.size());

  std::set<Id> flagged = flagged_manifests(selected, program);
  report.implicit_instr = proposal_score(selected, flagged, false);
  report.implicit_block = proposal_score(selected, flagged, true);

  for (const auto& [id, count] : witnesses) {
    (void)id;
    ++report.connectivity_histogram[count];
  }
  report.manifest_count = static_cast<int>(selected.size());
  return report;
}

CompositionResult run_baseline(const ProgramModel& program, const CompositionConfig& config) {
  validate_program(program);
  CompositionResult result;
  result.proposal = propose_all(program, config.pass_config);
  result.initial_cycles = find_cycles(build_graph(result.proposal, program));

  std::vector<Manifest> selected = result.proposal;
  auto drop = [&](Id id) {
    std::erase_if(selected, [&](const Manifest& m) { return m.id == id; });
  };

  // Break each cycle by sacrificing its cheapest coverage, larger id on ties.
  for (;;) {
    auto cycles = find_cycles(build_graph(selected, program));
    if (cycles.empty()) break;
    std::map<Id, const Manifest*> by_id;
    for (const auto& m : selected) by_id[m.id] = &m;
    const Cycle& cycle = cycles.front();
    Id victim = -1;
    double victim_score = 0.0;
    for (Id id : cycle.manifest_ids) {
      const Manifest* m = by_id.at(id);
      double score = m->explicit_instruction_score() + m->explicit_block_score();
      if (victim < 0 || score < victim_score || (score == victim_score && id > victim)) {
        victim = id;
        victim_score = score;
      }
    }
    drop(victim);
  }

  // Pinning beats mobilization when both claim a function.
  for (;;) {
    Id victim = -1;
    for (const auto& c : selected) {
      if (c.kind != ManifestKind::Cm || !c.negates_presence_of) continue;
      for (const auto& s : selected) {
        if (s.kind == ManifestKind::Sc && s.protectee_function == c.negates_presence_of) {
          victim = c.id;
        }
      }
      if (victim >= 0) break;
    }
    if (victim < 0) break;
    drop(victim);
  }

  // Existence dependencies: dropping can cascade.
  for (bool changed = true; changed;) {
    changed = false;
    std::set<Id> ids;
    for (const auto& m : selected) ids.insert(m.id);
    for (const auto& m : selected) {
      for (const auto& c : m.constraints) {
        const auto* present = std::get_if<PresentConstraint>(&c);
        if (!present) continue;
        int have = 0;
        for (const auto& ref : present->required) {
          if (ref.kind != NodeKind::Manifest || ids.contains(ref.id)) ++have;
        }
        if (have < present->min_count) {
          drop(m.id);
          changed = true;
          break;
        }
      }
      if (changed) break;
    }
  }

  std::ranges::sort(selected, [](const Manifest& a, const Manifest& b) { return a.id < b.id; });
  result.selected = selected;
  for (const auto& m : selected) {
    result.selected_ids.push_back(m.id);
    result.objective_value += m.cost;
  }
  DefenseGraph selected_graph = build_graph(result.selected, program);
  result.finalization_order = finalization_order(selected_graph, result.selected);
  result.protected_program = apply_all(result.selected, program);
  finalize_and_verify(result.protected_program, result.selected, result.finalization_order);
  result.metrics = compute_metrics(result, program);
  return result;
}

ComparisonRecord compare(const ProgramModel& program, const CompositionConfig& config) {
  CompositionResult base = run_baseline(program, config);

  std::set<Id> base_ids(base.selected_ids.begin(), base.selected_ids.end());
  std::set<Id> base_flagged = flagged_manifests(base.selected, program);
  CompositionConfig opt_config = config;
  opt_config.two_phase = false;
  opt_config.requirements = {
      {MetricKind::ExplicitInstructions, true, proposal_score(base.selected, base_ids, false)},
      {MetricKind::ExplicitBlocks, true, proposal_score(base.selected, base_ids, true)},
      {MetricKind::ImplicitInstructions, true,
       proposal_score(base.selected, base_flagged, false)},
      {MetricKind::ImplicitBlocks, true, proposal_score(base.selected, base_flagged, true)},
  };
  CompositionResult opt = compose_from_proposal(program, base.proposal, opt_config);

  ComparisonRecord record;
  record.program = program.name;
  record.manifests_base = static_cast<int>(base.selected.size());
  record.manifests_opt = static_cast<int>(opt.selected.size());
  record.cost_base = base.objective_value;
  record.cost_opt = opt.objective_value;
  record.decrease_pct =
      record.cost_base > 0.0 ? 100.0 * (1.0 - record.cost_opt / record.cost_base) : 0.0;
  std::set<Id> opt_ids(opt.selected_ids.begin(), opt.selected_ids.end());
  record.explicit_instr = proposal_score(opt.selected, opt_ids, false);
  record.implicit_instr =
      proposal_score(opt.selected, flagged_manifests(opt.selected, program), false);
  return record;
}

namespace {

std::string csv_double(double v) {
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace

std::string comparison_csv(const std::vector<ComparisonRecord>& records) {
  std::ostringstream out;
  out << "program,manifests_base,manifests_opt,cost_base,cost_opt,decrease_pct,"
         "explicit_instr,implicit_instr\n";
  for (const auto& r : records) {
    out << r.program << ',' << r.manifests_base << ',' << r.manifests_opt << ','
        << csv_double(r.cost_base) << ',' << csv_double(r.cost_opt) << ','
        << csv_double(r.decrease_pct) << ',' << csv_double(r.explicit_instr) << ','
        << csv_double(r.implicit_instr) << '\n';
  }
  return out.str();
}

}  // namespace bulwark
