#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include "bulwark/ilp.hpp"

namespace bulwark {

namespace {

constexpr double kEps = 1e-6;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Minimization-form search state over a fixed model.
struct Search {
  const IlpModel& model;
  std::vector<double> objective;  // dense, minimization sense
  std::vector<std::vector<std::pair<int, double>>> rows_of_var;  // var -> (row, coef)
  std::chrono::steady_clock::time_point deadline;

  std::vector<int> best;
  double best_value = kInf;
  bool have_best = false;
  bool timed_out = false;
  std::int64_t nodes = 0;

  explicit Search(const IlpModel& m, double time_limit_seconds)
      : model(m),
        objective(m.vars.size(), 0.0),
        rows_of_var(m.vars.size()),
        deadline(std::chrono::steady_clock::now() +
                 std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                     std::chrono::duration<double>(time_limit_seconds))) {
    for (const auto& [idx, coef] : m.objective) {
      objective[static_cast<std::size_t>(idx)] += m.maximize ? -coef : coef;
    }
    for (std::size_t r = 0; r < m.constraints.size(); ++r) {
      for (const auto& [idx, coef] : m.constraints[r].terms) {
        rows_of_var[static_cast<std::size_t>(idx)].push_back({static_cast<int>(r), coef});
      }
    }
  }

  bool expired() {
    if (timed_out) return true;
    if ((nodes & 0x3f) == 0 && std::chrono::steady_clock::now() > deadline) timed_out = true;
    return timed_out;
  }

  // Tightest achievable range of one row under the partial assignment.
  std::pair<double, double> row_range(const LinearConstraint& row,
                                      const std::vector<int>& fixed) const {
    double lo = 0.0, hi = 0.0;
    for (const auto& [idx, coef] : row.terms) {
      int v = fixed[static_cast<std::size_t>(idx)];
      if (v >= 0) {
        lo += coef * v;
        hi += coef * v;
      } else {
        lo += std::min(0.0, coef);
        hi += std::max(0.0, coef);
      }
    }
    return {lo, hi};
  }

  // Fixpoint of row-based pruning and unit propagation. Returns false when the
  // partial assignment cannot be completed.
  bool propagate(std::vector<int>& fixed) const {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& row : model.constraints) {
        auto [lo, hi] = row_range(row, fixed);
        if (lo > row.hi + kEps || hi < row.lo - kEps) return false;
        for (const auto& [idx, coef] : row.terms) {
          auto i = static_cast<std::size_t>(idx);
          if (fixed[i] >= 0 || coef == 0.0) continue;
          double rest_lo = lo - std::min(0.0, coef);
          double rest_hi = hi - std::max(0.0, coef);
          bool zero_ok = rest_lo <= row.hi + kEps && rest_hi >= row.lo - kEps;
          bool one_ok =
              rest_lo + coef <= row.hi + kEps && rest_hi + coef >= row.lo - kEps;
          if (!zero_ok && !one_ok) return false;
          if (zero_ok != one_ok) {
            fixed[i] = one_ok ? 1 : 0;
            changed = true;
          }
        }
      }
    }
    return true;
  }

  double bound(const std::vector<int>& fixed) const {
    double b = 0.0;
    for (std::size_t i = 0; i < fixed.size(); ++i) {
      if (fixed[i] == 1) {
        b += objective[i];
      } else if (fixed[i] < 0) {
        b += std::min(0.0, objective[i]);
      }
    }
    return b;
  }

  // Min-cost completion of the partial assignment; free vars with
  // non-negative cost drop to zero.
  std::vector<int> preferred(const std::vector<int>& fixed) const {
    std::vector<int> full(fixed);
    for (std::size_t i = 0; i < full.size(); ++i) {
      if (full[i] < 0) full[i] = objective[i] < 0.0 ? 1 : 0;
    }
    return full;
  }

  int first_violated_row(const std::vector<int>& full) const {
    for (std::size_t r = 0; r < model.constraints.size(); ++r) {
      const auto& row = model.constraints[r];
      double sum = 0.0;
      for (const auto& [idx, coef] : row.terms) {
        sum += coef * full[static_cast<std::size_t>(idx)];
      }
      if (sum < row.lo - kEps || sum > row.hi + kEps) return static_cast<int>(r);
    }
    return -1;
  }

  void offer(const std::vector<int>& full) {
    double value = 0.0;
    for (std::size_t i = 0; i < full.size(); ++i) value += objective[i] * full[i];
    if (!have_best || value < best_value - kEps) {
      best = full;
      best_value = value;
      have_best = true;
    }
  }

  void dfs(std::vector<int>& fixed) {
    ++nodes;
    if (expired()) return;
    if (!propagate(fixed)) return;
    if (have_best && bound(fixed) > best_value + kEps) return;

    std::vector<int> full = preferred(fixed);
    int violated = first_violated_row(full);
    if (violated < 0) {
      // The completion realizes this subtree's bound, so the node is closed.
      offer(full);
      return;
    }

    int branch_var = -1;
    for (const auto& [idx, coef] : model.constraints[static_cast<std::size_t>(violated)].terms) {
      (void)coef;
      if (fixed[static_cast<std::size_t>(idx)] < 0 && (branch_var < 0 || idx < branch_var)) {
        branch_var = idx;
      }
    }
    if (branch_var < 0) {
      for (std::size_t i = 0; i < fixed.size() && branch_var < 0; ++i) {
        if (fixed[i] < 0) branch_var = static_cast<int>(i);
      }
    }
    if (branch_var < 0) return;  // fully fixed yet violated: infeasible leaf

    auto b = static_cast<std::size_t>(branch_var);
    for (int value : {0, 1}) {
      std::vector<int> child(fixed);
      child[b] = value;
      dfs(child);
      if (timed_out) return;
    }
  }
};

}  // namespace

Solution solve(const IlpModel& model, double time_limit_seconds) {
  Search search(model, time_limit_seconds);
  std::vector<int> root(model.vars.size(), -1);
  search.dfs(root);

  Solution solution;
  solution.nodes_explored = search.nodes;
  if (search.have_best) {
    solution.assignment = search.best;
    double value = search.best_value;
    solution.objective_value = model.maximize ? -value : value;
    solution.status = search.timed_out ? SolveStatus::TimedOut : SolveStatus::Optimal;
  } else {
    solution.assignment.assign(model.vars.size(), 0);
    solution.objective_value = 0.0;
    solution.status = search.timed_out ? SolveStatus::TimedOut : SolveStatus::Infeasible;
  }
  return solution;
}

}  // namespace bulwark
