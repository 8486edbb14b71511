#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <limits>

#include "bulwark/errors.hpp"
#include "bulwark/ilp.hpp"
#include "bulwark/passes.hpp"
#include "fixtures.hpp"
#include "reference_solver.hpp"

using namespace bulwark;
using fixtures::brute_force;
using fixtures::BruteResult;
using fixtures::flag_fixture;
using fixtures::FlagFixture;
using fixtures::pin;

namespace {

IlpModel mileage_model(const std::vector<Requirement>& reqs = {},
                       IlpBuildOptions options = {}) {
  ProgramModel p = fixtures::mileage();
  std::vector<Manifest> ms = propose_all(p, PassConfig{});
  DefenseGraph g = build_graph(ms, p);
  std::map<Id, double> costs;
  for (const auto& m : ms) costs[m.id] = m.cost;
  return build_model(g, ms, find_cycles(g), reqs, costs, options);
}

}  // namespace

TEST_CASE("mileage model carries the cycle row and all variable families") {
  IlpModel model = mileage_model();
  for (Id id = 1; id <= 12; ++id) CHECK(model.var_index("m" + std::to_string(id)) >= 0);
  for (const char* name : {"e_2_1", "e_3_1", "e_4_1", "e_1_6", "e_1_11", "e_1_12"}) {
    CHECK(model.var_index(name) >= 0);
  }
  for (const char* name : {"f1", "f6", "f11", "f12"}) CHECK(model.var_index(name) >= 0);

  bool found_cycle_row = false;
  int m1 = model.var_index("m1"), m6 = model.var_index("m6");
  for (const auto& row : model.constraints) {
    if (row.name.rfind("cycle_", 0) != 0) continue;
    found_cycle_row = true;
    CHECK(row.terms.size() == 2);
    CHECK(row.hi == 1.0);
    for (const auto& [idx, coef] : row.terms) {
      CHECK(coef == 1.0);
      CHECK((idx == m1 || idx == m6));
    }
  }
  CHECK(found_cycle_row);
}

TEST_CASE("solver picks the cheaper side of a two-manifest conflict") {
  IlpModel model;
  model.vars.push_back({"m1", VarRole::ManifestSelect, 1, 0});
  model.vars.push_back({"m2", VarRole::ManifestSelect, 2, 0});
  model.constraints.push_back({"cycle_0", {{0, 1.0}, {1, 1.0}}, 0.0, 1.0});
  model.constraints.push_back(
      {"req_count", {{0, 1.0}, {1, 1.0}}, 1.0, std::numeric_limits<double>::infinity()});
  model.objective = {{0, 1.0}, {1, 2.0}};

  Solution s = solve(model);
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(s.objective_value == doctest::Approx(1.0));
  CHECK(s.value(model, "m1") == 1);
  CHECK(s.value(model, "m2") == 0);
}

TEST_CASE("contradictory bounds are infeasible") {
  IlpModel model;
  model.vars.push_back({"m1", VarRole::ManifestSelect, 1, 0});
  model.constraints.push_back({"ge", {{0, 1.0}}, 1.0, std::numeric_limits<double>::infinity()});
  model.constraints.push_back({"le", {{0, 1.0}}, -std::numeric_limits<double>::infinity(), 0.0});
  model.objective = {{0, 1.0}};
  CHECK(solve(model).status == SolveStatus::Infeasible);
}

TEST_CASE("selection caps force hard search; zero budget times out") {
  IlpModel model;
  for (int i = 0; i < 20; ++i) {
    model.vars.push_back({"m" + std::to_string(i + 1), VarRole::ManifestSelect, i + 1, 0});
    model.objective.push_back({i, -1.0});
  }
  LinearConstraint cap{"cap", {}, -std::numeric_limits<double>::infinity(), 10.0};
  for (int i = 0; i < 20; ++i) cap.terms.push_back({i, 1.0});
  model.constraints.push_back(cap);

  Solution full = solve(model, 10.0);
  CHECK(full.status == SolveStatus::Optimal);
  CHECK(full.objective_value == doctest::Approx(-10.0));

  Solution rushed = solve(model, 0.0);
  CHECK(rushed.status == SolveStatus::TimedOut);
}

TEST_CASE("solver output agrees with exhaustive enumeration") {
  for (int i = 1; i <= 10; ++i) {
    ProgramModel p = generate_program(i, 2, 1, i % 2 == 0 ? 0.2 : 0.4);
    PassConfig pc;
    pc.seed = static_cast<std::uint64_t>(i);
    std::vector<Manifest> ms = propose_all(p, pc);
    DefenseGraph g = build_graph(ms, p);
    std::map<Id, double> costs;
    double total_score = 0.0;
    for (const auto& m : ms) {
      costs[m.id] = m.cost;
      total_score += m.explicit_instruction_score();
    }
    std::vector<Requirement> reqs = {
        {MetricKind::ExplicitInstructions, true, 0.5 * total_score}};
    IlpModel model = build_model(g, ms, find_cycles(g), reqs, costs);

    Solution s = solve(model);
    BruteResult ref = brute_force(model);
    if (ref.feasible) {
      REQUIRE(s.status == SolveStatus::Optimal);
      CHECK(s.objective_value == doctest::Approx(ref.objective).epsilon(1e-9));
    } else {
      CHECK(s.status == SolveStatus::Infeasible);
    }
  }
}

TEST_CASE("default flag rows realize an exact OR; the aggregated form over-constrains") {
  FlagFixture fx = flag_fixture();

  SUBCASE("one active arc keeps the flag high") {
    IlpModel model = build_model(fx.graph, fx.manifests, {}, {}, fx.costs);
    pin(model, "m1", 1);
    pin(model, "m2", 1);
    pin(model, "m3", 0);
    pin(model, "m4", 0);
    Solution s = solve(model);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.value(model, "e_2_1") == 1);
    CHECK(s.value(model, "e_3_1") == 0);
    CHECK(s.value(model, "f1") == 1);
  }

  SUBCASE("the aggregated row rejects partially active arc sets") {
    IlpBuildOptions options;
    options.aggregated_flag_row = true;
    IlpModel model = build_model(fx.graph, fx.manifests, {}, {}, fx.costs, options);
    pin(model, "m1", 1);
    pin(model, "m2", 1);
    pin(model, "m3", 0);
    pin(model, "m4", 0);
    CHECK(solve(model).status == SolveStatus::Infeasible);
  }
}

TEST_CASE("requirement senses map to row bounds") {
  std::vector<Requirement> reqs = {{MetricKind::ManifestCount, true, 11.0},
                                   {MetricKind::ExplicitBlocks, false, 100.0}};
  IlpModel model = mileage_model(reqs);
  int found = 0;
  for (const auto& row : model.constraints) {
    if (row.name.rfind("req_", 0) != 0) continue;
    ++found;
    if (row.lo == 11.0) CHECK(row.hi == std::numeric_limits<double>::infinity());
    if (row.hi == 100.0) CHECK(row.lo == -std::numeric_limits<double>::infinity());
  }
  CHECK(found == 2);
}

TEST_CASE("lp text round-trips both objective senses") {
  IlpModel min_model = mileage_model();
  CHECK(models_equivalent(min_model, parse_lp(export_lp(min_model))));

  IlpBuildOptions cover;
  cover.maximize_coverage = true;
  IlpModel max_model = mileage_model({}, cover);
  CHECK(max_model.maximize);
  CHECK(models_equivalent(max_model, parse_lp(export_lp(max_model))));

  // fractional and negative coefficients survive the trip exactly
  IlpModel tweaked = min_model;
  tweaked.objective[0].second = 0.1 + 0.2;  // not representable in binary
  tweaked.constraints[0].terms[0].second = -3.75;
  CHECK(models_equivalent(tweaked, parse_lp(export_lp(tweaked))));
}

TEST_CASE("lp parser rejects malformed input") {
  try {
    parse_lp("Minimize\n obj: m1\nSubject To\n r: m1 + zz >= 1\nBinary\n m1\nEnd\n");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ParseError);
  }
  CHECK_THROWS_AS(parse_lp("greetings"), Error);
}

TEST_CASE("external assignments are validated row by row") {
  IlpModel model = mileage_model();
  Solution s = solve(model);
  REQUIRE(s.status == SolveStatus::Optimal);
  CHECK(validate_assignment(model, serialize_solution(model, s)).empty());

  // all manifests on violates the cycle row
  std::string everything = "{\"assignment\": {";
  for (Id id = 1; id <= 12; ++id) {
    everything += "\"m" + std::to_string(id) + "\": 1";
    everything += (id < 12) ? "," : "";
  }
  everything += "}}";
  std::vector<std::string> violated = validate_assignment(model, everything);
  bool has_cycle = false;
  for (const auto& name : violated) {
    if (name.rfind("cycle_", 0) == 0) has_cycle = true;
  }
  CHECK(has_cycle);

  try {
    validate_assignment(model, "{\"assignment\": {\"nosuch\": 1}}");
    FAIL("expected InconsistentInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InconsistentInput);
  }
}
