#include <doctest.h>

#include <algorithm>
#include <map>

#include "bulwark/errors.hpp"
#include "bulwark/passes.hpp"
#include "fixtures.hpp"

using namespace bulwark;

namespace {

const Manifest& by_id(const std::vector<Manifest>& ms, Id id) {
  auto it = std::find_if(ms.begin(), ms.end(), [&](const auto& m) { return m.id == id; });
  REQUIRE(it != ms.end());
  return *it;
}

}  // namespace

TEST_CASE("mileage proposal: twelve manifests in pipeline order") {
  ProgramModel p = fixtures::mileage();
  std::vector<Manifest> ms = propose_all(p, PassConfig{});
  REQUIRE(ms.size() == 12);

  std::map<ManifestKind, int> histogram;
  for (const auto& m : ms) histogram[m.kind]++;
  CHECK(histogram[ManifestKind::Sc] == 1);
  CHECK(histogram[ManifestKind::OhHash] == 3);
  CHECK(histogram[ManifestKind::OhVerify] == 2);
  CHECK(histogram[ManifestKind::SrohHash] == 2);
  CHECK(histogram[ManifestKind::SrohVerify] == 1);
  CHECK(histogram[ManifestKind::CsivRegister] == 2);
  CHECK(histogram[ManifestKind::CsivVerify] == 1);

  // ids are assigned in proposal order
  for (std::size_t i = 0; i < ms.size(); ++i) CHECK(ms[i].id == static_cast<Id>(i + 1));

  auto costs = fixtures::mileage_costs();
  for (std::size_t i = 0; i < ms.size(); ++i) {
    CHECK(ms[i].cost == doctest::Approx(costs[i]));
  }
}

TEST_CASE("mileage checksum manifest guards the sensitive function") {
  ProgramModel p = fixtures::mileage();
  std::vector<Manifest> ms = propose_all(p, PassConfig{});
  const Manifest& sc = by_id(ms, 1);
  CHECK(sc.kind == ManifestKind::Sc);
  CHECK(sc.protectee_function == Id{1});
  CHECK(sc.protected_instruction_ids == std::set<Id>{20, 21, 22, 23, 24, 25});
  CHECK(sc.protected_block_ids == std::set<Id>{4});
  CHECK(sc.explicit_instruction_score() == 6.0);
  CHECK(sc.explicit_block_score() == 1.0);
  // checker code lands in the coldest code block of the other function
  CHECK(sc.placement_block == 3);
  REQUIRE(sc.guards.size() == 8);
  CHECK(sc.guards[6].opcode == "sc.cmp");
  CHECK(sc.guards[7].placeholder);
  CHECK(sc.guards[7].size_bytes == 8);

  bool has_order = false, has_present = false, has_preserve = false;
  for (const auto& c : sc.constraints) {
    if (const auto* order = std::get_if<OrderConstraint>(&c)) {
      has_order = true;
      CHECK(order->before == NodeRef::function(1));
      CHECK(order->after == NodeRef::manifest(1));
    } else if (const auto* present = std::get_if<PresentConstraint>(&c)) {
      has_present = true;
      CHECK(present->dependent == 1);
      CHECK(present->required == std::vector<NodeRef>{NodeRef::function(1)});
    } else if (const auto* preserve = std::get_if<PreserveConstraint>(&c)) {
      has_preserve = true;
      CHECK(preserve->instruction_ids == std::vector<Id>{sc.guards[7].id});
    }
  }
  CHECK(has_order);
  CHECK(has_present);
  CHECK(has_preserve);
}

TEST_CASE("mileage hash families use the expected variables and runs") {
  ProgramModel p = fixtures::mileage();
  std::vector<Manifest> ms = propose_all(p, PassConfig{});

  // shared accumulator for the whole-run family, per-function variable otherwise
  for (Id id : {2, 3, 4, 5, 6}) CHECK(by_id(ms, id).hash_variable == Id{100});
  for (Id id : {7, 8, 9}) CHECK(by_id(ms, id).hash_variable == Id{101});

  CHECK(by_id(ms, 2).protected_instruction_ids == std::set<Id>{7, 8});
  CHECK(by_id(ms, 3).protected_instruction_ids == std::set<Id>{10});
  CHECK(by_id(ms, 4).protected_instruction_ids == std::set<Id>{12});
  // branch condition and constant store, both in nondeterministic blocks
  CHECK(by_id(ms, 7).protected_instruction_ids == std::set<Id>{3});
  CHECK(by_id(ms, 8).protected_instruction_ids == std::set<Id>{5});

  // verifies protect nothing directly; they carry constraints
  CHECK(by_id(ms, 5).protected_instruction_ids.empty());
  CHECK(by_id(ms, 6).protected_instruction_ids.empty());
  CHECK(by_id(ms, 9).protected_instruction_ids.empty());
}

TEST_CASE("mileage call-path tokens cover the route into the sensitive function") {
  ProgramModel p = fixtures::mileage();
  std::vector<Manifest> ms = propose_all(p, PassConfig{});

  const Manifest& reg0 = by_id(ms, 10);
  const Manifest& reg1 = by_id(ms, 11);
  CHECK(reg0.kind == ManifestKind::CsivRegister);
  CHECK(reg0.placement_block == 1);  // entry of the caller
  CHECK(reg1.placement_block == 4);  // entry of the sensitive function
  CHECK(reg0.token.has_value());
  CHECK(reg1.token.has_value());
  CHECK(*reg0.token != *reg1.token);

  const Manifest& verify = by_id(ms, 12);
  CHECK(verify.kind == ManifestKind::CsivVerify);
  CHECK(verify.protected_instruction_ids == std::set<Id>{20, 21, 22, 23, 24, 25});
  CHECK(verify.protected_block_ids == std::set<Id>{4});
  const auto* present = std::get_if<PresentConstraint>(&verify.constraints.at(0));
  REQUIRE(present != nullptr);
  CHECK(present->min_count == 2);  // both tokens on the only path
  CHECK(present->required ==
        std::vector<NodeRef>{NodeRef::manifest(10), NodeRef::manifest(11)});
}

TEST_CASE("proposal is deterministic for a fixed seed") {
  ProgramModel p = fixtures::mileage();
  auto a = propose_all(p, PassConfig{});
  auto b = propose_all(p, PassConfig{});
  CHECK(serialize_manifests(a) == serialize_manifests(b));
}

TEST_CASE("hash pass yields nothing without deterministic instructions") {
  ProgramModel p;
  p.name = "nondet";
  p.functions.push_back(fixtures::flat_function(0, 0, 1, 4));
  validate_program(p);
  CHECK(propose(Pass::Oh, p, PassConfig{}).empty());
}

TEST_CASE("disabled passes refuse to propose") {
  ProgramModel p = fixtures::mileage();
  try {
    propose(Pass::Cm, p, PassConfig{});  // CM is opt-in
    FAIL("expected DisabledPass");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DisabledPass);
  }
}

TEST_CASE("applying the checksum manifest inserts guards and pins presence") {
  ProgramModel p = fixtures::mileage();
  std::vector<Manifest> ms = propose_all(p, PassConfig{});
  ProgramModel out = apply(by_id(ms, 1), p);

  CHECK(p == fixtures::mileage());  // input untouched
  const auto& b3 = out.functions[0].blocks[3];
  REQUIRE(b3.guards.size() == 8);
  CHECK(b3.guards[0].manifest_id == 1);
  CHECK(b3.guards[7].preserved);  // placeholder marked by the Preserve constraint
  CHECK(out.functions[1].presence_pinned);
}

TEST_CASE("mobilization conflicts with a pinned function") {
  ProgramModel p = fixtures::mileage();
  PassConfig cfg;
  cfg.enabled.insert(Pass::Cm);
  std::vector<Manifest> ms = propose_all(p, cfg);
  auto cm_it = std::find_if(ms.begin(), ms.end(),
                            [](const auto& m) { return m.kind == ManifestKind::Cm; });
  REQUIRE(cm_it != ms.end());
  CHECK(cm_it->negates_presence_of == Id{1});
  CHECK(cm_it->guards.empty());

  ProgramModel mobilized = apply(*cm_it, p);
  CHECK(mobilized.functions[1].mobilized);

  ProgramModel pinned = apply(by_id(ms, 1), p);  // checksum pins function 1
  try {
    apply(*cm_it, pinned);
    FAIL("expected PresenceViolation");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::PresenceViolation);
  }
}

TEST_CASE("opcode rewriting honors preserve marks") {
  ProgramModel p = fixtures::mileage();
  PassConfig cfg;
  cfg.enabled.insert(Pass::Obf);
  std::vector<Manifest> ms = propose_all(p, cfg);
  auto obf_it = std::find_if(ms.begin(), ms.end(), [](const auto& m) {
    return m.kind == ManifestKind::Obf && m.protectee_function == Id{0};
  });
  REQUIRE(obf_it != ms.end());

  ProgramModel guarded = apply(by_id(ms, 1), p);  // places preserved guards in block 3
  ProgramModel rewritten = apply(*obf_it, guarded);

  const auto& b1 = rewritten.functions[0].blocks[1];
  CHECK(b1.instructions[0].opcode == "obf.load");
  // globals are data, not code
  CHECK(rewritten.functions[0].blocks[0].instructions[0].opcode == "global");
  const auto& b3 = rewritten.functions[0].blocks[3];
  bool saw_rewritten_guard = false, saw_preserved = false;
  for (const auto& g : b3.guards) {
    if (g.manifest_id != 1) continue;
    if (g.preserved) {
      saw_preserved = true;
      CHECK(g.opcode == "sc.expected");
    } else if (g.opcode.rfind("obf.", 0) == 0) {
      saw_rewritten_guard = true;
    }
  }
  CHECK(saw_preserved);
  CHECK(saw_rewritten_guard);
  // the other function is untouched
  CHECK(rewritten.functions[1].blocks[0].instructions[0].opcode == "load");
}

TEST_CASE("manifest serialization round-trips") {
  ProgramModel p = fixtures::mileage();
  std::vector<Manifest> ms = propose_all(p, PassConfig{});
  std::vector<Manifest> back = parse_manifests(serialize_manifests(ms));
  CHECK(back == ms);
}

TEST_CASE("cost model multiplies weight, heat, and guard count") {
  PassConfig cfg;
  CHECK(cost_model(ManifestKind::Sc, 0.005, 8, cfg) == doctest::Approx(80.4));
  CHECK(cost_model(ManifestKind::OhHash, 0.005, 2, cfg) == doctest::Approx(4.02));
  // guard-free kinds still cost their weight
  CHECK(cost_model(ManifestKind::Cm, 0.5, 0, cfg) == doctest::Approx(60.0));
  cfg.kind_weight[ManifestKind::Sc] = 1.0;
  CHECK(cost_model(ManifestKind::Sc, 0.0, 1, cfg) == doctest::Approx(1.0));
}

TEST_CASE("kind and pass names round-trip") {
  for (auto kind : {ManifestKind::Sc, ManifestKind::OhHash, ManifestKind::OhVerify,
                    ManifestKind::SrohHash, ManifestKind::SrohVerify,
                    ManifestKind::CsivRegister, ManifestKind::CsivVerify, ManifestKind::Cm,
                    ManifestKind::Obf}) {
    CHECK(kind_from_name(kind_name(kind)) == kind);
  }
  for (auto pass : pass_order()) {
    CHECK(pass_from_name(pass_name(pass)) == pass);
  }
  try {
    kind_from_name("BOGUS");
    FAIL("expected UnknownKind");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownKind);
  }
}
