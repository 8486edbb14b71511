#include <doctest.h>

#include <set>

#include "bulwark/errors.hpp"
#include "bulwark/program.hpp"
#include "fixtures.hpp"

using namespace bulwark;

TEST_CASE("mileage fixture loads with two functions and two globals") {
  ProgramModel p = fixtures::mileage();
  REQUIRE(p.functions.size() == 2);
  CHECK(p.functions[0].name == "onWheelRotationCompleted");
  CHECK(p.functions[1].name == "incrementMileage");
  CHECK(p.functions[1].sensitive);
  ProgramIndex index(p);
  CHECK(index.globals() == std::vector<Id>{100, 101});
  CHECK(index.instruction(100).is_global());
  CHECK(index.code_instructions(1) == std::vector<Id>{20, 21, 22, 23, 24, 25});
  // the globals-only block is not a code block
  CHECK(index.code_blocks(0) == std::vector<Id>{1, 2, 3});
  CHECK(index.called_functions() == std::set<Id>{1});
  CHECK(index.block_of_instruction(10) == 3);
  CHECK(index.function_of_block(4) == 1);
}

TEST_CASE("program serialization round-trips") {
  ProgramModel p = fixtures::mileage();
  ProgramModel back = parse_program(serialize_program(p));
  CHECK(back == p);
}

TEST_CASE("normalized_freq divides by the maximum") {
  ProgramModel p;
  p.name = "freqs";
  p.functions.push_back(fixtures::flat_function(0, 0, 1, 2, 10.0));
  p.functions.push_back(fixtures::flat_function(1, 1, 10, 2, 40.0));
  p.functions.push_back(fixtures::flat_function(2, 2, 20, 2, 50.0));
  CHECK(normalized_freq(p, 0) == doctest::Approx(0.2));
  CHECK(normalized_freq(p, 1) == doctest::Approx(0.8));
  CHECK(normalized_freq(p, 2) == doctest::Approx(1.0));

  ProgramModel zero;
  zero.name = "zero";
  zero.functions.push_back(fixtures::flat_function(0, 0, 1, 2, 0.0));
  CHECK(normalized_freq(zero, 0) == 0.0);

  try {
    normalized_freq(p, 99);
    FAIL("expected UnknownBlock");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownBlock);
  }
}

TEST_CASE("generator is a pure function of its arguments") {
  ProgramModel a = generate_program(7, 5, 3, 0.6);
  ProgramModel b = generate_program(7, 5, 3, 0.6);
  CHECK(serialize_program(a) == serialize_program(b));
  CHECK(a == b);
}

TEST_CASE("generator boundary: one function, fully deterministic") {
  ProgramModel p = generate_program(7, 1, 1, 1.0);
  REQUIRE(p.functions.size() == 1);
  ProgramIndex index(p);
  for (Id id : index.code_instructions(p.functions[0].id)) {
    CHECK(index.instruction(id).deterministic);
  }
}

TEST_CASE("generator hits the requested deterministic ratio") {
  ProgramModel p = generate_program(42, 10, 4, 0.5);
  ProgramIndex index(p);
  int det = 0, total = 0;
  for (const auto& fn : p.functions) {
    for (Id id : index.code_instructions(fn.id)) {
      ++total;
      if (index.instruction(id).deterministic) ++det;
    }
  }
  double ratio = static_cast<double>(det) / total;
  CHECK(ratio >= 0.4);
  CHECK(ratio <= 0.6);
}

TEST_CASE("generator output is a valid connected program") {
  ProgramModel p = generate_program(3, 6, 2, 0.5);
  validate_program(p);  // must not throw
  ProgramIndex index(p);
  // every function receives at least one call
  for (const auto& fn : p.functions) {
    CHECK(index.called_functions().count(fn.id) == 1);
  }
}

TEST_CASE("validation rejects structural errors") {
  ProgramModel p = fixtures::mileage();

  SUBCASE("duplicate instruction id") {
    p.functions[0].blocks[1].instructions[0].id = 21;
    CHECK_THROWS_AS(validate_program(p), Error);
  }
  SUBCASE("call edge to a missing function") {
    p.call_edges.push_back({5, 42});
    try {
      validate_program(p);
      FAIL("expected ValidationError");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ValidationError);
    }
  }
  SUBCASE("entry block must belong to the function") {
    p.functions[1].entry_block = 1;
    CHECK_THROWS_AS(validate_program(p), Error);
  }
  SUBCASE("instruction ids must stay below the guard range") {
    p.functions[0].blocks[1].instructions[0].id = kGuardIdBase + 5;
    CHECK_THROWS_AS(validate_program(p), Error);
  }
}

TEST_CASE("empty function list is a valid program") {
  ProgramModel p;
  p.name = "empty";
  validate_program(p);
  CHECK(parse_program(serialize_program(p)) == p);
}

TEST_CASE("malformed json raises ParseError") {
  try {
    parse_program("{\"name\": 3}");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ParseError);
  }
  CHECK_THROWS_AS(parse_program("not json"), Error);
}
