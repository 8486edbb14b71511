#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "bulwark/composer.hpp"
#include "bulwark/ilp.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int code = -1;
  std::string out;  // stdout and stderr interleaved
};

CmdResult run_cli(const std::string& args) {
  std::string cmd = std::string("\"") + BULWARK_CLI_PATH + "\" " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult r;
  char buf[4096];
  while (size_t n = fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path work_dir() {
  fs::path dir = fs::temp_directory_path() / "bulwark_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  REQUIRE(out.good());
}

}  // namespace

TEST_CASE("gen -> compose -> simulate round trip") {
  fs::path dir = work_dir();
  fs::path prog = dir / "gen5.json";
  CmdResult gen = run_cli("gen --seed 5 --functions 2 --blocks 2 --det-ratio 0.5 -o \"" +
                          prog.string() + "\"");
  CHECK(gen.code == 0);
  CHECK(gen.out.find("wrote") != std::string::npos);

  fs::path out = dir / "gen5_out";
  CmdResult composed = run_cli("compose \"" + prog.string() + "\" -o \"" + out.string() + "\"");
  CHECK(composed.code == 0);
  CHECK(fs::exists(out / "protected.json"));
  CHECK(fs::exists(out / "report.json"));

  CmdResult sim = run_cli("simulate \"" + (out / "protected.json").string() + "\"");
  CHECK(sim.code == 0);
  CHECK(sim.out == "PASS\n");
}

TEST_CASE("compose summarizes the mileage selection") {
  fs::path out = work_dir() / "mileage_out";
  CmdResult r =
      run_cli("compose \"" + fixtures::data_path("mileage.json") + "\" -o \"" + out.string() + "\"");
  CHECK(r.code == 0);
  CHECK(r.out.find("12 proposed, 11 selected") != std::string::npos);
  CHECK(r.out.find("cycles detected: 1") != std::string::npos);
}

TEST_CASE("graph writes DOT and prints a summary") {
  fs::path dot = work_dir() / "mileage.dot";
  CmdResult r =
      run_cli("graph \"" + fixtures::data_path("mileage.json") + "\" --dot \"" + dot.string() + "\"");
  CHECK(r.code == 0);
  CHECK(r.out.find("\"manifest_nodes\": 12") != std::string::npos);
  CHECK(slurp(dot).find("digraph") != std::string::npos);
}

TEST_CASE("exported LP text parses back") {
  fs::path lp = work_dir() / "mileage.lp";
  CmdResult r =
      run_cli("export-lp \"" + fixtures::data_path("mileage.json") + "\" -o \"" + lp.string() + "\"");
  CHECK(r.code == 0);
  bulwark::IlpModel model = bulwark::parse_lp(slurp(lp));
  std::string claim = std::to_string(model.vars.size()) + " variables";
  CHECK(r.out.find(claim) != std::string::npos);
  CHECK(model.vars.size() >= 12);
}

TEST_CASE("tamper lists the tripped checks") {
  fs::path dir = work_dir();
  fs::path out = dir / "tamper_out";
  CmdResult composed =
      run_cli("compose \"" + fixtures::data_path("mileage.json") + "\" -o \"" + out.string() + "\"");
  REQUIRE(composed.code == 0);
  std::string bundle = (out / "protected.json").string();

  CHECK(run_cli("tamper \"" + bundle + "\" --inst 21").out == "1 12\n");
  CHECK(run_cli("tamper \"" + bundle + "\" --inst 7").out == "2 5\n");
  CHECK(run_cli("tamper \"" + bundle + "\" --inst 9").out == "\n");
}

TEST_CASE("simulate flags a stale finalization order") {
  fs::path dir = work_dir();
  fs::path out = dir / "stale_out";
  CmdResult composed =
      run_cli("compose \"" + fixtures::data_path("mileage.json") + "\" -o \"" + out.string() + "\"");
  REQUIRE(composed.code == 0);

  bulwark::ProtectedBundle bundle = bulwark::parse_bundle(slurp(out / "protected.json"));
  REQUIRE(bundle.finalization_order == fixtures::mileage_order());
  std::swap(bundle.finalization_order[9], bundle.finalization_order[10]);  // 1 <-> 5
  fs::path stale = dir / "stale.json";
  spit(stale, bulwark::serialize_bundle(bundle));

  CmdResult sim = run_cli("simulate \"" + stale.string() + "\"");
  CHECK(sim.code == 1);
  CHECK(sim.out == "FAIL m5\n");
}

TEST_CASE("errors exit with code 2 and an ERROR line") {
  SUBCASE("missing input file") {
    CmdResult r = run_cli("compose /no/such/program.json");
    CHECK(r.code == 2);
    CHECK(r.out.find("ERROR") != std::string::npos);
  }
  SUBCASE("unknown config key") {
    fs::path cfg = work_dir() / "bad_config.json";
    spit(cfg, "{\"bogus\": 1}");
    CmdResult r = run_cli("compose \"" + fixtures::data_path("mileage.json") + "\" --config \"" +
                          cfg.string() + "\"");
    CHECK(r.code == 2);
    CHECK(r.out.find("unknown config key") != std::string::npos);
  }
  SUBCASE("unknown flag") {
    CmdResult r = run_cli("gen --frobnicate -o x.json");
    CHECK(r.code == 2);
    CHECK(r.out.find("ERROR USAGE") != std::string::npos);
  }
  SUBCASE("help exits cleanly") {
    CmdResult r = run_cli("--help");
    CHECK(r.code == 0);
    CHECK(r.out.find("compose") != std::string::npos);
  }
}
