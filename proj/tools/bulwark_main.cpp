// Command-line front end: generate synthetic programs, compose protections,
// inspect the defense graph, export the selection ILP, and drive the
// finalization/tamper simulator.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bulwark/composer.hpp"
#include "bulwark/defense_graph.hpp"
#include "bulwark/errors.hpp"
#include "bulwark/ilp.hpp"
#include "bulwark/metrics.hpp"
#include "bulwark/passes.hpp"
#include "bulwark/program.hpp"

namespace {

using bulwark::Errc;
using bulwark::fail;
using ordered_json = nlohmann::ordered_json;

std::string fmt_double(double v) {
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot write " + path);
  out << content;
  if (!out) fail(Errc::IoError, "write to " + path + " failed");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

bulwark::CompositionConfig load_config(const std::string& path) {
  bulwark::CompositionConfig config;
  if (path.empty()) return config;
  ordered_json root;
  try {
    root = ordered_json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, std::string("invalid config JSON: ") + e.what());
  }
  if (!root.is_object()) fail(Errc::ParseError, "config must be a JSON object");
  try {
    for (const auto& [key, value] : root.items()) {
      if (key == "two_phase") {
        config.two_phase = value.get<bool>();
      } else if (key == "requirements") {
        for (const auto& jr : value) {
          bulwark::Requirement req;
          req.metric = bulwark::metric_from_name(jr.at("metric").get<std::string>());
          std::string sense = jr.at("sense").get<std::string>();
          if (sense == ">=") {
            req.at_least = true;
          } else if (sense == "<=") {
            req.at_least = false;
          } else {
            fail(Errc::ParseError, "requirement sense must be \">=\" or \"<=\"");
          }
          req.value = jr.at("value").get<double>();
          config.requirements.push_back(req);
        }
      } else if (key == "passes") {
        config.pass_config.enabled.clear();
        for (const auto& jp : value) {
          config.pass_config.enabled.insert(bulwark::pass_from_name(jp.get<std::string>()));
        }
      } else if (key == "sc_connectivity") {
        config.pass_config.sc_connectivity = value.get<int>();
      } else if (key == "seed") {
        config.pass_config.seed = value.get<std::uint64_t>();
      } else if (key == "time_limit_s") {
        config.time_limit_s = value.get<double>();
      } else if (key == "max_iterations") {
        config.max_iterations = value.get<int>();
      } else {
        fail(Errc::ParseError, "unknown config key '" + key + "'");
      }
    }
  } catch (const bulwark::Error& e) {
    if (e.code() == Errc::UnknownKind) fail(Errc::ParseError, e.what());
    throw;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, std::string("invalid config JSON: ") + e.what());
  }
  return config;
}

int run(int argc, char** argv) {
  CLI::App app{"integrity-protection composition engine"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "generate a synthetic program");
  std::uint64_t gen_seed = 1;
  int gen_functions = 3;
  int gen_blocks = 3;
  double gen_det = 0.5;
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--functions", gen_functions, "number of functions");
  gen->add_option("--blocks", gen_blocks, "mean code blocks per function");
  gen->add_option("--det-ratio", gen_det, "fraction of deterministic instructions");
  gen->add_option("-o,--output", gen_out, "output program file")->required();

  auto* compose_cmd = app.add_subcommand("compose", "select and apply protections");
  std::string compose_prog, compose_config, compose_out = ".";
  compose_cmd->add_option("program", compose_prog, "program JSON")->required();
  compose_cmd->add_option("--config", compose_config, "composition config JSON");
  compose_cmd->add_option("-o,--output", compose_out, "output directory");

  auto* graph_cmd = app.add_subcommand("graph", "build and summarize the defense graph");
  std::string graph_prog, graph_config, graph_dot;
  graph_cmd->add_option("program", graph_prog, "program JSON")->required();
  graph_cmd->add_option("--config", graph_config, "composition config JSON");
  graph_cmd->add_option("--dot", graph_dot, "write DOT text to this file");

  auto* lp_cmd = app.add_subcommand("export-lp", "write the selection ILP in LP format");
  std::string lp_prog, lp_config, lp_out;
  lp_cmd->add_option("program", lp_prog, "program JSON")->required();
  lp_cmd->add_option("--config", lp_config, "composition config JSON");
  lp_cmd->add_option("-o,--output", lp_out, "output LP file")->required();

  auto* sim_cmd = app.add_subcommand("simulate", "finalize a bundle and verify all checks");
  std::string sim_bundle;
  sim_cmd->add_option("bundle", sim_bundle, "protected.json bundle")->required();

  auto* tamper_cmd = app.add_subcommand("tamper", "flip one instruction and list tripped checks");
  std::string tamper_bundle;
  bulwark::Id tamper_inst = 0;
  tamper_cmd->add_option("bundle", tamper_bundle, "protected.json bundle")->required();
  tamper_cmd->add_option("--inst", tamper_inst, "instruction or guard id")->required();

  auto* compare_cmd = app.add_subcommand("compare", "optimized vs greedy baseline on a corpus");
  std::uint64_t corpus_seed = 1;
  int corpus_count = 30;
  std::string compare_out;
  compare_cmd->add_option("--corpus-seed", corpus_seed, "first program seed");
  compare_cmd->add_option("--count", corpus_count, "number of programs");
  compare_cmd->add_option("-o,--output", compare_out, "output CSV file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR USAGE: " << e.what() << "\n";
    return 2;
  }

  if (*gen) {
    bulwark::ProgramModel program =
        bulwark::generate_program(gen_seed, gen_functions, gen_blocks, gen_det);
    bulwark::save_program(program, gen_out);
    std::cout << "wrote " << gen_out << "\n";
    return 0;
  }

  if (*compose_cmd) {
    bulwark::ProgramModel program = bulwark::load_program(compose_prog);
    bulwark::CompositionConfig config = load_config(compose_config);
    bulwark::CompositionResult result = bulwark::compose(program, config);

    std::filesystem::path dir(compose_out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    bulwark::ProtectedBundle bundle{result.protected_program, result.selected,
                                    result.finalization_order};
    write_file((dir / "protected.json").string(), bulwark::serialize_bundle(bundle));
    write_file((dir / "report.json").string(), bulwark::serialize_report(result));

    std::cout << "program " << program.name << ": " << result.proposal.size() << " proposed, "
              << result.selected.size() << " selected, objective "
              << fmt_double(result.objective_value) << "\n";
    std::cout << "cycles detected: " << result.initial_cycles.size()
              << ", solver iterations: " << result.iterations_used << "\n";
    std::cout << "wrote " << (dir / "protected.json").string() << " and "
              << (dir / "report.json").string() << "\n";
    return 0;
  }

  if (*graph_cmd) {
    bulwark::ProgramModel program = bulwark::load_program(graph_prog);
    bulwark::CompositionConfig config = load_config(graph_config);
    auto manifests = bulwark::propose_all(program, config.pass_config);
    bulwark::DefenseGraph graph = bulwark::build_graph(manifests, program);
    if (!graph_dot.empty()) write_file(graph_dot, bulwark::export_dot(graph));
    std::cout << bulwark::graph_summary(graph);
    return 0;
  }

  if (*lp_cmd) {
    bulwark::ProgramModel program = bulwark::load_program(lp_prog);
    bulwark::CompositionConfig config = load_config(lp_config);
    auto manifests = bulwark::propose_all(program, config.pass_config);
    bulwark::DefenseGraph graph = bulwark::build_graph(manifests, program);
    auto cycles = bulwark::find_cycles(graph);
    std::map<bulwark::Id, double> costs;
    for (const auto& m : manifests) costs[m.id] = m.cost;
    bulwark::IlpModel model =
        bulwark::build_model(graph, manifests, cycles, config.requirements, costs);
    write_file(lp_out, bulwark::export_lp(model));
    std::cout << "wrote " << lp_out << " (" << model.vars.size() << " variables, "
              << model.constraints.size() << " rows)\n";
    return 0;
  }

  if (*sim_cmd) {
    bulwark::ProtectedBundle bundle = bulwark::load_bundle(sim_bundle);
    try {
      bulwark::finalize_and_verify(bundle.program, bundle.manifests,
                                   bundle.finalization_order);
    } catch (const bulwark::Error& e) {
      if (e.code() == Errc::FalseAlarm) {
        std::cout << "FAIL m" << e.subject() << "\n";
        return 1;
      }
      throw;
    }
    std::cout << "PASS\n";
    return 0;
  }

  if (*tamper_cmd) {
    bulwark::ProtectedBundle bundle = bulwark::load_bundle(tamper_bundle);
    bulwark::PatchState patches = bulwark::finalize_and_verify(
        bundle.program, bundle.manifests, bundle.finalization_order);
    std::set<bulwark::Id> triggered =
        bulwark::tamper_check(bundle.program, bundle.manifests, patches, tamper_inst);
    bool first = true;
    for (bulwark::Id id : triggered) {
      if (!first) std::cout << ' ';
      std::cout << id;
      first = false;
    }
    std::cout << "\n";
    return 0;
  }

  if (*compare_cmd) {
    std::vector<bulwark::ComparisonRecord> records;
    for (int i = 0; i < corpus_count; ++i) {
      bulwark::ProgramModel program = bulwark::generate_program(
          corpus_seed + static_cast<std::uint64_t>(i), 2 + i % 4, 3, 0.4 + 0.2 * (i % 3));
      bulwark::CompositionConfig config;
      config.pass_config.seed = corpus_seed + static_cast<std::uint64_t>(i);
      records.push_back(bulwark::compare(program, config));
    }
    write_file(compare_out, bulwark::comparison_csv(records));
    std::vector<double> decreases;
    for (const auto& r : records) decreases.push_back(r.decrease_pct);
    std::sort(decreases.begin(), decreases.end());
    double median = decreases.empty() ? 0.0
                    : decreases.size() % 2 ? decreases[decreases.size() / 2]
                                           : 0.5 * (decreases[decreases.size() / 2 - 1] +
                                                    decreases[decreases.size() / 2]);
    std::cout << "wrote " << compare_out << " (" << records.size()
              << " programs, median decrease " << fmt_double(median) << "%)\n";
    return 0;
  }

  return 2;  // unreachable: a subcommand is required
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::ParseError:
    case Errc::ValidationError:
    case Errc::IoError:
    case Errc::UsageError: return 2;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const bulwark::Error& e) {
    std::cerr << "ERROR " << bulwark::errc_name(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "ERROR INTERNAL: " << e.what() << "\n";
    return 2;
  }
}
