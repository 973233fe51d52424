#include "tstokes/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

struct Invocation {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int run(const std::string& scenario, const Invocation& inv) {
  tstokes::ScenarioConfig cfg = tstokes::load_config(inv.config);
  if (cfg.scenario != scenario) {
    throw tstokes::Error(tstokes::ErrorCode::config_invalid,
                         inv.config + ": scenario '" + cfg.scenario + "' does not match subcommand '" + scenario + "'");
  }
  if (inv.seed) cfg.seed = *inv.seed;
  const std::string out = inv.out.empty() ? cfg.output_dir : inv.out;
  const tstokes::Report rep = tstokes::run_scenario(cfg, out);
  for (const auto& a : rep.json()["assertions"]) {
    std::cout << (a["passed"].get<bool>() ? "ok   " : (a["soft"].get<bool>() ? "soft " : "FAIL ")) << a["name"].get<std::string>()
              << ' ' << a["value"].dump() << ' ' << a["relation"].get<std::string>() << ' ' << a["limit"].dump() << '\n';
  }
  std::cout << scenario << ": " << (rep.passed() ? "passed" : "failed") << " (" << out << "/report.json)\n";
  return rep.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transport-Stokes sedimentation simulator and verification harness"};
  app.require_subcommand(1);
  Invocation inv;
  std::uint64_t seed = 0;
  const char* names[] = {"simulate", "stability", "analyticity", "picard", "hadamard", "control", "bench"};
  for (const char* name : names) {
    CLI::App* sub = app.add_subcommand(name, std::string("Run the ") + name + " scenario");
    sub->add_option("--config", inv.config, "Scenario YAML file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", inv.out, "Output directory (default: output_dir from the config)");
    sub->add_option("--seed", seed, "Override the master seed");
  }
  CLI11_PARSE(app, argc, argv);

  CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--seed") > 0) inv.seed = seed;
  try {
    return run(chosen->get_name(), inv);
  } catch (const tstokes::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
