#include "curvflow/harness/scenarios.hpp"
#include "curvflow/harness/selftest.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace curvflow::harness;

int main(int argc, char** argv) {
  CLI::App app{"Prescribed Gauss curvature flow on closed surfaces"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string outDir;
  std::uint64_t seed = 0;
  bool quiet = false;
  app.add_option("--out", outDir, "Output directory (overrides the config)");
  app.add_option("--seed", seed, "RNG seed (overrides the config)");
  app.add_flag("--quiet", quiet, "Only print errors and the final summary");

  std::string runConfig, branchConfig;
  auto* run = app.add_subcommand("run", "Run the flow scenario described by a config file");
  run->add_option("config", runConfig, "Config JSON")->required();
  auto* branch = app.add_subcommand("branch", "Continue the stable static branch over the config's lambda grid");
  branch->add_option("config", branchConfig, "Config JSON")->required();

  std::vector<std::string> injections;
  auto* selftest = app.add_subcommand("selftest", "Run the built-in invariant suite");
  selftest->add_option("--inject", injections, "Fault injection: alpha-sign, negative-weight-mesh")
      ->check(CLI::IsMember({"alpha-sign", "negative-weight-mesh"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  CliOptions opts;
  if (app.count("--out")) opts.out = outDir;
  if (app.count("--seed")) opts.seed = seed;
  opts.quiet = quiet;

  if (*run) return cli_run(runConfig, opts, std::cout, std::cerr);
  if (*branch) return cli_branch(branchConfig, opts, std::cout, std::cerr);

  SelftestOptions st;
  for (const auto& name : injections) {
    if (name == "alpha-sign") st.inject_alpha_sign = true;
    if (name == "negative-weight-mesh") st.inject_negative_weight_mesh = true;
  }
  return cli_selftest(st, quiet, std::cout);
}
