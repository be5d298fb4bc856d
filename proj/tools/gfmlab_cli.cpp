// gfmlab: run pipeline stages against a run directory.
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gfmlab/cli/pipeline.hpp"
#include "gfmlab/errors.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gfmlab: backdoor attack lab for graph pre-training"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  long long seed = -1;
  std::string out = "run";
  std::size_t jobs = 1;
  std::vector<std::string> overrides;
  bool quiet = false;
  app.add_option("--config", config_path, "flat key = value config file");
  app.add_option("--seed", seed, "global seed (overrides the config)");
  app.add_option("--out", out, "run directory");
  app.add_option("--jobs", jobs, "parallel grid cells")->check(CLI::PositiveNumber);
  app.add_option("--set", overrides, "key=value override, repeatable");
  app.add_flag("--quiet", quiet, "skip the effective-config dump");

  for (const auto& name : gfmlab::stage_names()) app.add_subcommand(name, "run the " + name + " stage");
  app.add_subcommand("report", "aggregate every report.json under --out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }
  const std::string stage = app.get_subcommands().front()->get_name();

  try {
    if (stage == "report") {
      gfmlab::emit_report(out, std::cout);
      return 0;
    }
    gfmlab::RunConfig cfg = config_path.empty() ? gfmlab::RunConfig{} : gfmlab::load_config(config_path);
    for (const auto& o : overrides) gfmlab::apply_override(cfg, o);
    if (seed >= 0) gfmlab::set_config_value(cfg, "seed", std::to_string(seed));
    gfmlab::validate(cfg);
    if (!quiet) std::cout << "# effective config\n" << gfmlab::dump_config(cfg) << "# end config\n";
    const auto result = gfmlab::run_stage(stage, cfg, out, jobs, std::cout);
    for (const auto& a : result.artifacts) std::cout << "wrote " << a << "\n";
    return result.exit_code;
  } catch (const gfmlab::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const gfmlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}
