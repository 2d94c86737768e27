#include "cosearch/cli/commands.hpp"
#include "cosearch/core/errors.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace cosearch;

int main(int argc, char** argv) {
  CLI::App app{"EGM-to-ECG network and accelerator co-search"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
  app.add_option("--config", config_path, "RunConfig JSON file (defaults apply when omitted)");
  app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--out", out, "overrides the config run directory");
  app.add_flag("-q,--quiet", quiet, "no progress output");
  app.fallthrough();
  for (const char* verb : {"synth", "search-net", "train", "search-acc", "report", "all"}) app.add_subcommand(verb);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kExitOk : cli::kExitConfig;
  }
  const std::string verb = app.get_subcommands().front()->get_name();
  cli::Log log = [&](const std::string& m) {
    if (!quiet) std::cerr << m << std::endl;
  };

  try {
    cli::RunConfig cfg = config_path.empty() ? cli::config_from_json(nlohmann::json::object())
                                             : cli::load_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.dns.seed = *seed;
      cfg.das.search.seed = *seed;
    }
    if (!out.empty()) cfg.out = out;
    cli::run_command(verb, cfg, log);
    return cli::kExitOk;
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::kExitConfig;
  } catch (const cli::MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return cli::kExitMissingArtifact;
  } catch (const NumericDivergence& e) {
    std::cerr << "numeric divergence: " << e.what() << "\n";
    return cli::kExitDivergence;
  } catch (const cli::RunLocked& e) {
    std::cerr << "locked: " << e.what() << "\n";
    return cli::kExitLocked;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitFailure;
  }
}
