#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "transportlab/app.hpp"

int main(int argc, char** argv) {
  CLI::App cli{"transportlab: stochastic transport experiments"};
  cli.set_version_flag("--version", std::string(transportlab::kToolVersion));
  cli.require_subcommand(1);

  std::string config;
  std::string out;
  int workers = 1;
  for (const auto& name : transportlab::subcommands()) {
    auto* sub = cli.add_subcommand(name, transportlab::describe(name));
    sub->add_option("--config", config, "INI experiment file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (default: run.output)");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  }

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : transportlab::kExitInvalid;
  }
  const auto* chosen = cli.get_subcommands().front();
  std::optional<std::string> out_dir;
  if (!out.empty()) out_dir = out;
  return transportlab::run_subcommand(chosen->get_name(), config, out_dir, workers, std::cout, std::cerr);
}
