#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "chaintensor/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"chaintensor: chain mapping, tensor-network evolution and transfer tensors"};
  app.require_subcommand(1);
  chaintensor::cli::CommandOptions options;
  std::string out;
  for (const auto& name : chaintensor::cli::subcommand_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", options.config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides output.directory)");
    sub->add_option("--threads", options.threads, "worker threads for basis trajectories")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (!out.empty()) options.out_dir = out;
  return chaintensor::cli::run(app.get_subcommands().front()->get_name(), options);
}
