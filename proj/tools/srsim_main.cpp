#include <cstdio>

#include <CLI11.hpp>

int main(int argc, char** argv) {
  CLI::App app{"symbiotic reflector link simulator and optimizer"};
  app.set_version_flag("--version", "srsim 0.1.0");
  app.require_subcommand(0, 1);
  CLI11_PARSE(app, argc, argv);
  std::puts("subcommands arrive with the benchmark layer");
  return 0;
}
