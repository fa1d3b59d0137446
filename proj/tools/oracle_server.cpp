// Serves a surrogate oracle over the newline-JSON wire protocol on stdin/stdout.
// Stands in for a simulator wrapper and exercises the external-oracle client.
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "simgap/config.hpp"
#include "simgap/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Surrogate oracle speaking the hello/step/bye protocol"};
  std::string config;
  std::string surrogate;
  app.add_option("--config", config, "Pipeline configuration providing model, state box and surrogate")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--surrogate", surrogate, "Override the surrogate kind");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    simgap::PipelineConfig cfg = simgap::load_config(config);
    cfg.oracle_kind = "surrogate";
    if (!surrogate.empty()) cfg.surrogate.kind = simgap::parse_surrogate_kind(surrogate);
    auto oracle = cfg.oracle();
    simgap::serve_oracle(*oracle, std::cin, std::cout);
    return 0;
  } catch (const simgap::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  }
}
