// logloom command line: one subcommand per pipeline stage plus `run`.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "logloom/errors.hpp"
#include "logloom/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kDependency = 3, kNumeric = 4 };

int dispatch(const std::string& command, const logloom::RunConfig& cfg) {
  using namespace logloom;
  if (command == "parse") {
    cmd_parse(cfg);
  } else if (command == "encode") {
    cmd_encode(cfg);
  } else if (command == "graph") {
    cmd_graph(cfg);
  } else if (command == "train") {
    cmd_train(cfg);
  } else if (command == "detect") {
    cmd_detect(cfg);
  } else if (command == "report") {
    std::cout << cmd_report(cfg).dump(2) << '\n';
  } else {
    std::cout << run_all(cfg).dump(2) << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"logloom: graph autoencoder log anomaly detection"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool all = false;

  for (const char* name : {"parse", "encode", "graph", "train", "detect", "report", "run"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run config or dataset manifest")->required();
    sub->add_option("--seed", seed, "seed for every stochastic stage");
    sub->add_option("--out", out_dir, "artifact directory");
    if (std::string(name) == "run") sub->add_flag("--all", all, "run every stage (default)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  logloom::RunConfig cfg;
  try {
    cfg = logloom::RunConfig::load(config_path);
    if (seed) cfg.set_seed(*seed);
    if (out_dir) cfg.out_dir = *out_dir;
  } catch (const logloom::Error& e) {
    // An unreadable or malformed config is a config problem whatever its cause.
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  }

  try {
    return dispatch(command, cfg);
  } catch (const logloom::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const logloom::DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << '\n';
    return kDependency;
  } catch (const logloom::NumericalError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
}
