#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kblab/labcli.hpp"

namespace {

// exit-code contract: 0 pass, 1 check failure, 2 config error, 3 numerical
constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int dispatch(int argc, char** argv) {
  CLI::App app{"numerical laboratory for perturbed and projected "
               "Kalman-Bucy semigroups"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  auto* run_cmd = app.add_subcommand("run", "execute a configured experiment");
  run_cmd->add_option("--config", config_path, "experiment config file")
      ->required();
  run_cmd->add_option("--out", out_dir, "output directory override");

  std::string suite_name;
  std::uint64_t seed = 0;
  std::string verify_config;
  auto* verify_cmd =
      app.add_subcommand("verify", "run one verification suite");
  verify_cmd->add_option("--suite", suite_name, "suite name")->required();
  verify_cmd->add_option("--seed", seed, "random seed")->required();
  verify_cmd->add_option("--config", verify_config,
                         "optional config supplying an output directory");

  std::string in_dir, plot_out_dir;
  auto* emit_cmd = app.add_subcommand("emit-plot-data",
                                      "convert artifacts to tidy plot tables");
  emit_cmd->add_option("--in", in_dir, "artifact directory")->required();
  emit_cmd->add_option("--out", plot_out_dir, "table output directory")
      ->required();

  auto* list_cmd = app.add_subcommand("list-suites", "list verification suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitPass : kExitConfig;
  }

  if (run_cmd->parsed()) {
    kblab::labcli::RunConfig config = kblab::labcli::load_config(config_path);
    if (!out_dir.empty()) config.out_dir = out_dir;
    return kblab::labcli::run(config) ? kExitPass : kExitFail;
  }
  if (verify_cmd->parsed()) {
    std::string artifact_dir;
    if (!verify_config.empty())
      artifact_dir = kblab::labcli::load_config(verify_config).out_dir;
    const auto report = kblab::labcli::verify(suite_name, seed, artifact_dir);
    std::cout << kblab::labcli::report_to_json(report).dump(2) << std::endl;
    return report.passed() ? kExitPass : kExitFail;
  }
  if (emit_cmd->parsed()) {
    kblab::labcli::emit_plot_data(in_dir, plot_out_dir);
    return kExitPass;
  }
  if (list_cmd->parsed()) {
    for (const auto& name : kblab::labcli::list_suites())
      std::cout << name << "  -  " << kblab::labcli::suite_description(name)
                << "\n";
    return kExitPass;
  }
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const kblab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const kblab::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << std::endl;
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitFail;
  }
}
