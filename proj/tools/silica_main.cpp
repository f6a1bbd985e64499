#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "silica/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Silica typestate checker and interpreter"};
  app.require_subcommand(1);

  std::string file, dir;
  silica::RunOptions run_opts;

  auto* check = app.add_subcommand("check", "type-check a program");
  check->add_option("file", file, "source file")->required();

  auto* run = app.add_subcommand("run", "check, then evaluate a program");
  run->add_option("file", file, "source file")->required();
  run->add_option("--fuel", run_opts.fuel, "maximum number of steps")->capture_default_str();
  run->add_flag("--trace", run_opts.trace, "print every step");
  run->add_flag("--verify", run_opts.verify, "check preservation and ownership at every step");

  auto* test = app.add_subcommand("test", "run a corpus directory against its manifest");
  test->add_option("dir", dir, "corpus directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : silica::kExitIo;
  }

  const char* env = std::getenv("SILICA_COLOR");
  bool color = env && std::string(env) == "1";

  if (*check) return silica::cmd_check(file, std::cout, color);
  if (*run) return silica::cmd_run(file, run_opts, std::cout, color);
  return silica::cmd_test(dir, std::cout, color);
}
