//! Command-line experiment runner.
//!
//!   ubk <command> --config <file> [--seed N] [--check] [--out DIR] [--workers N]
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 a property check failed
//! (only with --check), 3 input/output failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ubk/ubk.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitCheck = 2;
constexpr int kExitIo = 3;

bool write_file(const std::filesystem::path& path, const auto& writer)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    return false;
  writer(out);
  out.flush();
  return static_cast<bool>(out);
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Uniform-in-bandwidth kernel estimation experiments" };
  std::string command_name;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool check = false;
  unsigned workers = 1;

  std::vector<std::string> names;
  for (const auto& [n, c] : ubk::command_table())
    names.emplace_back(n);
  app.add_option("command", command_name, "Experiment to run")->required()->check(CLI::IsMember(names));
  app.add_option("--config", config_path, "key = value configuration file")->required();
  app.add_option("--seed", seed, "Override the configured master seed");
  app.add_option("--out", out_dir, "Override the configured output directory");
  app.add_flag("--check", check, "Exit with status 2 when any property check fails");
  app.add_option("--workers", workers, "Worker threads for replicates")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    std::cerr << config_path << ": cannot open configuration file\n";
    return kExitIo;
  }
  std::stringstream text;
  text << in.rdbuf();

  ubk::ExperimentConfig cfg;
  try {
    cfg = ubk::parse_config(text.str());
  } catch (const ubk::ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
    return kExitConfig;
  }
  const auto command = *ubk::parse_command(command_name);
  if (cfg.command && *cfg.command != command) {
    std::cerr << config_path << ": configured command '" << ubk::command_name(*cfg.command)
              << "' does not match '" << command_name << "'\n";
    return kExitConfig;
  }
  if (seed)
    cfg.seed = *seed;
  if (out_dir)
    cfg.output_dir = *out_dir;

  ubk::RunOptions run;
  run.workers = workers;
  ubk::ExperimentResult result;
  try {
    result = ubk::run_experiment(command, cfg, run);
  } catch (const std::invalid_argument& e) {
    std::cerr << command_name << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const ubk::RangeEmptyError& e) {
    std::cerr << command_name << ": " << e.what() << '\n';
    return kExitConfig;
  }

  const std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    std::cerr << dir.string() << ": " << ec.message() << '\n';
    return kExitIo;
  }
  if (!write_file(dir / result.csv_name, [&](std::ostream& os) { result.table.write(os); }) ||
      !write_file(dir / "summary.csv", [&](std::ostream& os) { result.write_summary(os); })) {
    std::cerr << dir.string() << ": failed to write reports\n";
    return kExitIo;
  }

  result.write_summary(std::cout);
  if (check && !result.all_passed())
    return kExitCheck;
  return 0;
}
