#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "kernels.hpp"
#include "models.hpp"

namespace ubk {

enum class Command
{
  density_rate,
  consistency,
  nw,
  condcdf,
  bias,
  entropy,
  symmetrize,
  select
};

inline const std::vector<std::pair<std::string_view, Command>>& command_table()
{
  static const std::vector<std::pair<std::string_view, Command>> table{
    { "density-rate", Command::density_rate },
    { "consistency", Command::consistency },
    { "nw", Command::nw },
    { "condcdf", Command::condcdf },
    { "bias", Command::bias },
    { "entropy", Command::entropy },
    { "symmetrize", Command::symmetrize },
    { "select", Command::select },
  };
  return table;
}

inline std::optional<Command> parse_command(std::string_view name)
{
  for (const auto& [n, c] : command_table())
    if (n == name)
      return c;
  return std::nullopt;
}

inline std::string_view command_name(Command c)
{
  for (const auto& [n, cc] : command_table())
    if (cc == c)
      return n;
  return "?";
}

//! A configuration problem; `line` is 1-based, or 0 when it concerns the
//! file as a whole (a missing key, say).
class ConfigError : public std::runtime_error
{
public:
  ConfigError(std::size_t line, const std::string& what)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what)
    , line_(line)
  {}

  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

struct ExperimentConfig
{
  std::optional<Command> command;
  std::string model;
  std::string kernel;
  double c = 2.0;
  unsigned k_min = 10;
  unsigned k_max = 15;
  std::size_t replicates = 100;
  std::uint64_t seed = 0;
  std::size_t grid_points = 257;
  std::optional<double> p;
  std::optional<double> h_cap;
  std::string output_dir = ".";
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view text, std::size_t line, std::string_view key)
{
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ConfigError(line, "value '" + std::string(text) + "' for '" + std::string(key) + "' is not a valid number");
  return value;
}

} // namespace detail

//! Parses flat `key = value` lines; `#` starts a comment. Unknown and
//! repeated keys, malformed values and values violating field invariants
//! are rejected with the offending line number.
inline ExperimentConfig parse_config(std::string_view text)
{
  ExperimentConfig cfg;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t model_line = 0, kernel_line = 0;
  std::istringstream in{ std::string(text) };
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(line_no, "expected 'key = value'");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(line_no, "missing key");
    if (value.empty())
      throw ConfigError(line_no, "missing value for '" + std::string(key) + "'");
    if (seen.contains(key))
      throw ConfigError(line_no, "duplicate key '" + std::string(key) + "'");
    seen.emplace(key);

    if (key == "command") {
      cfg.command = parse_command(value);
      if (!cfg.command)
        throw ConfigError(line_no, "unknown command '" + std::string(value) + "'");
    } else if (key == "model") {
      cfg.model = value;
      model_line = line_no;
    } else if (key == "kernel") {
      cfg.kernel = value;
      kernel_line = line_no;
    } else if (key == "c") {
      cfg.c = detail::parse_number<double>(value, line_no, key);
      if (!(cfg.c > 0.0))
        throw ConfigError(line_no, "c must be positive");
    } else if (key == "k_range") {
      const auto comma = value.find(',');
      if (comma == std::string_view::npos)
        throw ConfigError(line_no, "k_range must be 'k_min, k_max'");
      cfg.k_min = detail::parse_number<unsigned>(detail::trim(value.substr(0, comma)), line_no, key);
      cfg.k_max = detail::parse_number<unsigned>(detail::trim(value.substr(comma + 1)), line_no, key);
      if (cfg.k_min < 4)
        throw ConfigError(line_no, "k_min must be at least 4");
      if (cfg.k_max < cfg.k_min)
        throw ConfigError(line_no, "k_max must not be below k_min");
      if (cfg.k_max > 30)
        throw ConfigError(line_no, "k_max must not exceed 30");
    } else if (key == "replicates") {
      cfg.replicates = detail::parse_number<std::size_t>(value, line_no, key);
      if (cfg.replicates < 1)
        throw ConfigError(line_no, "replicates must be at least 1");
    } else if (key == "seed") {
      cfg.seed = detail::parse_number<std::uint64_t>(value, line_no, key);
    } else if (key == "grid_points") {
      cfg.grid_points = detail::parse_number<std::size_t>(value, line_no, key);
      if (cfg.grid_points < 2)
        throw ConfigError(line_no, "grid_points must be at least 2");
    } else if (key == "p") {
      cfg.p = detail::parse_number<double>(value, line_no, key);
      if (!(*cfg.p > 2.0))
        throw ConfigError(line_no, "p must exceed 2");
    } else if (key == "h_cap") {
      cfg.h_cap = detail::parse_number<double>(value, line_no, key);
      if (!(*cfg.h_cap > 0.0 && *cfg.h_cap <= 2.0))
        throw ConfigError(line_no, "h_cap must lie in (0, 2]");
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else {
      throw ConfigError(line_no, "unknown key '" + std::string(key) + "'");
    }
  }

  if (cfg.model.empty())
    throw ConfigError(0, "missing required key 'model'");
  if (cfg.kernel.empty())
    throw ConfigError(0, "missing required key 'kernel'");
  const auto names = model_names();
  if (std::find(names.begin(), names.end(), cfg.model) == names.end())
    throw ConfigError(model_line, "unknown model '" + cfg.model + "'");
  try {
    kernel_by_name(cfg.kernel);
  } catch (const std::invalid_argument&) {
    throw ConfigError(kernel_line, "unknown kernel '" + cfg.kernel + "'");
  }
  return cfg;
}

} // namespace ubk
