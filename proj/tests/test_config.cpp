#include <string>

#include <gtest/gtest.h>

#include "ubk/config.hpp"

using ubk::ConfigError;
using ubk::parse_config;

namespace {

//! The line number a parse failure reports.
std::size_t error_line(const std::string& text)
{
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return 0;
}

std::string error_text(const std::string& text)
{
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

} // namespace

TEST(ParseConfig, ValidExampleWithDefaults)
{
  const auto cfg = parse_config("command = bias\nmodel = triangular\nkernel = box\nseed = 7");
  ASSERT_TRUE(cfg.command.has_value());
  EXPECT_EQ(*cfg.command, ubk::Command::bias);
  EXPECT_EQ(cfg.model, "triangular");
  EXPECT_EQ(cfg.kernel, "box");
  EXPECT_EQ(cfg.seed, 7U);
  EXPECT_EQ(cfg.c, 2.0);
  EXPECT_EQ(cfg.k_min, 10U);
  EXPECT_EQ(cfg.k_max, 15U);
  EXPECT_EQ(cfg.replicates, 100U);
  EXPECT_EQ(cfg.grid_points, 257U);
  EXPECT_FALSE(cfg.p.has_value());
}

TEST(ParseConfig, CommentsWhitespaceAndAllKeys)
{
  const auto cfg = parse_config("# study\n\n  model=uniform_square   # trailing\nkernel = quartic\r\nc = 3.5\nk_range = 8, 12\n"
                                "replicates = 4\ngrid_points = 33\np = 3\nh_cap = 0.5\noutput_dir = out/run\n");
  EXPECT_EQ(cfg.model, "uniform_square");
  EXPECT_EQ(cfg.kernel, "quartic");
  EXPECT_EQ(cfg.c, 3.5);
  EXPECT_EQ(cfg.k_min, 8U);
  EXPECT_EQ(cfg.k_max, 12U);
  EXPECT_EQ(cfg.replicates, 4U);
  EXPECT_EQ(cfg.grid_points, 33U);
  EXPECT_EQ(cfg.p.value(), 3.0);
  EXPECT_EQ(cfg.h_cap.value(), 0.5);
  EXPECT_EQ(cfg.output_dir, "out/run");
}

TEST(ParseConfig, MalformedNumberReportsItsLine)
{
  EXPECT_EQ(error_line("model = uniform\nkernel = box\nseed = abc\n"), 3U);
  EXPECT_NE(error_text("model = uniform\nkernel = box\nseed = abc\n").find("line 3"), std::string::npos);
  EXPECT_EQ(error_line("model = uniform\nkernel = box\nc = 1.5x\n"), 3U);
}

TEST(ParseConfig, DuplicateKeyNamesSecondOccurrence)
{
  EXPECT_EQ(error_line("seed = 1\nmodel = uniform\nseed = 2\nkernel = box\n"), 3U);
  EXPECT_NE(error_text("seed = 1\nmodel = uniform\nseed = 2\nkernel = box\n").find("seed"), std::string::npos);
}

TEST(ParseConfig, UnknownKey)
{
  EXPECT_EQ(error_line("model = uniform\nkernel = box\nbandwidth = 0.1\n"), 3U);
}

TEST(ParseConfig, FieldInvariants)
{
  EXPECT_EQ(error_line("model = uniform\nkernel = box\nk_range = 3, 10\n"), 3U);
  EXPECT_EQ(error_line("model = uniform\nkernel = box\nk_range = 12, 10\n"), 3U);
  EXPECT_EQ(error_line("model = uniform\nkernel = box\nreplicates = 0\n"), 3U);
  EXPECT_EQ(error_line("model = uniform\nkernel = box\np = 2\n"), 3U);
  EXPECT_EQ(error_line("model = uniform\nkernel = box\nc = -1\n"), 3U);
  EXPECT_EQ(error_line("model = uniform\nkernel = box\nh_cap = 0\n"), 3U);
  EXPECT_EQ(error_line("model = uniform\nkernel = box\ncommand = plot\n"), 3U);
  EXPECT_EQ(error_line("model = uniform\nkernel box\n"), 2U);
}

TEST(ParseConfig, NamesMustExist)
{
  EXPECT_EQ(error_line("kernel = box\nmodel = gaussian\n"), 2U);
  EXPECT_EQ(error_line("kernel = cosine\nmodel = uniform\n"), 1U);
}

TEST(ParseConfig, MissingModelOrKernel)
{
  EXPECT_THROW(parse_config("kernel = box\n"), ConfigError);
  EXPECT_THROW(parse_config("model = uniform\n"), ConfigError);
  EXPECT_EQ(error_line("kernel = box\n"), 0U);
}

TEST(Commands, RoundTripNames)
{
  for (const auto& [name, cmd] : ubk::command_table()) {
    EXPECT_EQ(ubk::parse_command(name), cmd);
    EXPECT_EQ(ubk::command_name(cmd), name);
  }
  EXPECT_FALSE(ubk::parse_command("plot").has_value());
}
