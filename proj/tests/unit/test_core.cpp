#include <fstream>

#include <gtest/gtest.h>

#include "medctx/core/csv.hpp"
#include "medctx/core/errors.hpp"
#include "medctx/core/kv_config.hpp"
#include "medctx/core/log.hpp"
#include "medctx/core/png_io.hpp"
#include "medctx/core/rng.hpp"
#include "support.hpp"

using namespace medctx;

TEST(KeyValueConfig, ParsesCommentsAndLaterAssignmentsWin) {
  auto cfg = KeyValueConfig::parse("# run\na = 1\n\nb = two words\na = 3\n");
  EXPECT_EQ(cfg.get_int("a", 0), 3);
  EXPECT_EQ(cfg.get_string("b", ""), "two words");
  EXPECT_FALSE(cfg.contains("c"));
  EXPECT_DOUBLE_EQ(cfg.get_double("c", 2.5), 2.5);
}

TEST(KeyValueConfig, OverridesAndUnknownKeys) {
  auto cfg = KeyValueConfig::parse("train.seed = 1\n");
  cfg.apply_overrides({"train.seed=7", "model.depth=2"});
  EXPECT_EQ(cfg.get_int("train.seed", 0), 7);
  EXPECT_EQ(cfg.unknown_keys({"train.seed"}), std::vector<std::string>{"model.depth"});
  EXPECT_THROW(cfg.apply_overrides({"no-equals-sign"}), InvalidArgument);
}

TEST(KeyValueConfig, BadValuesAreRejected) {
  auto cfg = KeyValueConfig::parse("x = abc\nflag = maybe\n");
  EXPECT_THROW((void)cfg.get_int("x", 0), InvalidArgument);
  EXPECT_THROW((void)cfg.get_bool("flag", false), InvalidArgument);
}

TEST(KeyValueConfig, SaveLoadRoundTrip) {
  const auto dir = support::scratch_dir("kv");
  auto cfg = KeyValueConfig::parse("a = 1\nb = x y\n");
  cfg.save(dir / "run.cfg");
  EXPECT_EQ(KeyValueConfig::load(dir / "run.cfg").entries(), cfg.entries());
}

TEST(Csv, QuotedFieldsRoundTrip) {
  const csv::Row row = {"plain", "with, comma", "with \"quote\"", "multi\nline", ""};
  const auto rows = csv::parse(csv::format_row(row) + "\n" + csv::format_row({"a", "b"}) + "\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], row);
}

TEST(Png, GrayAndRgbRoundTrip) {
  const auto dir = support::scratch_dir("png");
  Grid<std::uint8_t> gray(5, 7);
  for (std::size_t i = 0; i < gray.size(); ++i) gray.data()[i] = static_cast<std::uint8_t>(i * 7);
  png::write_gray8(dir / "g.png", gray);
  EXPECT_EQ(png::read_gray8(dir / "g.png"), gray);

  RgbImage rgb(3, 4);
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    rgb.data()[i] = {static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(2 * i), static_cast<std::uint8_t>(255 - i)};
  }
  png::write_rgb8(dir / "c.png", rgb);
  EXPECT_EQ(png::read_rgb8(dir / "c.png"), rgb);
  // gray files expand to equal channels
  const auto expanded = png::read_rgb8(dir / "g.png");
  EXPECT_EQ(expanded(1, 2).r, gray(1, 2));
  EXPECT_EQ(expanded(1, 2).b, gray(1, 2));
}

TEST(Png, MissingOrCorruptFileIsIoError) {
  const auto dir = support::scratch_dir("png_bad");
  EXPECT_THROW(png::read_gray8(dir / "absent.png"), IoError);
  std::ofstream(dir / "bad.png") << "not a png";
  EXPECT_THROW(png::read_gray8(dir / "bad.png"), IoError);
}

TEST(Rng, DerivedStreamsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(42, {1, 2}), derive_seed(42, {1, 2}));
  EXPECT_NE(derive_seed(42, {1, 2}), derive_seed(42, {2, 1}));
  auto a = make_rng(5), b = make_rng(5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
  auto r = make_rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform(r, -2.0, 3.0);
    EXPECT_GE(u, -2.0);
    EXPECT_LT(u, 3.0);
  }
}

TEST(Log, CaptureCollectsWarnings) {
  log::Capture capture;
  log::warn("first ", 1);
  log::info("not a warning");
  ASSERT_EQ(capture.warnings().size(), 1u);
  EXPECT_NE(capture.warnings()[0].find("first 1"), std::string::npos);
}
