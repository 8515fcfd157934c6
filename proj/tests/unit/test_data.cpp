#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "medctx/core/csv.hpp"
#include "medctx/core/errors.hpp"
#include "medctx/core/log.hpp"
#include "medctx/core/png_io.hpp"
#include "medctx/data/corpus_io.hpp"
#include "medctx/data/preprocess.hpp"
#include "medctx/data/split.hpp"
#include "medctx/data/synthetic.hpp"
#include "support.hpp"

using namespace medctx;
using namespace medctx::data;

namespace {

std::array<int, kNumBirads> category_counts(const std::vector<UltrasoundSample>& corpus) {
  std::array<int, kNumBirads> c{};
  for (const auto& s : corpus) ++c[birads_to_index(s.record.birads)];
  return c;
}

std::vector<ClinicalRecord> records_with_counts(const std::array<int, kNumBirads>& counts) {
  std::vector<ClinicalRecord> out;
  for (int k = 0; k < kNumBirads; ++k) {
    for (int i = 0; i < counts[k]; ++i) {
      ClinicalRecord r;
      r.case_id = "r" + std::to_string(out.size());
      r.birads = index_to_birads(k);
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace

TEST(ClinicalText, PaperTemplateForBirads4) {
  ClinicalRecord r;
  r.birads = 4;
  r.histology = Histology::invasive_ductal_carcinoma;
  r.pathology = Pathology::malignant;
  r.laterality = Laterality::right;
  EXPECT_EQ(synthesize_birads_text(r),
            "BI-RADS 4: Suspicious abnormality. Tissue diagnosis should be considered. Histology: Invasive ductal "
            "carcinoma. Pathology: Malignant. Location: right breast.");
  EXPECT_EQ(synthesize_birads_text(r), synthesize_birads_text(r));
}

TEST(ClinicalText, Birads2StartAndEnd) {
  ClinicalRecord r;
  r.birads = 2;
  r.histology = Histology::cyst;
  r.pathology = Pathology::benign;
  r.laterality = Laterality::left;
  const auto text = synthesize_birads_text(r);
  EXPECT_EQ(text.rfind("BI-RADS 2:", 0), 0u);
  EXPECT_TRUE(text.ends_with("Location: left breast."));
}

TEST(ClinicalText, ParseRoundTripsEveryCombination) {
  for (int b = kMinBirads; b <= kMaxBirads; ++b) {
    for (int h = 0; h < kNumHistology; ++h) {
      for (int l = 0; l < 2; ++l) {
        ClinicalRecord r;
        r.birads = b;
        r.histology = static_cast<Histology>(h);
        r.pathology = b >= 4 ? Pathology::malignant : Pathology::benign;
        r.laterality = static_cast<Laterality>(l);
        const auto parsed = parse_report(synthesize_birads_text(r));
        ASSERT_TRUE(parsed);
        EXPECT_EQ(parsed->birads, b);
        EXPECT_EQ(parsed->histology, r.histology);
        EXPECT_EQ(parsed->laterality, r.laterality);
        EXPECT_EQ(parsed->pathology, r.pathology);
      }
    }
  }
}

TEST(ClinicalText, BiradsCategoryParsing) {
  EXPECT_EQ(parse_birads_category("bi-rads 3: probably benign"), 3);
  EXPECT_EQ(parse_birads_category("BIRADS 5"), 5);
  EXPECT_FALSE(parse_birads_category("BI-RADS 7"));
  EXPECT_FALSE(parse_birads_category("no category here"));
}

TEST(ClinicalRecord, ValidationRejectsOutOfRangeCategory) {
  ClinicalRecord r;
  r.birads = 6;
  EXPECT_THROW(validate(r), InvalidArgument);
}

TEST(Synthetic, ReferenceProportions) {
  const auto counts = apportion_categories(1875);
  const double ref[] = {0.300, 0.247, 0.370, 0.084};
  for (int k = 0; k < kNumBirads; ++k) EXPECT_NEAR(counts[k] / 1875.0, ref[k], 0.02);
  EXPECT_EQ(counts, kReferenceCategoryCounts);
}

TEST(Synthetic, FourCasesCoverEveryCategory) {
  const auto corpus = generate_synthetic_corpus(4, 0, 32);
  EXPECT_EQ(category_counts(corpus), (std::array<int, 4>{1, 1, 1, 1}));
}

TEST(Synthetic, DeterministicUnderSeed) {
  const auto a = generate_synthetic_corpus(100, 7, 32);
  const auto b = generate_synthetic_corpus(100, 7, 32);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == generate_synthetic_corpus(100, 8, 32));
}

TEST(Synthetic, RecordInvariants) {
  for (const auto& s : generate_synthetic_corpus(120, 3, 48)) {
    EXPECT_EQ(s.image.width(), s.mask.width());
    EXPECT_EQ(s.image.height(), s.mask.height());
    for (auto v : s.mask.values()) EXPECT_LE(v, 1);
    if (s.record.pathology == Pathology::malignant) {
      EXPECT_GE(s.record.birads, 4);
    }
    if (s.record.pathology == Pathology::benign) {
      EXPECT_LE(s.record.birads, 3);
    }
    EXPECT_EQ(parse_birads_category(s.record.report_text), s.record.birads);
  }
}

TEST(Synthetic, LesionLiesOnTheRecordedSide) {
  for (const auto& s : generate_synthetic_corpus(40, 5, 64)) {
    double sx = 0.0, n = 0.0;
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        if (s.mask(y, x)) sx += x, n += 1.0;
      }
    }
    ASSERT_GT(n, 0.0);
    EXPECT_EQ(sx / n < 32.0, s.record.laterality == Laterality::left) << s.record.case_id;
  }
}

TEST(Synthetic, ParameterFileRoundTripAndTypos) {
  SyntheticParams p;
  p.speckle_sigma = 0.3;
  p.decoy_lesion = true;
  const auto back = SyntheticParams::from_config(p.to_config());
  EXPECT_DOUBLE_EQ(back.speckle_sigma, 0.3);
  EXPECT_TRUE(back.decoy_lesion);
  EXPECT_THROW(SyntheticParams::from_config(KeyValueConfig::parse("speckel_sigma = 1\n")), InvalidArgument);
}

TEST(Split, PublishedTable) {
  const auto records = records_with_counts({562, 463, 693, 157});
  const auto split = stratified_split_indices(records, {0.8, 42, "birads"});
  std::array<int, 4> tr{}, va{};
  for (auto i : split.train) ++tr[birads_to_index(records[i].birads)];
  for (auto i : split.val) ++va[birads_to_index(records[i].birads)];
  EXPECT_EQ(tr, (std::array<int, 4>{449, 370, 554, 125}));
  EXPECT_EQ(va, (std::array<int, 4>{113, 93, 139, 32}));
  EXPECT_EQ(split.train.size(), 1498u);
  EXPECT_EQ(split.val.size(), 377u);
}

TEST(Split, ProportionsFollowTheCorpus) {
  const auto records = records_with_counts({562, 463, 693, 157});
  const auto split = stratified_split_indices(records, {});
  std::array<double, 4> tr{}, all{};
  for (auto i : split.train) tr[birads_to_index(records[i].birads)] += 1;
  for (const auto& r : records) all[birads_to_index(r.birads)] += 1;
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(tr[k] / split.train.size(), all[k] / records.size(), 0.005);
  }
}

TEST(Split, SingleStratumAndSeedDependence) {
  const auto records = records_with_counts({0, 0, 10, 0});
  const auto a = stratified_split_indices(records, {0.8, 42, "birads"});
  const auto b = stratified_split_indices(records, {0.8, 43, "birads"});
  EXPECT_EQ(a.train.size(), 8u);
  EXPECT_EQ(a.val.size(), 2u);
  EXPECT_EQ(b.train.size(), 8u);
  EXPECT_NE(a.val, b.val);
  std::set<std::size_t> seen(a.train.begin(), a.train.end());
  for (auto i : a.val) EXPECT_TRUE(seen.insert(i).second);
  EXPECT_EQ(seen.size(), 10u);
}

TEST(Split, TinyStratumIsRejected) {
  EXPECT_THROW(stratified_split_indices(records_with_counts({1, 4, 4, 4}), {}), InvalidArgument);
}

TEST(Preprocess, ProcessMaskThreshold) {
  EXPECT_EQ(process_mask(Image(4, 4, 1.0f)), Mask(4, 4, 1));
  EXPECT_EQ(process_mask(Image(4, 4, 0.39f)), Mask(4, 4, 0));
  EXPECT_EQ(process_mask(Image(4, 4, 0.5f)), Mask(4, 4, 1));
}

TEST(Preprocess, ValModeMaskIsNearestResize) {
  const auto s = generate_synthetic_corpus(4, 1, 48)[2];
  auto rng = make_rng(0);
  const auto out = preprocess(s, Mode::val, rng, {32});
  EXPECT_EQ(out.mask, resize_nearest(s.mask, 32, 32));
  double mean = 0.0;
  for (float v : out.image.values()) mean += v;
  EXPECT_NEAR(mean / out.image.size(), 0.0, 1e-4);
}

TEST(Preprocess, ForcedFlipKeepsImageAndMaskAligned) {
  const auto s = generate_synthetic_corpus(4, 1, 32)[1];
  auto rng = make_rng(0);
  AugmentOverride pin;
  pin.flip = true;
  pin.rotation_deg = 0.0;
  pin.brightness = 0.0;
  pin.contrast = 1.0;
  const auto flipped = preprocess(s, Mode::train, rng, {32}, pin);
  auto rng2 = make_rng(0);
  pin.flip = false;
  const auto plain = preprocess(s, Mode::train, rng2, {32}, pin);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      EXPECT_EQ(flipped.mask(y, x), plain.mask(y, 31 - x));
      EXPECT_FLOAT_EQ(flipped.image(y, x), plain.image(y, 31 - x));
    }
  }
}

TEST(Preprocess, TrainModeIsDeterministicPerSeed) {
  const auto s = generate_synthetic_corpus(4, 1, 32)[0];
  auto r1 = make_rng(9), r2 = make_rng(9);
  const auto a = preprocess(s, Mode::train, r1, {32});
  const auto b = preprocess(s, Mode::train, r2, {32});
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.mask, b.mask);
}

TEST(Preprocess, ConstantImageIsDegenerate) {
  UltrasoundSample s;
  s.image = Image(16, 16, 0.5f);
  s.mask = Mask(16, 16, 0);
  s.record.case_id = "flat";
  auto rng = make_rng(0);
  const auto out = preprocess(s, Mode::val, rng, {16});
  EXPECT_TRUE(out.degenerate);
  for (float v : out.image.values()) EXPECT_EQ(v, 0.0f);
}

TEST(CorpusIo, WriteThenLoadWithoutWarnings) {
  const auto dir = support::scratch_dir("corpus");
  const auto corpus = generate_synthetic_corpus(10, 2, 32);
  write_corpus(dir, corpus);
  log::Capture capture;
  const auto back = load_corpus(dir);
  EXPECT_TRUE(capture.warnings().empty());
  ASSERT_EQ(back.size(), 10u);
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].record, corpus[i].record);
    EXPECT_EQ(back[i].mask, corpus[i].mask);
    for (std::size_t p = 0; p < back[i].image.size(); ++p) {
      EXPECT_NEAR(back[i].image.data()[p], corpus[i].image.data()[p], 0.5 / 255.0 + 1e-6);
    }
  }
}

TEST(CorpusIo, OrphanImageIsIntegrityError) {
  const auto dir = support::scratch_dir("orphan");
  write_corpus(dir, generate_synthetic_corpus(4, 2, 32));
  png::write_gray8(dir / "Images" / "extra.png", Grid<std::uint8_t>(32, 32, 9));
  try {
    load_corpus(dir);
    FAIL() << "expected IntegrityError";
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("extra"), std::string::npos);
  }
}

TEST(CorpusIo, MissingHistologyDefaultsWithWarning) {
  const auto dir = support::scratch_dir("nohist");
  const auto corpus = generate_synthetic_corpus(4, 2, 32);
  write_corpus(dir, corpus);
  auto rows = csv::read_file(dir / "metadata.csv");
  rows[1][3] = "";
  std::ofstream out(dir / "metadata.csv");
  for (const auto& r : rows) out << csv::format_row(r) << "\n";
  out.close();
  log::Capture capture;
  const auto back = load_corpus(dir);
  EXPECT_EQ(back[0].record.histology, Histology::not_available);
  EXPECT_EQ(capture.warnings().size(), 1u);
}
