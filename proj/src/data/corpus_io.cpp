#include "medctx/data/corpus_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "medctx/core/csv.hpp"
#include "medctx/core/errors.hpp"
#include "medctx/core/log.hpp"
#include "medctx/core/png_io.hpp"
#include "medctx/data/preprocess.hpp"

namespace fs = std::filesystem;

namespace medctx::data {
namespace {

std::set<std::string> png_stems(const fs::path& dir) {
  std::set<std::string> out;
  if (!fs::is_directory(dir)) throw IoError("missing directory " + dir.string());
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      out.insert(entry.path().stem().string());
    }
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

struct Columns {
  std::map<std::string, std::size_t> index;
  [[nodiscard]] std::string field(const csv::Row& row, const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end() || it->second >= row.size()) return {};
    return row[it->second];
  }
};

ClinicalRecord parse_record(const csv::Row& row, const Columns& cols) {
  ClinicalRecord rec;
  rec.case_id = cols.field(row, "case_id");

  const auto birads_text = cols.field(row, "birads");
  try {
    std::size_t used = 0;
    rec.birads = std::stoi(birads_text, &used);
    if (used != birads_text.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw IntegrityError("case " + rec.case_id + ": missing or malformed birads '" + birads_text + "'");
  }
  if (rec.birads < kMinBirads || rec.birads > kMaxBirads) {
    throw IntegrityError("case " + rec.case_id + ": BI-RADS " + std::to_string(rec.birads) +
                         " outside clinical range 2-5");
  }

  const auto pathology = cols.field(row, "pathology");
  if (auto p = parse_pathology(pathology)) {
    rec.pathology = *p;
  } else {
    rec.pathology = rec.birads >= 4 ? Pathology::malignant : Pathology::benign;
    log::warn("case ", rec.case_id, ": pathology '", pathology, "' missing or unknown; derived '",
              to_string(rec.pathology), "' from BI-RADS");
  }

  const auto histology = cols.field(row, "histology");
  if (auto h = parse_histology(histology)) {
    rec.histology = *h;
  } else {
    rec.histology = Histology::not_available;
    log::warn("case ", rec.case_id, ": histology '", histology,
              "' missing or unknown; using 'Not available'");
  }

  const auto laterality = cols.field(row, "laterality");
  if (auto l = parse_laterality(laterality)) {
    rec.laterality = *l;
  } else {
    rec.laterality = Laterality::right;
    log::warn("case ", rec.case_id, ": laterality '", laterality, "' missing or unknown; using 'right'");
  }

  rec.report_text = normalize_terminology(cols.field(row, "report_text"));
  if (rec.report_text.empty()) {
    rec.report_text = synthesize_birads_text(rec);
    log::warn("case ", rec.case_id, ": report_text missing; synthesized from metadata");
  }
  return rec;
}

Image to_unit_image(const Grid<std::uint8_t>& raw) {
  Image out(raw.height(), raw.width());
  auto src = raw.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]) / 255.0f;
  return out;
}

}  // namespace

std::vector<UltrasoundSample> load_corpus(const fs::path& root_dir, double mask_threshold_factor) {
  const auto images = png_stems(root_dir / "Images");
  const auto masks = png_stems(root_dir / "Masks");

  std::vector<std::string> orphans;
  std::set_difference(images.begin(), images.end(), masks.begin(), masks.end(),
                      std::back_inserter(orphans));
  if (!orphans.empty()) {
    throw IntegrityError("images without masks: " + join(orphans));
  }
  for (const auto& m : masks) {
    if (!images.count(m)) log::warn("mask ", m, " has no image; ignored");
  }

  const auto meta_path = root_dir / "metadata.csv";
  if (!fs::exists(meta_path)) throw IoError("missing " + meta_path.string());
  const auto rows = csv::read_file(meta_path);
  if (rows.empty()) throw IntegrityError(meta_path.string() + " is empty");

  Columns cols;
  for (std::size_t i = 0; i < rows.front().size(); ++i) cols.index[rows.front()[i]] = i;
  for (const char* required : {"case_id", "birads"}) {
    if (!cols.index.count(required)) {
      throw IntegrityError(meta_path.string() + ": missing column '" + required + "'");
    }
  }

  std::map<std::string, ClinicalRecord> records;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    auto rec = parse_record(rows[r], cols);
    if (rec.case_id.empty()) throw IntegrityError("metadata row " + std::to_string(r) + " has no case_id");
    if (!images.count(rec.case_id)) {
      log::warn("metadata row for ", rec.case_id, " has no image; ignored");
      continue;
    }
    auto id = rec.case_id;
    records.emplace(std::move(id), std::move(rec));
  }

  std::vector<std::string> unlabeled;
  for (const auto& id : images) {
    if (!records.count(id)) unlabeled.push_back(id);
  }
  if (!unlabeled.empty()) throw IntegrityError("images without metadata: " + join(unlabeled));

  std::vector<UltrasoundSample> corpus;
  corpus.reserve(images.size());
  for (const auto& id : images) {
    UltrasoundSample s;
    s.record = records.at(id);
    s.image = to_unit_image(png::read_gray8(root_dir / "Images" / (id + ".png")));
    const auto raw_mask = to_unit_image(png::read_gray8(root_dir / "Masks" / (id + ".png")));
    if (!raw_mask.same_shape(s.image)) {
      throw IntegrityError("case " + id + ": mask dimensions differ from image");
    }
    s.mask = process_mask(raw_mask, mask_threshold_factor);
    corpus.push_back(std::move(s));
  }
  return corpus;
}

void write_corpus(const fs::path& root_dir, const std::vector<UltrasoundSample>& corpus) {
  fs::create_directories(root_dir / "Images");
  fs::create_directories(root_dir / "Masks");
  std::ofstream meta(root_dir / "metadata.csv");
  if (!meta) throw IoError("cannot write " + (root_dir / "metadata.csv").string());
  meta << kMetadataHeader << '\n';
  for (const auto& s : corpus) {
    const auto& r = s.record;
    png::write_gray8(root_dir / "Images" / (r.case_id + ".png"), png::to_gray8(s.image));
    Grid<std::uint8_t> mask(s.mask.height(), s.mask.width());
    for (std::size_t i = 0; i < mask.size(); ++i) mask.data()[i] = s.mask.data()[i] ? 255 : 0;
    png::write_gray8(root_dir / "Masks" / (r.case_id + ".png"), mask);
    meta << csv::format_row({r.case_id, std::to_string(r.birads), std::string(to_string(r.pathology)),
                             std::string(to_string(r.histology)), std::string(to_string(r.laterality)),
                             r.report_text})
         << '\n';
  }
}

}  // namespace medctx::data
