#include "medctx/data/clinical.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include "medctx/core/errors.hpp"

namespace medctx::data {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(a, b - a + 1));
}

constexpr std::array<std::string_view, kNumHistology> kHistologyNames = {
    "Invasive ductal carcinoma", "Fibroadenoma", "Cyst", "Not available"};

}  // namespace

void validate(const ClinicalRecord& record) {
  if (record.birads < kMinBirads || record.birads > kMaxBirads) {
    throw InvalidArgument("case " + record.case_id + ": BI-RADS " +
                          std::to_string(record.birads) + " outside clinical range 2-5");
  }
}

void validate(const UltrasoundSample& sample) {
  validate(sample.record);
  require_same_shape(sample.image, sample.mask, "sample " + sample.record.case_id);
  for (auto v : sample.mask.values()) {
    if (v > 1) throw InvalidArgument("sample " + sample.record.case_id + ": mask is not binary");
  }
}

std::string_view to_string(Pathology p) {
  return p == Pathology::malignant ? "Malignant" : "Benign";
}

std::string_view to_string(Laterality l) { return l == Laterality::left ? "left" : "right"; }

std::string_view to_string(Histology h) { return kHistologyNames.at(static_cast<int>(h)); }

std::optional<Pathology> parse_pathology(std::string_view text) {
  const auto t = lower(trim(text));
  if (t == "benign") return Pathology::benign;
  if (t == "malignant") return Pathology::malignant;
  return std::nullopt;
}

std::optional<Laterality> parse_laterality(std::string_view text) {
  const auto t = lower(trim(text));
  if (t == "left" || t == "l") return Laterality::left;
  if (t == "right" || t == "r") return Laterality::right;
  return std::nullopt;
}

std::optional<Histology> parse_histology(std::string_view text) {
  const auto t = lower(trim(text));
  for (int i = 0; i < kNumHistology; ++i) {
    if (t == lower(kHistologyNames[i])) return static_cast<Histology>(i);
  }
  if (t == "idc") return Histology::invasive_ductal_carcinoma;
  if (t == "n/a" || t == "na" || t == "none") return Histology::not_available;
  return std::nullopt;
}

std::string_view birads_phrase(int birads) {
  switch (birads) {
    case 2: return "Benign finding. Routine screening recommended.";
    case 3: return "Probably benign finding. Short-interval follow-up suggested.";
    case 4: return "Suspicious abnormality. Tissue diagnosis should be considered.";
    case 5: return "Highly suggestive of malignancy. Appropriate action should be taken.";
    default: throw InvalidArgument("no phrase for BI-RADS " + std::to_string(birads));
  }
}

std::string normalize_terminology(std::string_view text) {
  static const std::regex kVariants(R"(\bbi[\s-]?rads\b)", std::regex::icase);
  return std::regex_replace(std::string(text), kVariants, "BI-RADS");
}

std::string synthesize_birads_text(const ClinicalRecord& record) {
  validate(record);
  std::string out = "BI-RADS " + std::to_string(record.birads) + ": ";
  out += birads_phrase(record.birads);
  out += " Histology: ";
  out += to_string(record.histology);
  out += ". Pathology: ";
  out += to_string(record.pathology);
  out += ". Location: ";
  out += to_string(record.laterality);
  out += " breast.";
  return normalize_terminology(out);
}

std::optional<int> parse_birads_category(std::string_view text) {
  static const std::regex kCategory(R"(bi\s*-?\s*rads\s*([0-9]))", std::regex::icase);
  std::cmatch m;
  const std::string s(text);
  if (!std::regex_search(s.c_str(), m, kCategory)) return std::nullopt;
  const int k = m[1].str()[0] - '0';
  if (k < kMinBirads || k > kMaxBirads) return std::nullopt;
  return k;
}

std::optional<ReportFields> parse_report(std::string_view text) {
  static const std::regex kHist(R"(histology\s*:\s*([^.]*?)\s*\.)", std::regex::icase);
  static const std::regex kPath(R"(pathology\s*:\s*([a-z]+))", std::regex::icase);
  static const std::regex kSide(R"(location\s*:\s*(left|right)\s+breast)", std::regex::icase);

  ReportFields fields;
  auto k = parse_birads_category(text);
  if (!k) return std::nullopt;
  fields.birads = *k;

  const std::string s(text);
  std::smatch m;
  if (!std::regex_search(s, m, kHist)) return std::nullopt;
  auto h = parse_histology(m[1].str());
  if (!h) return std::nullopt;
  fields.histology = *h;

  if (!std::regex_search(s, m, kPath)) return std::nullopt;
  auto p = parse_pathology(m[1].str());
  if (!p) return std::nullopt;
  fields.pathology = *p;

  if (!std::regex_search(s, m, kSide)) return std::nullopt;
  auto l = parse_laterality(m[1].str());
  if (!l) return std::nullopt;
  fields.laterality = *l;
  return fields;
}

}  // namespace medctx::data
