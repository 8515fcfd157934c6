#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "medctx/core/grid.hpp"

namespace medctx::data {

enum class Pathology { benign = 0, malignant = 1 };
enum class Laterality { left = 0, right = 1 };
enum class Histology { invasive_ductal_carcinoma = 0, fibroadenoma = 1, cyst = 2, not_available = 3 };

inline constexpr int kMinBirads = 2;
inline constexpr int kMaxBirads = 5;
inline constexpr int kNumBirads = kMaxBirads - kMinBirads + 1;
inline constexpr int kNumPathology = 2;
inline constexpr int kNumLaterality = 2;
inline constexpr int kNumHistology = 4;

struct ClinicalRecord {
  std::string case_id;
  int birads = 3;
  Pathology pathology = Pathology::benign;
  Histology histology = Histology::not_available;
  Laterality laterality = Laterality::right;
  std::string report_text;

  friend bool operator==(const ClinicalRecord&, const ClinicalRecord&) = default;
};

struct UltrasoundSample {
  Image image;  // single channel, [0,1]
  Mask mask;    // {0,1}
  ClinicalRecord record;

  friend bool operator==(const UltrasoundSample&, const UltrasoundSample&) = default;
};

/// Throws InvalidArgument when the record violates the clinical invariants.
void validate(const ClinicalRecord& record);
/// Throws ShapeError / InvalidArgument for mismatched or non-binary data.
void validate(const UltrasoundSample& sample);

std::string_view to_string(Pathology p);
std::string_view to_string(Laterality l);
std::string_view to_string(Histology h);

/// Case-insensitive parsing; nullopt for unrecognised text.
std::optional<Pathology> parse_pathology(std::string_view text);
std::optional<Laterality> parse_laterality(std::string_view text);
std::optional<Histology> parse_histology(std::string_view text);

/// Category phrase used in reports, e.g. "Suspicious abnormality. Tissue
/// diagnosis should be considered." for category 4.
std::string_view birads_phrase(int birads);

/// Rewrites spelling variants ("bi-rads", "birads", "Bi-Rads") to "BI-RADS".
std::string normalize_terminology(std::string_view text);

/// Renders the canonical report sentence for a record.
std::string synthesize_birads_text(const ClinicalRecord& record);

struct ReportFields {
  int birads = 0;
  Histology histology = Histology::not_available;
  Pathology pathology = Pathology::benign;
  Laterality laterality = Laterality::right;
  friend bool operator==(const ReportFields&, const ReportFields&) = default;
};

/// Inverse of synthesize_birads_text. Tolerates case differences and spacing
/// around punctuation (as produced by detokenized model output).
std::optional<ReportFields> parse_report(std::string_view text);

/// Only the stated category, e.g. "BI-RADS 4" -> 4. nullopt when absent.
std::optional<int> parse_birads_category(std::string_view text);

// Structured descriptor codes. The extra trailing id in each vocabulary is "unknown".
inline constexpr int kBiradsVocab = kNumBirads + 1;
inline constexpr int kPathologyVocab = kNumPathology + 1;
inline constexpr int kLateralityVocab = kNumLaterality + 1;

inline int birads_to_index(int birads) { return birads - kMinBirads; }
inline int index_to_birads(int index) { return index + kMinBirads; }

}  // namespace medctx::data
