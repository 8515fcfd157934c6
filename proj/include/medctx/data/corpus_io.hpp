#pragma once

#include <filesystem>
#include <vector>

#include "medctx/data/clinical.hpp"

namespace medctx::data {

/// Column order of metadata.csv.
inline constexpr const char* kMetadataHeader =
    "case_id,birads,pathology,histology,laterality,report_text";

/// Loads a BUS-BRA style directory:
///   Images/{case_id}.png   8-bit grayscale
///   Masks/{case_id}.png    8-bit, soft-thresholded on load
///   metadata.csv           header as kMetadataHeader (extra columns ignored)
///
/// Missing histology/laterality/pathology/report_text fields are defaulted and
/// a warning is logged for each. Throws IntegrityError for an image without a
/// mask or metadata, and IoError for unreadable files.
std::vector<UltrasoundSample> load_corpus(const std::filesystem::path& root_dir,
                                          double mask_threshold_factor = 2.5);

/// Writes samples in the layout load_corpus reads. Images are quantized to 8 bits.
void write_corpus(const std::filesystem::path& root_dir, const std::vector<UltrasoundSample>& corpus);

}  // namespace medctx::data
