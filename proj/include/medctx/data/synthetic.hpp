#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "medctx/core/kv_config.hpp"
#include "medctx/data/clinical.hpp"

namespace medctx::data {

/// Per-category lesion appearance. Lengths are fractions of the image side.
struct LesionParams {
  double radius_mean = 0.12;
  double radius_std = 0.02;
  double aspect_min = 0.55;  // minor/major axis ratio range
  double aspect_max = 0.8;
  double edge_width = 0.008;  // boundary blur
  double contrast = 0.55;     // fractional darkening at the lesion core
  double irregularity = 0.0;  // amplitude of angular boundary harmonics
  double shadow = 0.0;        // posterior acoustic shadow strength
};

/// Generator parameters. Every field has an embedded default and a key in the
/// flat parameter file:
///
///   birads{K}.radius_mean, .radius_std, .aspect_min, .aspect_max,
///   .edge_width, .contrast, .irregularity, .shadow   (K in 2..5)
///   background_mean, background_variation, speckle_sigma
///   malignant_histology_na   probability of "Not available" for malignant cases
///   benign_cyst              probability of "Cyst" among benign cases
///   benign_histology_na      probability of "Not available" for benign cases
///   decoy_lesion             also draw an unlabeled lesion in the opposite half
struct SyntheticParams {
  std::array<LesionParams, kNumBirads> lesion = default_lesions();
  double background_mean = 0.55;
  double background_variation = 0.08;
  double speckle_sigma = 0.18;
  double malignant_histology_na = 0.1;
  double benign_cyst = 0.4;
  double benign_histology_na = 0.1;
  bool decoy_lesion = false;

  [[nodiscard]] const LesionParams& for_birads(int birads) const {
    return lesion.at(static_cast<std::size_t>(birads_to_index(birads)));
  }

  static std::array<LesionParams, kNumBirads> default_lesions();
  static SyntheticParams from_config(const KeyValueConfig& cfg);
  static SyntheticParams load(const std::filesystem::path& path);
  [[nodiscard]] KeyValueConfig to_config() const;
};

/// BUS-BRA category counts; the generator apportions categories in these ratios.
inline constexpr std::array<int, kNumBirads> kReferenceCategoryCounts = {562, 463, 693, 157};

/// Category counts for a corpus of size n by largest-remainder apportionment of
/// the reference ratios. Every category gets at least one case.
std::array<int, kNumBirads> apportion_categories(int n);

/// Deterministic surrogate corpus. A pure function of (n, seed, image_size, params).
std::vector<UltrasoundSample> generate_synthetic_corpus(int n, std::uint64_t seed,
                                                        int image_size = 224,
                                                        const SyntheticParams& params = {});

/// One sample for a given record; exposed for tests that need a specific layout.
UltrasoundSample render_sample(const ClinicalRecord& record, std::uint64_t stream_seed,
                               int image_size, const SyntheticParams& params);

}  // namespace medctx::data
