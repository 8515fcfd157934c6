#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "medctx/data/clinical.hpp"

namespace medctx::data {

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 42;
  std::string stratify_key = "birads";  // birads | pathology | histology | laterality
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Per stratum, floor(train_fraction * count) members go to train and the rest
/// to val, after a seeded shuffle. Strata are visited in ascending key order and
/// each output list is sorted by corpus index. Every stratum needs >= 2 members.
SplitIndices stratified_split_indices(const std::vector<ClinicalRecord>& records, const SplitSpec& spec);

std::pair<std::vector<UltrasoundSample>, std::vector<UltrasoundSample>> stratified_split(
    const std::vector<UltrasoundSample>& corpus, const SplitSpec& spec = {});

int stratum_of(const ClinicalRecord& record, const std::string& key);

}  // namespace medctx::data
