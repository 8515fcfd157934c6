#include "medctx/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "medctx/core/errors.hpp"
#include "medctx/core/rng.hpp"

namespace medctx::data {

int stratum_of(const ClinicalRecord& record, const std::string& key) {
  if (key == "birads") return record.birads;
  if (key == "pathology") return static_cast<int>(record.pathology);
  if (key == "histology") return static_cast<int>(record.histology);
  if (key == "laterality") return static_cast<int>(record.laterality);
  throw InvalidArgument("unknown stratify key '" + key + "'");
}

SplitIndices stratified_split_indices(const std::vector<ClinicalRecord>& records, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw InvalidArgument("train_fraction must lie in (0,1)");
  }
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < records.size(); ++i) {
    strata[stratum_of(records[i], spec.stratify_key)].push_back(i);
  }
  SplitIndices out;
  for (auto& [key, members] : strata) {
    if (members.size() < 2) {
      throw InvalidArgument("stratum " + spec.stratify_key + "=" + std::to_string(key) +
                            " has a single member; cannot split");
    }
    auto rng = make_rng(spec.seed, {static_cast<std::uint64_t>(key + 1000)});
    shuffle(members.begin(), members.end(), rng);
    // small epsilon so that e.g. 0.8*10 lands on 8, not 7.999...
    auto n_train = static_cast<std::size_t>(
        std::floor(spec.train_fraction * static_cast<double>(members.size()) + 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
    out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<long>(n_train));
    out.val.insert(out.val.end(), members.begin() + static_cast<long>(n_train), members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  return out;
}

std::pair<std::vector<UltrasoundSample>, std::vector<UltrasoundSample>> stratified_split(
    const std::vector<UltrasoundSample>& corpus, const SplitSpec& spec) {
  std::vector<ClinicalRecord> records;
  records.reserve(corpus.size());
  for (const auto& s : corpus) records.push_back(s.record);
  const auto idx = stratified_split_indices(records, spec);
  std::pair<std::vector<UltrasoundSample>, std::vector<UltrasoundSample>> out;
  for (auto i : idx.train) out.first.push_back(corpus[i]);
  for (auto i : idx.val) out.second.push_back(corpus[i]);
  return out;
}

}  // namespace medctx::data
