#include "medctx/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "medctx/core/errors.hpp"
#include "medctx/core/rng.hpp"

namespace medctx::data {
namespace {

constexpr double kPi = std::numbers::pi;

std::string lesion_key(int birads, const char* field) {
  return "birads" + std::to_string(birads) + "." + field;
}

struct Placement {
  double cx, cy, major, minor, angle, phase3, phase5;
};

Placement draw_placement(Rng& rng, const LesionParams& p, Laterality side, int size) {
  Placement pl{};
  const double half_lo = side == Laterality::left ? 0.18 : 0.68;
  pl.cx = uniform(rng, half_lo, half_lo + 0.14) * size;
  pl.cy = uniform(rng, 0.35, 0.65) * size;
  const double radius = std::clamp(p.radius_mean + p.radius_std * standard_normal(rng), 0.05, 0.18);
  const double aspect = uniform(rng, p.aspect_min, p.aspect_max);
  pl.major = radius * size;
  pl.minor = radius * aspect * size;
  pl.angle = uniform(rng, -0.5, 0.5);
  pl.phase3 = uniform(rng, 0.0, 2.0 * kPi);
  pl.phase5 = uniform(rng, 0.0, 2.0 * kPi);
  return pl;
}

// Signed distance (pixels, positive inside) to the lesion boundary.
double signed_distance(const Placement& pl, double irregularity, double x, double y) {
  const double dx = x - pl.cx;
  const double dy = y - pl.cy;
  const double c = std::cos(pl.angle), s = std::sin(pl.angle);
  const double u = (dx * c + dy * s) / pl.major;
  const double v = (-dx * s + dy * c) / pl.minor;
  const double rho = std::sqrt(u * u + v * v);
  const double theta = std::atan2(v, u);
  const double boundary =
      1.0 + irregularity * (0.6 * std::sin(3.0 * theta + pl.phase3) +
                            0.4 * std::sin(5.0 * theta + pl.phase5));
  return (boundary - rho) * std::sqrt(pl.major * pl.minor);
}

void draw_lesion(Image& img, Mask* mask, const Placement& pl, const LesionParams& p) {
  const int size = img.height();
  const double edge_px = std::max(0.5, p.edge_width * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double sd = signed_distance(pl, p.irregularity, x + 0.5, y + 0.5);
      const double inside = 1.0 / (1.0 + std::exp(-sd / edge_px));
      img(y, x) = static_cast<float>(img(y, x) * (1.0 - p.contrast * inside));
      if (mask && sd >= 0.0) (*mask)(y, x) = 1;
    }
  }
  if (p.shadow <= 0.0) return;
  // Posterior shadow: darkening below the lesion, fading with depth.
  const int y0 = static_cast<int>(pl.cy + pl.minor);
  for (int y = std::max(0, y0); y < size; ++y) {
    const double depth = (y - y0) / static_cast<double>(size);
    const double fade = std::exp(-depth * 4.0);
    for (int x = 0; x < size; ++x) {
      const double lateral = (x + 0.5 - pl.cx) / (0.8 * pl.major);
      const double profile = std::exp(-lateral * lateral);
      img(y, x) = static_cast<float>(img(y, x) * (1.0 - p.shadow * fade * profile));
    }
  }
}

Image render_background(Rng& rng, const SyntheticParams& params, int size) {
  Image img(size, size);
  struct Wave { double fx, fy, phase, amp; };
  std::array<Wave, 4> waves{};
  for (auto& w : waves) {
    w.fx = uniform(rng, 0.5, 3.0);
    w.fy = uniform(rng, 0.5, 3.0);
    w.phase = uniform(rng, 0.0, 2.0 * kPi);
    w.amp = params.background_variation * uniform(rng, 0.3, 1.0) / 2.0;
  }
  for (int y = 0; y < size; ++y) {
    const double ny = static_cast<double>(y) / size;
    // Brighter superficial tissue band, darker deep region.
    const double depth_profile = 0.12 * std::exp(-std::pow((ny - 0.15) / 0.08, 2)) - 0.1 * ny;
    for (int x = 0; x < size; ++x) {
      const double nx = static_cast<double>(x) / size;
      double v = params.background_mean + depth_profile;
      for (const auto& w : waves) v += w.amp * std::sin(2.0 * kPi * (w.fx * nx + w.fy * ny) + w.phase);
      img(y, x) = static_cast<float>(v);
    }
  }
  return img;
}

void apply_speckle(Image& img, Rng& rng, double sigma) {
  const int h = img.height(), w = img.width();
  Image noise(h, w);
  for (auto& v : noise.values()) v = static_cast<float>(standard_normal(rng));
  // 3x3 box blur gives the noise a grain larger than one pixel.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      int count = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          acc += noise(yy, xx);
          ++count;
        }
      }
      const double grain = acc / count * 3.0;  // rescale to ~unit variance
      img(y, x) = static_cast<float>(std::clamp(img(y, x) * (1.0 + sigma * grain), 0.0, 1.0));
    }
  }
}

}  // namespace

std::array<LesionParams, kNumBirads> SyntheticParams::default_lesions() {
  return {{
      {0.12, 0.02, 0.55, 0.80, 0.008, 0.55, 0.00, 0.00},
      {0.11, 0.02, 0.50, 0.75, 0.012, 0.50, 0.03, 0.05},
      {0.13, 0.025, 0.60, 0.95, 0.020, 0.45, 0.10, 0.20},
      {0.15, 0.03, 0.70, 1.00, 0.030, 0.40, 0.18, 0.35},
  }};
}

SyntheticParams SyntheticParams::from_config(const KeyValueConfig& cfg) {
  SyntheticParams p;
  std::vector<std::string> known;
  for (int k = kMinBirads; k <= kMaxBirads; ++k) {
    auto& l = p.lesion[birads_to_index(k)];
    const std::pair<const char*, double*> fields[] = {
        {"radius_mean", &l.radius_mean}, {"radius_std", &l.radius_std},
        {"aspect_min", &l.aspect_min},   {"aspect_max", &l.aspect_max},
        {"edge_width", &l.edge_width},   {"contrast", &l.contrast},
        {"irregularity", &l.irregularity}, {"shadow", &l.shadow}};
    for (auto [name, ptr] : fields) {
      known.push_back(lesion_key(k, name));
      *ptr = cfg.get_double(known.back(), *ptr);
    }
  }
  const std::pair<const char*, double*> globals[] = {
      {"background_mean", &p.background_mean},
      {"background_variation", &p.background_variation},
      {"speckle_sigma", &p.speckle_sigma},
      {"malignant_histology_na", &p.malignant_histology_na},
      {"benign_cyst", &p.benign_cyst},
      {"benign_histology_na", &p.benign_histology_na}};
  for (auto [name, ptr] : globals) {
    known.emplace_back(name);
    *ptr = cfg.get_double(name, *ptr);
  }
  known.emplace_back("decoy_lesion");
  p.decoy_lesion = cfg.get_bool("decoy_lesion", p.decoy_lesion);
  if (auto unknown = cfg.unknown_keys(known); !unknown.empty()) {
    throw InvalidArgument("unknown synthetic parameter '" + unknown.front() + "'");
  }
  return p;
}

SyntheticParams SyntheticParams::load(const std::filesystem::path& path) {
  return from_config(KeyValueConfig::load(path));
}

KeyValueConfig SyntheticParams::to_config() const {
  KeyValueConfig cfg;
  auto put = [&](const std::string& key, double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    cfg.set(key, os.str());
  };
  for (int k = kMinBirads; k <= kMaxBirads; ++k) {
    const auto& l = lesion[birads_to_index(k)];
    put(lesion_key(k, "radius_mean"), l.radius_mean);
    put(lesion_key(k, "radius_std"), l.radius_std);
    put(lesion_key(k, "aspect_min"), l.aspect_min);
    put(lesion_key(k, "aspect_max"), l.aspect_max);
    put(lesion_key(k, "edge_width"), l.edge_width);
    put(lesion_key(k, "contrast"), l.contrast);
    put(lesion_key(k, "irregularity"), l.irregularity);
    put(lesion_key(k, "shadow"), l.shadow);
  }
  put("background_mean", background_mean);
  put("background_variation", background_variation);
  put("speckle_sigma", speckle_sigma);
  put("malignant_histology_na", malignant_histology_na);
  put("benign_cyst", benign_cyst);
  put("benign_histology_na", benign_histology_na);
  cfg.set("decoy_lesion", decoy_lesion ? "true" : "false");
  return cfg;
}

std::array<int, kNumBirads> apportion_categories(int n) {
  if (n < kNumBirads) {
    throw InvalidArgument("corpus size " + std::to_string(n) +
                          " cannot cover all four BI-RADS categories");
  }
  std::array<int, kNumBirads> counts{};
  int total_ref = 0;
  for (int c : kReferenceCategoryCounts) total_ref += c;

  std::array<double, kNumBirads> remainder{};
  int assigned = 0;
  for (int i = 0; i < kNumBirads; ++i) {
    const double quota = static_cast<double>(n) * kReferenceCategoryCounts[i] / total_ref;
    const int whole = static_cast<int>(std::floor(quota));
    counts[i] = whole;
    assigned += whole;
    remainder[i] = quota - whole;
  }
  std::array<int, kNumBirads> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (int i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % kNumBirads]];
  // small corpora: every category keeps at least one case
  for (auto& c : counts) {
    if (c > 0) continue;
    ++c;
    --*std::max_element(counts.begin(), counts.end());
  }
  return counts;
}

UltrasoundSample render_sample(const ClinicalRecord& record, std::uint64_t stream_seed,
                               int image_size, const SyntheticParams& params) {
  if (image_size < 16) throw InvalidArgument("image_size must be at least 16");
  Rng rng(stream_seed);
  UltrasoundSample s;
  s.record = record;
  s.image = render_background(rng, params, image_size);
  s.mask = Mask(image_size, image_size, 0);

  const auto& lp = params.for_birads(record.birads);
  const auto placement = draw_placement(rng, lp, record.laterality, image_size);
  draw_lesion(s.image, &s.mask, placement, lp);
  if (params.decoy_lesion) {
    const auto other = record.laterality == Laterality::left ? Laterality::right : Laterality::left;
    const auto decoy = draw_placement(rng, lp, other, image_size);
    draw_lesion(s.image, nullptr, decoy, lp);
  }
  apply_speckle(s.image, rng, params.speckle_sigma);
  return s;
}

std::vector<UltrasoundSample> generate_synthetic_corpus(int n, std::uint64_t seed, int image_size,
                                                        const SyntheticParams& params) {
  const auto counts = apportion_categories(n);
  std::vector<int> categories;
  categories.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < kNumBirads; ++i) categories.insert(categories.end(), counts[i], index_to_birads(i));
  auto order_rng = make_rng(seed, {0xCA7E});
  shuffle(categories.begin(), categories.end(), order_rng);

  std::vector<UltrasoundSample> corpus;
  corpus.reserve(categories.size());
  for (int i = 0; i < n; ++i) {
    auto rng = make_rng(seed, {0x5A3D, static_cast<std::uint64_t>(i)});
    ClinicalRecord rec;
    char id[32];
    std::snprintf(id, sizeof id, "syn_%05d", i);
    rec.case_id = id;
    rec.birads = categories[static_cast<std::size_t>(i)];
    rec.pathology = rec.birads >= 4 ? Pathology::malignant : Pathology::benign;
    if (rec.pathology == Pathology::malignant) {
      rec.histology = bernoulli(rng, params.malignant_histology_na) ? Histology::not_available
                                                                    : Histology::invasive_ductal_carcinoma;
    } else if (bernoulli(rng, params.benign_histology_na)) {
      rec.histology = Histology::not_available;
    } else {
      rec.histology = bernoulli(rng, params.benign_cyst) ? Histology::cyst : Histology::fibroadenoma;
    }
    rec.laterality = bernoulli(rng, 0.5) ? Laterality::left : Laterality::right;
    rec.report_text = synthesize_birads_text(rec);
    corpus.push_back(render_sample(rec, rng(), image_size, params));
  }
  return corpus;
}

}  // namespace medctx::data
