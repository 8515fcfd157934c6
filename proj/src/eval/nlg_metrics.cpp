#include "medctx/eval/nlg_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "medctx/core/errors.hpp"
#include "medctx/core/log.hpp"
#include "medctx/data/clinical.hpp"
#include "medctx/explain/explain.hpp"

namespace medctx::eval {
namespace {

using Ngram = std::vector<std::string>;
using Counts = std::map<Ngram, double>;

Counts ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  Counts out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) out[Ngram(tokens.begin() + i, tokens.begin() + i + n)] += 1.0;
  return out;
}

void check_corpus(const std::vector<std::string>& c, const std::vector<std::string>& r) {
  if (c.empty()) throw InvalidArgument("empty corpus");
  if (c.size() != r.size()) throw InvalidArgument("candidate and reference counts differ");
}

}  // namespace

std::vector<std::string> metric_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      word.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      flush();
      if (!std::isspace(ch)) out.emplace_back(1, static_cast<char>(ch));
    }
  }
  flush();
  return out;
}

double bleu4(const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
  check_corpus(candidates, references);
  double match[4] = {0, 0, 0, 0}, total[4] = {0, 0, 0, 0};
  double cand_len = 0.0, ref_len = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto c = metric_tokens(candidates[i]);
    const auto r = metric_tokens(references[i]);
    cand_len += static_cast<double>(c.size());
    ref_len += static_cast<double>(r.size());
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cc = ngrams(c, n);
      const auto rc = ngrams(r, n);
      for (const auto& [g, k] : cc) {
        auto it = rc.find(g);
        match[n - 1] += std::min(k, it == rc.end() ? 0.0 : it->second);
        total[n - 1] += k;
      }
    }
  }
  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    if (match[n] == 0.0 || total[n] == 0.0) return 0.0;
    log_sum += 0.25 * std::log(match[n] / total[n]);
  }
  const double bp = cand_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return bp * std::exp(log_sum);
}

double cider(const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
  check_corpus(candidates, references);
  const double docs = static_cast<double>(references.size());
  std::vector<std::vector<std::string>> cand_tokens, ref_tokens;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand_tokens.push_back(metric_tokens(candidates[i]));
    ref_tokens.push_back(metric_tokens(references[i]));
  }
  double score = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    std::map<Ngram, double> df;
    std::vector<Counts> rc(references.size()), cc(candidates.size());
    for (std::size_t i = 0; i < references.size(); ++i) {
      rc[i] = ngrams(ref_tokens[i], n);
      cc[i] = ngrams(cand_tokens[i], n);
      for (const auto& [g, _] : rc[i]) df[g] += 1.0;
    }
    auto vec = [&](const Counts& counts) {
      std::map<Ngram, double> v;
      double len = 0.0;
      for (const auto& [g, k] : counts) len += k;
      for (const auto& [g, k] : counts) {
        auto it = df.find(g);
        const double idf = std::log(docs / std::max(1.0, it == df.end() ? 0.0 : it->second));
        v[g] = (k / len) * idf;
      }
      return v;
    };
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto vc = vec(cc[i]);
      const auto vr = vec(rc[i]);
      double dot = 0.0, nc = 0.0, nr = 0.0;
      for (const auto& [g, x] : vc) {
        nc += x * x;
        auto it = vr.find(g);
        if (it != vr.end()) dot += x * it->second;
      }
      for (const auto& [g, x] : vr) nr += x * x;
      if (nc > 0.0 && nr > 0.0) score += dot / std::sqrt(nc * nr) / 4.0;
    }
  }
  return score / static_cast<double>(candidates.size());
}

std::string stem(std::string_view word) {
  std::string w(word);
  auto ends_with = [&](std::string_view suffix) {
    return w.size() >= suffix.size() && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with("ss") && !ends_with("sses")) return w;  // "mass", "class"
  static constexpr std::pair<std::string_view, std::string_view> rules[] = {
      {"ations", ""}, {"ation", ""}, {"ings", ""}, {"ing", ""}, {"sses", "ss"},
      {"ies", "y"},   {"ied", "y"},  {"ed", ""},   {"ly", ""},  {"s", ""}};
  for (auto [suffix, replacement] : rules) {
    if (ends_with(suffix) && w.size() - suffix.size() + replacement.size() >= 3) {
      w.erase(w.size() - suffix.size());
      w += replacement;
      break;
    }
  }
  return w;
}

double meteor(const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
  check_corpus(candidates, references);
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto c = metric_tokens(candidates[i]);
    const auto r = metric_tokens(references[i]);
    if (c.empty() || r.empty()) continue;
    std::vector<bool> used_c(c.size(), false), used_r(r.size(), false);
    double matched = 0.0;
    auto pass = [&](auto&& same) {
      for (std::size_t a = 0; a < c.size(); ++a) {
        if (used_c[a]) continue;
        for (std::size_t b = 0; b < r.size(); ++b) {
          if (!used_r[b] && same(c[a], r[b])) {
            used_c[a] = used_r[b] = true;
            matched += 1.0;
            break;
          }
        }
      }
    };
    pass([](const std::string& x, const std::string& y) { return x == y; });
    pass([](const std::string& x, const std::string& y) { return stem(x) == stem(y); });
    if (matched == 0.0) continue;
    const double p = matched / static_cast<double>(c.size());
    const double rec = matched / static_cast<double>(r.size());
    total += 10.0 * p * rec / (rec + 9.0 * p);
  }
  return total / static_cast<double>(candidates.size());
}

NlgMetrics nlg_metrics(const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
  return {bleu4(candidates, references), cider(candidates, references), meteor(candidates, references)};
}

double clip_alignment(const torch::Tensor& img, const torch::Tensor& txt) {
  if (img.dim() != 2 || !img.sizes().equals(txt.sizes())) throw ShapeError("clip_alignment expects two B x D tensors");
  if (img.size(0) < 1) throw InvalidArgument("clip_alignment needs at least one pair");
  auto a = img.detach().to(torch::kDouble), b = txt.detach().to(torch::kDouble);
  auto na = a.norm(2, 1), nb = b.norm(2, 1);
  auto zero = (na == 0) | (nb == 0);
  const auto zeros = zero.sum().item<std::int64_t>();
  if (zeros > 0) log::warn("clip_alignment: ", zeros, " pair(s) with a zero vector scored as cosine 0");
  auto cos = (a * b).sum(1) / (na * nb).clamp_min(1e-300);
  cos = torch::where(zero, torch::zeros_like(cos), cos).clamp(-1.0, 1.0);
  return ((cos + 1.0) / 2.0).mean().item<double>();
}

double birads_accuracy(const std::vector<std::string>& texts, const std::vector<int>& truth) {
  if (texts.size() != truth.size()) throw InvalidArgument("birads_accuracy: length mismatch");
  if (texts.empty()) throw InvalidArgument("birads_accuracy: no cases");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto k = data::parse_birads_category(texts[i]);
    if (!k) {
      log::warn("birads_accuracy: no BI-RADS category in explanation ", i);
      continue;
    }
    correct += *k == truth[i];
  }
  return static_cast<double>(correct) / static_cast<double>(texts.size());
}

double birads_accuracy(const torch::Tensor& logits, const std::vector<int>& truth) {
  if (logits.dim() != 2 || logits.size(0) != static_cast<std::int64_t>(truth.size())) {
    throw ShapeError("birads_accuracy expects B x 4 logits for B cases");
  }
  if (truth.empty()) throw InvalidArgument("birads_accuracy: no cases");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    correct += data::index_to_birads(explain::argmax_lower(logits[static_cast<std::int64_t>(i)])) == truth[i];
  }
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

}  // namespace medctx::eval
