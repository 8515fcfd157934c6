#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

namespace medctx::eval {

/// Lowercased words; every punctuation character (including '-') is a token.
std::vector<std::string> metric_tokens(std::string_view text);

/// Corpus BLEU-4: clipped n-gram precisions pooled over the corpus, uniform
/// weights, brevity penalty exp(1 - r/c) when c < r. Any zero precision gives 0.
double bleu4(const std::vector<std::string>& candidates, const std::vector<std::string>& references);

/// CIDEr: per n in 1..4, tf-idf vectors (idf from the reference documents)
/// compared by cosine; averaged over n and then over the corpus.
double cider(const std::vector<std::string>& candidates, const std::vector<std::string>& references);

/// Unigram METEOR without synonyms: exact then stem matches, F = 10PR/(R+9P),
/// averaged over sentences.
double meteor(const std::vector<std::string>& candidates, const std::vector<std::string>& references);

/// Suffix-stripping stem used for METEOR matching.
std::string stem(std::string_view word);

struct NlgMetrics {
  double bleu4 = 0.0;
  double cider = 0.0;
  double meteor = 0.0;
};

NlgMetrics nlg_metrics(const std::vector<std::string>& candidates, const std::vector<std::string>& references);

/// Mean of (cos + 1) / 2 over paired rows; a zero-norm row counts as cosine 0
/// and logs a warning.
double clip_alignment(const torch::Tensor& img_embs, const torch::Tensor& txt_embs);

/// Fraction of texts whose stated BI-RADS category equals the truth.
/// Texts without a parseable category count as wrong and are logged.
double birads_accuracy(const std::vector<std::string>& texts, const std::vector<int>& truth);
/// Same from B x 4 logits (argmax, ties to the lower category).
double birads_accuracy(const torch::Tensor& birads_logits, const std::vector<int>& truth);

}  // namespace medctx::eval
