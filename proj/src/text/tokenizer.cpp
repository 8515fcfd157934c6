#include "medctx/text/tokenizer.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>

#include "medctx/core/errors.hpp"
#include "medctx/data/clinical.hpp"

namespace medctx::text {
namespace {

std::vector<std::string> builtin_tokens() {
  std::vector<std::string> t = {"[PAD]", "[UNK]", "[BOS]", "[EOS]"};
  for (const char* p : {".", ":", ",", "-", "(", ")", ";", "/", "%", "'"}) t.emplace_back(p);
  for (char d = '0'; d <= '9'; ++d) t.emplace_back(1, d);
  // Words of the report grammar, then common ultrasound vocabulary.
  for (const char* w :
       {"bi", "rads", "benign", "finding", "routine", "screening", "recommended", "probably",
        "short", "interval", "follow", "up", "suggested", "suspicious", "abnormality", "tissue",
        "diagnosis", "should", "be", "considered", "highly", "suggestive", "of", "malignancy",
        "appropriate", "action", "taken", "histology", "invasive", "ductal", "carcinoma",
        "fibroadenoma", "cyst", "not", "available", "pathology", "malignant", "location", "left",
        "right", "breast", "low", "model", "confidence", "recommend", "expert", "review",
        "moderate", "high", "narrative", "lesion", "mass", "margin", "margins", "irregular",
        "circumscribed", "oval", "round", "shape", "hypoechoic", "echogenic", "shadowing",
        "posterior", "acoustic", "orientation", "parallel", "size", "mm", "cm", "the", "a", "and",
        "with", "in", "is", "no", "at", "o", "clock", "nipple", "from", "ultrasound", "image",
        "biopsy", "assessment", "category", "findings"}) {
    t.emplace_back(w);
  }
  for (const char* piece : {"##s", "##ed", "##ing", "##ly", "##al", "##ic", "##ous", "##er"}) {
    t.emplace_back(piece);
  }
  for (int b = 0; b < 256; ++b) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "<0x%02X>", b);
    t.emplace_back(buf);
  }
  return t;
}

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

int parse_byte_token(const std::string& tok) {
  if (tok.size() == 6 && tok.rfind("<0x", 0) == 0 && tok.back() == '>') {
    return std::stoi(tok.substr(3, 2), nullptr, 16);
  }
  return -1;
}

void append_bytes(std::string_view s, const Vocabulary& vocab, std::vector<int>& out) {
  for (unsigned char c : s) out.push_back(vocab.byte_id(c));
}

// Greedy longest-match wordpiece over one lowercase word (no digits).
void encode_word(const std::string& word, const Vocabulary& vocab, std::vector<int>& out) {
  std::size_t pos = 0;
  bool first = true;
  while (pos < word.size()) {
    int best_id = -1;
    std::size_t best_len = 0;
    for (std::size_t len = word.size() - pos; len > 0; --len) {
      const std::string piece = (first ? "" : "##") + word.substr(pos, len);
      if (const int id = vocab.find(piece); id >= 0) {
        best_id = id;
        best_len = len;
        break;
      }
    }
    if (best_id < 0) {
      // A word that starts in byte fallback carries its own separator so the
      // detokenizer does not glue it to the previous word.
      if (first && !out.empty()) out.push_back(vocab.byte_id(' '));
      append_bytes(std::string_view(word).substr(pos), vocab, out);
      return;
    }
    out.push_back(best_id);
    pos += best_len;
    first = false;
  }
}

// Byte tokens emitted out of order (an untrained decoder does this) can form
// invalid UTF-8; such bytes become U+FFFD.
std::string repair_utf8(const std::string& in) {
  std::string out;
  std::size_t i = 0;
  while (i < in.size()) {
    const auto c = static_cast<unsigned char>(in[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    bool ok = len > 0 && i + len <= in.size();
    for (std::size_t k = 1; ok && k < len; ++k) ok = (static_cast<unsigned char>(in[i + k]) >> 6) == 0x2;
    if (ok && len == 2) ok = c >= 0xC2;
    if (ok) {
      out.append(in, i, len);
      i += len;
    } else {
      out += "\xEF\xBF\xBD";
      ++i;
    }
  }
  return out;
}

}  // namespace

const Vocabulary& Vocabulary::builtin() {
  static const Vocabulary v = from_tokens(builtin_tokens());
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.byte_ids_.fill(-1);
  for (int i = 0; i < static_cast<int>(v.tokens_.size()); ++i) {
    if (!v.index_.emplace(v.tokens_[i], i).second) {
      throw InvalidArgument("duplicate vocabulary token '" + v.tokens_[i] + "'");
    }
    if (const int b = parse_byte_token(v.tokens_[i]); b >= 0) v.byte_ids_[b] = i;
  }
  if (v.tokens_.size() < 4 || v.tokens_[kPadId] != "[PAD]" || v.tokens_[kUnkId] != "[UNK]" ||
      v.tokens_[kBosId] != "[BOS]" || v.tokens_[kEosId] != "[EOS]") {
    throw InvalidArgument("vocabulary must start with [PAD] [UNK] [BOS] [EOS]");
  }
  for (int& id : v.byte_ids_) {
    if (id < 0) id = kUnkId;
  }
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw InvalidArgument("token id " + std::to_string(id) + " out of vocabulary");
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : it->second;
}

int TextTokens::length() const {
  int n = 0;
  for (auto f : attention_flags) n += f;
  return n;
}

std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<int> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (std::isdigit(c)) {
      out.push_back(vocab.find(std::string(1, static_cast<char>(c))));
      ++i;
      continue;
    }
    if (is_word_char(c)) {
      std::size_t j = i;
      std::string word;
      while (j < text.size() && is_word_char(static_cast<unsigned char>(text[j])) &&
             !std::isdigit(static_cast<unsigned char>(text[j]))) {
        word += static_cast<char>(std::tolower(static_cast<unsigned char>(text[j])));
        ++j;
      }
      encode_word(word, vocab, out);
      i = j;
      continue;
    }
    const int id = vocab.find(std::string(1, static_cast<char>(c)));
    if (id >= 0) {
      out.push_back(id);
    } else {
      out.push_back(vocab.byte_id(c));
    }
    ++i;
  }
  return out;
}

TextTokens tokenize_report(std::string_view text, const Vocabulary& vocab) {
  TextTokens t;
  const auto ids = tokenize(text, vocab);
  const std::size_t n = std::min<std::size_t>(ids.size(), kMaxTokens);
  for (std::size_t i = 0; i < n; ++i) {
    t.ids[i] = ids[i];
    t.attention_flags[i] = 1;
  }
  return t;
}

std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::string out;
  bool glue_next = false;
  auto is_attach_left = [](const std::string& tok) {
    return tok == "." || tok == ":" || tok == "," || tok == ";" || tok == ")" || tok == "%" ||
           tok == "'";
  };
  for (int id : ids) {
    if (id == kPadId || id == kBosId || id == kEosId) continue;
    const auto& tok = vocab.token(id);
    if (id == kUnkId) continue;
    if (const int b = parse_byte_token(tok); b >= 0) {
      out += static_cast<char>(b);
      continue;
    }
    if (tok.rfind("##", 0) == 0) {
      out += tok.substr(2);
      continue;
    }
    if (tok == "-" || tok == "/") {
      out += tok;
      glue_next = true;
      continue;
    }
    if (!out.empty() && !glue_next && !is_attach_left(tok) && out.back() != '(') out += ' ';
    glue_next = false;
    out += tok;
  }
  out = data::normalize_terminology(repair_utf8(out));
  // Capitalize sentence starts.
  bool start = true;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto c = static_cast<unsigned char>(out[i]);
    if (start && std::isalpha(c)) {
      out[i] = static_cast<char>(std::toupper(c));
      start = false;
    } else if (out[i] == '.') {
      start = true;
    } else if (!std::isspace(c)) {
      start = false;
    }
  }
  return out;
}

}  // namespace medctx::text
