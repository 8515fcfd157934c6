#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace medctx::text {

inline constexpr int kMaxTokens = 128;
inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kBosId = 2;
inline constexpr int kEosId = 3;

/// Token list where line number (0-based) is the id. Contains special tokens,
/// whole words, "##" continuation pieces and 256 byte tokens "<0xNN>".
class Vocabulary {
 public:
  static const Vocabulary& builtin();
  static Vocabulary from_tokens(std::vector<std::string> tokens);
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  [[nodiscard]] int size() const { return static_cast<int>(tokens_.size()); }
  [[nodiscard]] const std::string& token(int id) const;
  /// -1 if absent.
  [[nodiscard]] int find(std::string_view token) const;
  [[nodiscard]] int byte_id(unsigned char b) const { return byte_ids_[b]; }
  [[nodiscard]] const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::array<int, 256> byte_ids_{};
};

struct TextTokens {
  std::array<int, kMaxTokens> ids{};
  std::array<std::uint8_t, kMaxTokens> attention_flags{};

  [[nodiscard]] int length() const;
  friend bool operator==(const TextTokens&, const TextTokens&) = default;
};

/// Lowercased wordpiece-style split with byte fallback. Unbounded length.
std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab = Vocabulary::builtin());

/// Fixed-length encoder input: truncated / padded to kMaxTokens with pad id 0.
TextTokens tokenize_report(std::string_view text, const Vocabulary& vocab = Vocabulary::builtin());

/// Inverse of tokenize up to case and whitespace; special tokens are dropped.
/// Sentence starts are capitalized and "bi-rads" is restored to "BI-RADS".
/// The result is always valid UTF-8.
std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab = Vocabulary::builtin());

}  // namespace medctx::text
