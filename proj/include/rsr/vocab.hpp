#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rsr {

using TokenId = std::uint32_t;

/// Encoded token ids. Every id is < the vocabulary size it was encoded with.
struct TokenSequence {
  std::vector<TokenId> ids;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  bool operator==(const TokenSequence&) const = default;
};

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kBosId = 2;
inline constexpr TokenId kEosId = 3;
inline constexpr std::size_t kReservedCount = 4;

/// Lowercases ASCII, splits on whitespace and detaches each of `. ! ? ,` as a
/// standalone token. "Cat!" -> {"cat", "!"}.
std::vector<std::string> tokenize(std::string_view text);

bool is_punctuation_token(std::string_view token);
bool is_sentence_delimiter(std::string_view token);

class Vocab {
 public:
  /// Builds a vocabulary from `corpus`, keeping at most `max_size` words
  /// (reserved ids excluded). Words are ranked by descending frequency with a
  /// lexicographic tie-break.
  static Vocab build(std::string_view corpus, std::size_t max_size);

  /// Reassembles a vocabulary from (word, frequency) entries in id order.
  /// The first four entries must be the reserved tokens.
  static Vocab from_entries(std::vector<std::string> words, std::vector<std::uint64_t> freqs);

  std::size_t size() const { return words_.size(); }
  std::optional<TokenId> find(std::string_view word) const;
  TokenId id_or_unk(std::string_view word) const;
  const std::string& word(TokenId id) const;
  std::uint64_t frequency(TokenId id) const;

  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::uint64_t>& frequencies() const { return freqs_; }

  TokenSequence encode(std::string_view text) const;
  std::string decode(const TokenSequence& seq) const;

  bool operator==(const Vocab& other) const {
    return words_ == other.words_ && freqs_ == other.freqs_;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> freqs_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace rsr
