#include "rsr/vocab.hpp"

#include <algorithm>
#include <map>

#include "rsr/error.hpp"

namespace rsr {

namespace {

const char* const kReserved[kReservedCount] = {"<pad>", "<unk>", "<bos>", "<eos>"};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_punct_char(char c) { return c == '.' || c == '!' || c == '?' || c == ','; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : text) {
    if (is_space(c)) {
      flush();
    } else if (is_punct_char(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

bool is_punctuation_token(std::string_view token) {
  return token.size() == 1 && is_punct_char(token[0]);
}

bool is_sentence_delimiter(std::string_view token) {
  return token == "." || token == "!" || token == "?";
}

Vocab Vocab::build(std::string_view corpus, std::size_t max_size) {
  std::map<std::string, std::uint64_t> counts;
  for (auto& tok : tokenize(corpus)) ++counts[tok];
  for (const char* r : kReserved) counts.erase(r);
  if (counts.empty()) throw InvalidArgument("build_vocab: corpus has no tokens");

  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  // std::map iteration is already lexicographic; stable sort keeps that as the tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size) ranked.resize(max_size);

  std::vector<std::string> words;
  std::vector<std::uint64_t> freqs;
  for (const char* r : kReserved) {
    words.emplace_back(r);
    freqs.push_back(0);
  }
  for (auto& [w, f] : ranked) {
    words.push_back(w);
    freqs.push_back(f);
  }
  return from_entries(std::move(words), std::move(freqs));
}

Vocab Vocab::from_entries(std::vector<std::string> words, std::vector<std::uint64_t> freqs) {
  if (words.size() != freqs.size()) throw FormatError("vocab: word/frequency count mismatch");
  if (words.size() < kReservedCount) throw FormatError("vocab: missing reserved tokens");
  for (std::size_t i = 0; i < kReservedCount; ++i) {
    if (words[i] != kReserved[i]) throw FormatError("vocab: reserved token out of place");
  }
  Vocab v;
  v.words_ = std::move(words);
  v.freqs_ = std::move(freqs);
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    if (i >= kReservedCount && v.freqs_[i] == 0) throw FormatError("vocab: zero frequency entry");
    if (!v.index_.emplace(v.words_[i], static_cast<TokenId>(i)).second)
      throw FormatError("vocab: duplicate word '" + v.words_[i] + "'");
  }
  return v;
}

std::optional<TokenId> Vocab::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocab::id_or_unk(std::string_view word) const { return find(word).value_or(kUnkId); }

const std::string& Vocab::word(TokenId id) const {
  if (id >= words_.size()) throw InvalidArgument("decode: token id " + std::to_string(id) + " out of range");
  return words_[id];
}

std::uint64_t Vocab::frequency(TokenId id) const {
  if (id >= freqs_.size()) throw InvalidArgument("frequency: token id out of range");
  return freqs_[id];
}

TokenSequence Vocab::encode(std::string_view text) const {
  TokenSequence seq;
  for (const auto& tok : tokenize(text)) seq.ids.push_back(id_or_unk(tok));
  return seq;
}

std::string Vocab::decode(const TokenSequence& seq) const {
  std::string out;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += word(seq.ids[i]);
  }
  return out;
}

}  // namespace rsr
