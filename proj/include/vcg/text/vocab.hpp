#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vcg/graph/corpus.hpp"

namespace vcg::text {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

enum class Special : TokenId {
  kPad = 0,
  kUnk,
  kEnd,
  kStartImage,
  kEndImage,
  kStartEvent,
  kEndEvent,
  kStartPlace,
  kEndPlace,
  kRelBefore,
  kRelIntent,
  kRelAfter,
};

inline constexpr std::size_t kNumSpecials = 12;
inline constexpr TokenId kFirstPersonId = static_cast<TokenId>(kNumSpecials);
inline constexpr TokenId kFirstWordId = kFirstPersonId + graph::kMaxPersonTag;

constexpr TokenId id_of(Special s) { return static_cast<TokenId>(s); }
std::string_view special_name(Special s);  // "<pad>", "<unk>", ...
TokenId relation_token(graph::Relation r);

class VocabError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Vocab {
 public:
  Vocab() = default;
  /// Specials and person tokens are implicit; `words` are assigned ids from kFirstWordId.
  explicit Vocab(std::vector<std::string> words);

  std::size_t size() const { return kFirstWordId + words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  TokenId person_id(graph::PersonTag tag) const;
  bool is_person(TokenId id) const { return id >= kFirstPersonId && id < kFirstWordId; }
  bool is_special(TokenId id) const { return id >= 0 && id < kFirstPersonId; }
  graph::PersonTag person_of(TokenId id) const;

  /// Word lookup only; specials and person tokens never match here.
  TokenId word_id(std::string_view word) const;  // UNK when absent
  bool contains_word(std::string_view word) const { return index_.contains(std::string(word)); }

  /// Surface text of a single id; structural specials render as "" and UNK as "<unk>".
  std::string_view surface(TokenId id) const;

  /// {"specials": {...}, "persons": N, "tokens": [...]} with every token in id order.
  std::string to_json() const;
  static Vocab from_json(std::string_view text);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<std::string> person_surface_;
};

/// Specials, then [Person1..15], then words with count >= min_count ordered by
/// (-count, lexicographic). Counts cover event, place and inference text after
/// lowercasing. Throws VocabError on a corpus with no events.
Vocab build_vocab(const graph::Corpus& corpus, std::uint32_t min_count = 1);

/// Lowercase + whitespace split; "[PersonN]" matched case-sensitively before lowercasing.
TokenSeq encode(const Vocab& vocab, std::string_view text);

/// Space-joined surface words. Throws VocabError on an out-of-range id.
std::string decode(const Vocab& vocab, const TokenSeq& ids);

/// Lowercased single-space form that decode(encode(t)) reproduces for UNK-free t.
std::string normalize(std::string_view text);

}  // namespace vcg::text
