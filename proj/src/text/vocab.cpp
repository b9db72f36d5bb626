#include "vcg/text/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include <json.hpp>

namespace vcg::text {

namespace {

constexpr std::array<std::string_view, kNumSpecials> kSpecialNames{
    "<pad>",    "<unk>",     "<end>",       "<s_img>",      "<e_img>",       "<s_event>",
    "<e_event>", "<s_place>", "<e_place>", "<rel_before>", "<rel_intent>", "<rel_after>"};

std::string lower(std::string_view w) {
  std::string out(w);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

template <typename Fn>
void for_each_token(std::string_view text, Fn&& fn) {
  for (auto w : graph::split_words(text)) {
    if (auto tag = graph::parse_person_token(w); tag && tag->index <= graph::kMaxPersonTag)
      fn(std::string(w), tag);
    else
      fn(lower(w), std::optional<graph::PersonTag>{});
  }
}

}  // namespace

std::string_view special_name(Special s) { return kSpecialNames.at(static_cast<std::size_t>(s)); }

TokenId relation_token(graph::Relation r) {
  switch (r) {
    case graph::Relation::kBefore: return id_of(Special::kRelBefore);
    case graph::Relation::kIntent: return id_of(Special::kRelIntent);
    case graph::Relation::kAfter: return id_of(Special::kRelAfter);
  }
  return id_of(Special::kUnk);
}

Vocab::Vocab(std::vector<std::string> words) : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    const auto& w = words_[i];
    if (w.empty() || std::any_of(w.begin(), w.end(), [](unsigned char c) { return std::isspace(c); }))
      throw VocabError("invalid vocabulary word: '" + w + "'");
    if (graph::parse_person_token(w)) throw VocabError("person token in word list: " + w);
    if (!index_.emplace(w, kFirstWordId + static_cast<TokenId>(i)).second)
      throw VocabError("duplicate vocabulary word: " + w);
  }
  for (int p = 1; p <= graph::kMaxPersonTag; ++p) person_surface_.push_back(graph::person_token({p}));
}

TokenId Vocab::person_id(graph::PersonTag tag) const {
  if (tag.index < 1 || tag.index > graph::kMaxPersonTag)
    throw VocabError("person tag out of range: " + std::to_string(tag.index));
  return kFirstPersonId + tag.index - 1;
}

graph::PersonTag Vocab::person_of(TokenId id) const {
  if (!is_person(id)) throw VocabError("not a person id: " + std::to_string(id));
  return {id - kFirstPersonId + 1};
}

TokenId Vocab::word_id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? id_of(Special::kUnk) : it->second;
}

std::string_view Vocab::surface(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= size()) throw VocabError("token id out of range: " + std::to_string(id));
  if (id == id_of(Special::kUnk)) return special_name(Special::kUnk);
  if (is_special(id)) return {};
  if (is_person(id)) return person_surface_[static_cast<std::size_t>(id - kFirstPersonId)];
  return words_[static_cast<std::size_t>(id - kFirstWordId)];
}

std::string Vocab::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json specials;
  for (std::size_t i = 0; i < kNumSpecials; ++i) specials[std::string(kSpecialNames[i])] = i;
  j["specials"] = specials;
  j["persons"] = graph::kMaxPersonTag;
  auto tokens = nlohmann::ordered_json::array();
  for (auto s : kSpecialNames) tokens.push_back(s);
  for (const auto& p : person_surface_) tokens.push_back(p);
  for (const auto& w : words_) tokens.push_back(w);
  j["tokens"] = tokens;
  return j.dump();
}

Vocab Vocab::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw VocabError(std::string("vocab json: ") + e.what());
  }
  if (!j.contains("tokens") || !j["tokens"].is_array()) throw VocabError("vocab json: missing tokens");
  if (j.value("persons", -1) != graph::kMaxPersonTag) throw VocabError("vocab json: unexpected person count");
  const auto& tokens = j["tokens"];
  if (tokens.size() < static_cast<std::size_t>(kFirstWordId)) throw VocabError("vocab json: too few tokens");
  for (std::size_t i = 0; i < kNumSpecials; ++i)
    if (tokens[i] != kSpecialNames[i]) throw VocabError("vocab json: special token order mismatch");
  std::vector<std::string> words;
  for (std::size_t i = kFirstWordId; i < tokens.size(); ++i) words.push_back(tokens[i].get<std::string>());
  return Vocab(std::move(words));
}

Vocab build_vocab(const graph::Corpus& corpus, std::uint32_t min_count) {
  if (corpus.events().empty()) throw VocabError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::uint64_t> counts;
  auto add = [&](std::string_view text) {
    for_each_token(text, [&](std::string w, std::optional<graph::PersonTag> tag) {
      if (!tag) ++counts[std::move(w)];
    });
  };
  for (const auto& ev : corpus.events()) {
    add(ev.record.event_text);
    add(ev.record.place_text);
    for (const auto& inf : ev.record.inferences) add(inf.text);
  }
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [w, c] : counts)
    if (c >= min_count && !graph::parse_person_token(w)) kept.emplace_back(w, c);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  words.reserve(kept.size());
  for (auto& [w, c] : kept) words.push_back(std::move(w));
  return Vocab(std::move(words));
}

TokenSeq encode(const Vocab& vocab, std::string_view text) {
  TokenSeq out;
  for_each_token(text, [&](const std::string& w, std::optional<graph::PersonTag> tag) {
    out.push_back(tag ? vocab.person_id(*tag) : vocab.word_id(w));
  });
  return out;
}

std::string decode(const Vocab& vocab, const TokenSeq& ids) {
  std::string out;
  for (auto id : ids) {
    const auto s = vocab.surface(id);
    if (s.empty()) continue;
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

std::string normalize(std::string_view text) {
  std::string out;
  for_each_token(text, [&](const std::string& w, std::optional<graph::PersonTag>) {
    if (!out.empty()) out += ' ';
    out += w;
  });
  return out;
}

}  // namespace vcg::text
