#include "vcg/graph/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace vcg::graph {

std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::kBefore: return "before";
    case Relation::kIntent: return "intent";
    case Relation::kAfter: return "after";
  }
  return "?";
}

std::optional<Relation> parse_relation(std::string_view name) {
  for (auto r : kRelations)
    if (relation_name(r) == name) return r;
  return std::nullopt;
}

std::string person_token(PersonTag tag) { return "[Person" + std::to_string(tag.index) + "]"; }

std::optional<PersonTag> parse_person_token(std::string_view token) {
  constexpr std::string_view prefix = "[Person";
  if (token.size() <= prefix.size() + 1 || !token.starts_with(prefix) || token.back() != ']')
    return std::nullopt;
  const auto digits = token.substr(prefix.size(), token.size() - prefix.size() - 1);
  if (digits.empty() || digits.front() == '0') return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || value < 1) return std::nullopt;
  return PersonTag{value};
}

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<PersonTag> person_mentions(std::string_view text) {
  std::vector<PersonTag> out;
  for (auto w : split_words(text))
    if (auto tag = parse_person_token(w); tag && std::find(out.begin(), out.end(), *tag) == out.end())
      out.push_back(*tag);
  return out;
}

const Person* VisualScene::find_person(PersonTag tag) const {
  for (const auto& p : persons)
    if (p.tag == tag) return &p;
  return nullptr;
}

std::vector<const Inference*> EventRecord::inferences_for(Relation r) const {
  std::vector<const Inference*> out;
  for (const auto& inf : inferences)
    if (inf.relation == r) out.push_back(&inf);
  return out;
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

std::optional<Split> parse_split(std::string_view name) {
  for (auto s : {Split::kTrain, Split::kDev, Split::kTest})
    if (split_name(s) == name) return s;
  return std::nullopt;
}

void Corpus::add_scene(VisualScene scene, Split split) {
  if (index_.contains(scene.scene_id)) throw std::invalid_argument("duplicate scene_id: " + scene.scene_id);
  index_.emplace(scene.scene_id, scenes_.size());
  scenes_.push_back(std::move(scene));
  splits_.push_back(split);
}

void Corpus::add_event(std::string scene_id, EventRecord record) {
  for (auto& inf : record.inferences) inf.subject = record.subject;
  events_.push_back({std::move(scene_id), std::move(record)});
}

const VisualScene* Corpus::find_scene(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &scenes_[it->second];
}

std::size_t Corpus::scene_index(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw std::out_of_range("unknown scene_id: " + std::string(id));
  return it->second;
}

Split Corpus::split_of(std::string_view id) const { return splits_[scene_index(id)]; }

void Corpus::set_split(std::string_view id, Split s) { splits_[scene_index(id)] = s; }

std::vector<std::size_t> Corpus::event_indices(std::optional<Split> split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < events_.size(); ++i) {
    if (split) {
      auto it = index_.find(events_[i].scene_id);
      if (it == index_.end() || splits_[it->second] != *split) continue;
    }
    out.push_back(i);
  }
  return out;
}

std::size_t Corpus::count_scenes(Split s) const {
  return static_cast<std::size_t>(std::count(splits_.begin(), splits_.end(), s));
}

std::size_t Corpus::inference_count() const {
  std::size_t n = 0;
  for (const auto& e : events_) n += e.record.inferences.size();
  return n;
}

}  // namespace vcg::graph
