#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vcg::graph {

inline constexpr std::size_t kDefaultMaxVisualFeatures = 15;
inline constexpr int kMaxPersonTag = 15;

enum class Relation : std::uint8_t { kBefore = 0, kIntent = 1, kAfter = 2 };
inline constexpr std::array<Relation, 3> kRelations{Relation::kBefore, Relation::kIntent, Relation::kAfter};

std::string_view relation_name(Relation r);
std::optional<Relation> parse_relation(std::string_view name);

/// Person reference, rendered in text as "[PersonN]".
struct PersonTag {
  int index = 1;
  friend bool operator==(PersonTag, PersonTag) = default;
  friend auto operator<=>(PersonTag, PersonTag) = default;
};

std::string person_token(PersonTag tag);

/// Parses a whole whitespace token of the form "[PersonN]" (case-sensitive, N >= 1).
std::optional<PersonTag> parse_person_token(std::string_view token);

/// Person tags mentioned in `text`, in order of first appearance, without duplicates.
std::vector<PersonTag> person_mentions(std::string_view text);

/// Whitespace-separated words; a person tag counts as one word.
std::vector<std::string_view> split_words(std::string_view text);

struct Person {
  PersonTag tag;
  std::vector<float> feature;
};

struct VisualScene {
  std::string scene_id;
  std::vector<float> image_feature;
  std::vector<Person> persons;

  std::size_t visual_count() const { return 1 + persons.size(); }
  const Person* find_person(PersonTag tag) const;
};

struct Inference {
  Relation relation = Relation::kBefore;
  std::string text;
  PersonTag subject;
};

struct EventRecord {
  std::string event_text;
  std::string place_text;
  PersonTag subject;
  std::vector<Inference> inferences;

  std::vector<const Inference*> inferences_for(Relation r) const;
};

enum class Split : std::uint8_t { kTrain, kDev, kTest };
std::string_view split_name(Split s);
std::optional<Split> parse_split(std::string_view name);

struct SceneEvent {
  std::string scene_id;
  EventRecord record;
};

/// A set of visual commonsense graphs. Scene and event order is preserved as
/// loaded so that writing back is byte-stable.
class Corpus {
 public:
  explicit Corpus(std::size_t feature_dim = 0) : feature_dim_(feature_dim) {}

  std::size_t feature_dim() const { return feature_dim_; }
  void set_feature_dim(std::size_t d) { feature_dim_ = d; }

  /// Throws std::invalid_argument on duplicate id.
  void add_scene(VisualScene scene, Split split = Split::kTrain);
  void add_event(std::string scene_id, EventRecord record);

  const std::vector<VisualScene>& scenes() const { return scenes_; }
  const std::vector<SceneEvent>& events() const { return events_; }
  std::vector<SceneEvent>& mutable_events() { return events_; }

  const VisualScene* find_scene(std::string_view id) const;
  std::size_t scene_index(std::string_view id) const;  // throws if absent
  Split split_of(std::string_view id) const;
  void set_split(std::string_view id, Split s);
  std::vector<std::size_t> event_indices(std::optional<Split> split) const;
  std::size_t count_scenes(Split s) const;
  std::size_t inference_count() const;

 private:
  std::size_t feature_dim_;
  std::vector<VisualScene> scenes_;
  std::vector<Split> splits_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<SceneEvent> events_;
};

}  // namespace vcg::graph
