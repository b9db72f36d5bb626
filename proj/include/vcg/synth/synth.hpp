#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vcg/graph/corpus.hpp"

namespace vcg::synth {

struct EventTemplate {
  std::string event;  // may use {subject} and {other}
  std::array<std::vector<std::string>, 3> inferences;  // per Relation, may use scene slots
};

struct SceneTemplate {
  std::size_t scene_type_id = 0;
  std::string name;
  std::vector<std::string> places;
  std::map<std::string, std::vector<std::string>> slots;
  std::vector<EventTemplate> events;
};

struct TemplateSet {
  std::string uninformative_event;
  std::string uninformative_place;
  std::vector<SceneTemplate> scene_types;

  static TemplateSet parse(std::string_view json_text);
  static const TemplateSet& builtin();

  /// Every text an event of this class may carry for `relation`, slots expanded,
  /// in template order.
  std::vector<std::string> valid_inferences(std::size_t scene_type, std::size_t event_template,
                                            graph::Relation relation) const;
};

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct SynthConfig {
  std::size_t n_scene_types = 6;
  std::size_t n_scenes = 600;
  IntRange persons_per_scene{2, 4};
  IntRange events_per_scene{2, 3};
  IntRange inferences_per_relation{2, 4};
  std::size_t feature_dim = 64;
  double noise_sigma = 0.25;
  /// Fraction of events whose event and place text are replaced by the
  /// uninformative placeholders, leaving only the image to identify the scene.
  double visual_dependence = 0.0;
  std::uint64_t seed = 0;
  std::array<double, 3> split_fractions{0.8, 0.1, 0.1};
  std::optional<std::string> templates_path;

  /// Throws std::invalid_argument naming the offending field.
  void validate(const TemplateSet& templates) const;
};

/// Ground truth the generator used for one scene.
struct SceneTruth {
  std::size_t scene_index = 0;
  std::size_t scene_type = 0;
  std::vector<std::size_t> event_templates;  // per event, in corpus order
  std::vector<graph::PersonTag> subjects;
};

graph::Corpus generate(const SynthConfig& config);
graph::Corpus generate(const SynthConfig& config, const TemplateSet& templates);

/// Exact set of inference texts stored for `relation` across the scene's events.
/// Throws std::out_of_range for ids the config never produces.
std::set<std::string> oracle_answers(const SynthConfig& config, std::string_view scene_id,
                                     graph::Relation relation);

SceneTruth scene_truth(const SynthConfig& config, std::string_view scene_id);

std::string scene_id_for(const SynthConfig& config, std::size_t index);

/// Loads config.templates_path when set, else the bundled asset.
TemplateSet load_templates(const SynthConfig& config);

}  // namespace vcg::synth
