#pragma once

#include <string>
#include <vector>

#include "vcg/graph/corpus.hpp"
#include "vcg/synth/synth.hpp"
#include "vcg/util/rng.hpp"

namespace vcg::testing {

inline std::vector<float> random_feature(Rng& rng, std::size_t dim, double scale = 1.0) {
  std::vector<float> f(dim);
  for (auto& x : f) x = static_cast<float>(scale * rng.normal());
  return f;
}

inline graph::VisualScene make_scene(const std::string& id, int persons, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  graph::VisualScene s;
  s.scene_id = id;
  s.image_feature = random_feature(rng, dim);
  for (int p = 1; p <= persons; ++p) s.persons.push_back({graph::PersonTag{p}, random_feature(rng, dim)});
  return s;
}

inline graph::EventRecord make_event(const std::string& event, const std::string& place,
                                     std::vector<std::pair<graph::Relation, std::string>> inferences,
                                     int subject = 1) {
  graph::EventRecord r;
  r.event_text = event;
  r.place_text = place;
  r.subject = graph::PersonTag{subject};
  for (auto& [rel, text] : inferences) r.inferences.push_back({rel, text, r.subject});
  return r;
}

/// Two scenes, three events, a handful of inferences per relation.
inline graph::Corpus tiny_corpus(std::size_t dim = 8) {
  using graph::Relation;
  graph::Corpus c(dim);
  c.add_scene(make_scene("s0", 2, dim, 1));
  c.add_scene(make_scene("s1", 3, dim, 2));
  c.add_event("s0", make_event("[Person1] is ordering a drink from [Person2]", "at a bar",
                               {{Relation::kBefore, "walk up to the counter"},
                                {Relation::kBefore, "look at the menu"},
                                {Relation::kIntent, "get a beer"},
                                {Relation::kAfter, "pay [Person2]"}}));
  c.add_event("s0", make_event("[Person2] is pouring a beer", "at a bar",
                               {{Relation::kBefore, "grab a glass"},
                                {Relation::kIntent, "serve [Person1]"},
                                {Relation::kAfter, "wipe the counter"}},
                               2));
  c.add_event("s1", make_event("[Person3] is steering the boat", "on a boat",
                               {{Relation::kBefore, "start the engine"},
                                {Relation::kIntent, "reach the harbor"},
                                {Relation::kAfter, "drop the anchor"},
                                {Relation::kAfter, "tie the rope"}},
                               3));
  return c;
}

/// 32 training examples with one answer per context: 16 scenes, one event each,
/// a Before and an Intent inference. Dev scenes from the generator only supply
/// ranking distractors.
inline graph::Corpus overfit_corpus(std::size_t distractor_scenes = 60) {
  const auto& t = synth::TemplateSet::builtin();
  synth::SynthConfig sc;
  sc.n_scenes = distractor_scenes;
  sc.seed = 5;
  const auto distractors = synth::generate(sc);
  graph::Corpus c(sc.feature_dim);
  for (int k = 0; k < 16; ++k) {
    const auto type = static_cast<std::size_t>(k / 3), ev = static_cast<std::size_t>(k % 3);
    const auto& st = t.scene_types[type];
    const auto id = "train_" + std::to_string(k);
    c.add_scene(make_scene(id, 2, sc.feature_dim, 500 + k));
    std::string text = st.events[ev].event;
    for (auto [slot, tag] : {std::pair{"{subject}", "[Person1]"}, std::pair{"{other}", "[Person2]"}})
      if (auto pos = text.find(slot); pos != std::string::npos) text.replace(pos, std::string(slot).size(), tag);
    c.add_event(id, make_event(text, st.places[0],
                               {{graph::Relation::kBefore, t.valid_inferences(type, ev, graph::Relation::kBefore)[0]},
                                {graph::Relation::kIntent, t.valid_inferences(type, ev, graph::Relation::kIntent)[0]}}));
  }
  for (const auto& s : distractors.scenes()) c.add_scene(s, graph::Split::kDev);
  for (const auto& e : distractors.events()) c.add_event(e.scene_id, e.record);
  return c;
}

}  // namespace vcg::testing
