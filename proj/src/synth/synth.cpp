#include "vcg/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "vcg/graph/store.hpp"
#include "vcg/util/atomic_file.hpp"
#include "vcg/util/rng.hpp"

namespace vcg::synth {

extern const char* const kBuiltinTemplatesJson;

using graph::Relation;

namespace {

constexpr std::uint64_t kCentroidStream = 0xC3;
constexpr std::uint64_t kSceneStreamBase = 1000;
constexpr std::uint64_t kMaskStream = 7;
constexpr std::uint64_t kSplitStream = 11;

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
  return s;
}

/// Expands the first {slot} in `text` over the slot's values; literal otherwise.
std::vector<std::string> expand(const std::string& text, const std::map<std::string, std::vector<std::string>>& slots) {
  const auto open = text.find('{');
  if (open == std::string::npos) return {text};
  const auto close = text.find('}', open);
  const auto name = text.substr(open + 1, close - open - 1);
  auto it = slots.find(name);
  if (it == slots.end()) throw std::invalid_argument("template uses unknown slot {" + name + "}: " + text);
  std::vector<std::string> out;
  for (const auto& v : it->second) out.push_back(text.substr(0, open) + v + text.substr(close + 1));
  return out;
}

struct Centroids {
  std::vector<std::vector<float>> scene;                // per type
  std::vector<std::vector<std::vector<float>>> action;  // per type, per event template
  std::vector<float> bystander;
};

Centroids make_centroids(const SynthConfig& cfg, const TemplateSet& t) {
  const double min_sep = 4.0 * cfg.noise_sigma;
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    Rng rng(cfg.seed, kCentroidStream + 0x10000 * attempt);
    auto draw = [&] {
      std::vector<float> v(cfg.feature_dim);
      for (auto& x : v) x = static_cast<float>(rng.normal());
      return v;
    };
    Centroids c;
    std::vector<const std::vector<float>*> all;
    for (std::size_t s = 0; s < cfg.n_scene_types; ++s) c.scene.push_back(draw());
    for (std::size_t s = 0; s < cfg.n_scene_types; ++s) {
      c.action.emplace_back();
      for (std::size_t e = 0; e < t.scene_types[s].events.size(); ++e) c.action.back().push_back(draw());
    }
    c.bystander = draw();
    for (auto& v : c.scene) all.push_back(&v);
    for (auto& a : c.action)
      for (auto& v : a) all.push_back(&v);
    all.push_back(&c.bystander);
    bool ok = true;
    for (std::size_t i = 0; i < all.size() && ok; ++i)
      for (std::size_t j = i + 1; j < all.size() && ok; ++j) {
        double d2 = 0;
        for (std::size_t k = 0; k < cfg.feature_dim; ++k) {
          const double d = (*all[i])[k] - (*all[j])[k];
          d2 += d * d;
        }
        ok = std::sqrt(d2) >= min_sep;
      }
    if (ok) return c;
  }
  throw std::invalid_argument("cannot place centroids 4 sigma apart; increase feature_dim or lower noise_sigma");
}

struct GeneratedScene {
  graph::VisualScene scene;
  SceneTruth truth;
  std::vector<graph::EventRecord> events;
};

std::vector<float> noisy(const std::vector<float>& centroid, double sigma, Rng& rng) {
  std::vector<float> v(centroid.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = centroid[i] + static_cast<float>(sigma * rng.normal());
  return v;
}

GeneratedScene make_scene(const SynthConfig& cfg, const TemplateSet& t, const Centroids& c, std::size_t index) {
  Rng rng(cfg.seed, kSceneStreamBase + index);
  GeneratedScene g;
  g.truth.scene_index = index;
  g.truth.scene_type = static_cast<std::size_t>(rng.uniform_index(cfg.n_scene_types));
  const auto& st = t.scene_types[g.truth.scene_type];

  const int n_persons = static_cast<int>(rng.uniform_int(cfg.persons_per_scene.lo, cfg.persons_per_scene.hi));
  const int max_events = std::min<int>(n_persons, static_cast<int>(st.events.size()));
  const int n_events = std::min(max_events, static_cast<int>(rng.uniform_int(cfg.events_per_scene.lo,
                                                                              cfg.events_per_scene.hi)));

  std::vector<std::size_t> templates(st.events.size());
  std::iota(templates.begin(), templates.end(), 0);
  rng.shuffle(templates.begin(), templates.end());
  templates.resize(static_cast<std::size_t>(n_events));

  std::vector<int> people(static_cast<std::size_t>(n_persons));
  std::iota(people.begin(), people.end(), 1);
  rng.shuffle(people.begin(), people.end());

  const auto& place = st.places[rng.uniform_index(st.places.size())];

  for (int e = 0; e < n_events; ++e) {
    const auto tmpl = templates[static_cast<std::size_t>(e)];
    const graph::PersonTag subject{people[static_cast<std::size_t>(e)]};
    int other = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_persons - 1)));
    if (other >= subject.index) ++other;

    graph::EventRecord rec;
    rec.subject = subject;
    rec.event_text = replace_all(replace_all(st.events[tmpl].event, "{subject}", graph::person_token(subject)),
                                 "{other}", graph::person_token({other}));
    rec.place_text = place;
    for (auto rel : graph::kRelations) {
      auto valid = t.valid_inferences(g.truth.scene_type, tmpl, rel);
      const auto k = static_cast<std::size_t>(
          rng.uniform_int(cfg.inferences_per_relation.lo, cfg.inferences_per_relation.hi));
      rng.shuffle(valid.begin(), valid.end());
      for (std::size_t i = 0; i < k; ++i) rec.inferences.push_back({rel, valid[i], subject});
    }
    g.events.push_back(std::move(rec));
    g.truth.event_templates.push_back(tmpl);
    g.truth.subjects.push_back(subject);
  }

  g.scene.scene_id = scene_id_for(cfg, index);
  g.scene.image_feature = noisy(c.scene[g.truth.scene_type], cfg.noise_sigma, rng);
  for (int p = 1; p <= n_persons; ++p) {
    const auto it = std::find(g.truth.subjects.begin(), g.truth.subjects.end(), graph::PersonTag{p});
    const auto& centroid = it == g.truth.subjects.end()
                               ? c.bystander
                               : c.action[g.truth.scene_type][g.truth.event_templates[static_cast<std::size_t>(
                                     it - g.truth.subjects.begin())]];
    g.scene.persons.push_back({graph::PersonTag{p}, noisy(centroid, cfg.noise_sigma, rng)});
  }
  return g;
}

std::size_t parse_scene_index(const SynthConfig& cfg, std::string_view scene_id) {
  constexpr std::string_view prefix = "scene_";
  if (!scene_id.starts_with(prefix)) throw std::out_of_range("unknown scene id: " + std::string(scene_id));
  std::size_t idx = 0;
  for (char ch : scene_id.substr(prefix.size())) {
    if (ch < '0' || ch > '9') throw std::out_of_range("unknown scene id: " + std::string(scene_id));
    idx = idx * 10 + static_cast<std::size_t>(ch - '0');
  }
  if (idx >= cfg.n_scenes || scene_id_for(cfg, idx) != scene_id)
    throw std::out_of_range("unknown scene id: " + std::string(scene_id));
  return idx;
}

}  // namespace

TemplateSet TemplateSet::parse(std::string_view json_text) {
  const auto j = nlohmann::json::parse(json_text);
  TemplateSet t;
  t.uninformative_event = j.at("uninformative_event").get<std::string>();
  t.uninformative_place = j.at("uninformative_place").get<std::string>();
  for (const auto& js : j.at("scene_types")) {
    SceneTemplate st;
    st.scene_type_id = t.scene_types.size();
    st.name = js.at("name").get<std::string>();
    st.places = js.at("places").get<std::vector<std::string>>();
    st.slots = js.value("slots", std::map<std::string, std::vector<std::string>>{});
    for (const auto& je : js.at("events")) {
      EventTemplate et;
      et.event = je.at("event").get<std::string>();
      for (auto rel : graph::kRelations)
        et.inferences[static_cast<std::size_t>(rel)] =
            je.at(std::string(graph::relation_name(rel))).get<std::vector<std::string>>();
      st.events.push_back(std::move(et));
    }
    if (st.events.empty()) throw std::invalid_argument("scene type " + st.name + " has no event templates");
    if (st.places.empty()) throw std::invalid_argument("scene type " + st.name + " has no places");
    for (const auto& et : st.events)
      for (const auto& infs : et.inferences)
        if (infs.empty()) throw std::invalid_argument("scene type " + st.name + " has a relation with no templates");
    t.scene_types.push_back(std::move(st));
  }
  return t;
}

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet t = parse(kBuiltinTemplatesJson);
  return t;
}

std::vector<std::string> TemplateSet::valid_inferences(std::size_t scene_type, std::size_t event_template,
                                                       Relation relation) const {
  const auto& st = scene_types.at(scene_type);
  std::vector<std::string> out;
  for (const auto& tmpl : st.events.at(event_template).inferences[static_cast<std::size_t>(relation)])
    for (auto& s : expand(tmpl, st.slots)) out.push_back(std::move(s));
  return out;
}

void SynthConfig::validate(const TemplateSet& templates) const {
  auto bad = [](const std::string& what) { throw std::invalid_argument("synth config: " + what); };
  if (n_scene_types == 0 || n_scene_types > templates.scene_types.size())
    bad("n_scene_types must be in 1.." + std::to_string(templates.scene_types.size()));
  if (n_scenes == 0) bad("n_scenes must be positive");
  for (auto [name, r] : {std::pair{"persons_per_scene", persons_per_scene}, std::pair{"events_per_scene", events_per_scene},
                         std::pair{"inferences_per_relation", inferences_per_relation}})
    if (r.lo < 1 || r.hi < r.lo) bad(std::string(name) + " must be a non-empty range of positive values");
  if (persons_per_scene.lo < 2) bad("persons_per_scene.lo must be at least 2 (events may mention another person)");
  if (persons_per_scene.hi + 1 > static_cast<int>(graph::kDefaultMaxVisualFeatures))
    bad("persons_per_scene.hi exceeds the visual feature limit");
  if (feature_dim == 0) bad("feature_dim must be positive");
  if (!(noise_sigma >= 0.0)) bad("noise_sigma must be non-negative");
  if (!(visual_dependence >= 0.0 && visual_dependence <= 1.0)) bad("visual_dependence must be in [0,1]");
  for (std::size_t s = 0; s < n_scene_types; ++s)
    for (std::size_t e = 0; e < templates.scene_types[s].events.size(); ++e)
      for (auto rel : graph::kRelations)
        if (templates.valid_inferences(s, e, rel).size() < static_cast<std::size_t>(inferences_per_relation.hi))
          bad("inferences_per_relation.hi exceeds the template pool of " + templates.scene_types[s].name);
}

std::string scene_id_for(const SynthConfig& config, std::size_t index) {
  const std::size_t width = std::max<std::size_t>(4, std::to_string(config.n_scenes - 1).size());
  auto digits = std::to_string(index);
  return "scene_" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

TemplateSet load_templates(const SynthConfig& config) {
  if (config.templates_path) return TemplateSet::parse(read_file(*config.templates_path));
  return TemplateSet::builtin();
}

graph::Corpus generate(const SynthConfig& config) { return generate(config, load_templates(config)); }

graph::Corpus generate(const SynthConfig& config, const TemplateSet& templates) {
  config.validate(templates);
  const auto centroids = make_centroids(config, templates);
  std::vector<GeneratedScene> scenes;
  scenes.reserve(config.n_scenes);
  for (std::size_t i = 0; i < config.n_scenes; ++i) scenes.push_back(make_scene(config, templates, centroids, i));

  std::vector<std::pair<std::size_t, std::size_t>> all_events;
  for (std::size_t s = 0; s < scenes.size(); ++s)
    for (std::size_t e = 0; e < scenes[s].events.size(); ++e) all_events.emplace_back(s, e);
  const auto n_masked = static_cast<std::size_t>(std::llround(config.visual_dependence * static_cast<double>(all_events.size())));
  Rng mask_rng(config.seed, kMaskStream);
  mask_rng.shuffle(all_events.begin(), all_events.end());
  for (std::size_t i = 0; i < n_masked; ++i) {
    auto& rec = scenes[all_events[i].first].events[all_events[i].second];
    rec.event_text = replace_all(templates.uninformative_event, "{subject}", graph::person_token(rec.subject));
    rec.place_text = templates.uninformative_place;
  }

  graph::Corpus corpus(config.feature_dim);
  for (auto& g : scenes) {
    const auto id = g.scene.scene_id;
    corpus.add_scene(std::move(g.scene));
    for (auto& rec : g.events) corpus.add_event(id, std::move(rec));
  }
  return graph::split_corpus(corpus, config.split_fractions, derive_seed(config.seed, kSplitStream));
}

SceneTruth scene_truth(const SynthConfig& config, std::string_view scene_id) {
  const auto& templates = load_templates(config);
  const auto idx = parse_scene_index(config, scene_id);
  return make_scene(config, templates, make_centroids(config, templates), idx).truth;
}

std::set<std::string> oracle_answers(const SynthConfig& config, std::string_view scene_id, Relation relation) {
  const auto templates = load_templates(config);
  const auto idx = parse_scene_index(config, scene_id);
  const auto g = make_scene(config, templates, make_centroids(config, templates), idx);
  std::set<std::string> out;
  for (const auto& rec : g.events)
    for (const auto& inf : rec.inferences)
      if (inf.relation == relation) out.insert(inf.text);
  return out;
}

}  // namespace vcg::synth
