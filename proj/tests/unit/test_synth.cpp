#include <doctest.h>

#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vcg/graph/store.hpp"
#include "vcg/synth/synth.hpp"

using namespace vcg;
using namespace vcg::synth;
using graph::Relation;

namespace {

/// Oracle table read straight from the template asset: place -> scene type,
/// and (type, event pattern) -> every text each relation may produce.
struct TemplateOracle {
  struct EventClass {
    std::regex pattern;
    std::array<std::set<std::string>, 3> valid;
  };
  std::map<std::string, std::size_t> type_of_place;
  std::vector<std::vector<EventClass>> events;

  TemplateOracle() {
    std::ifstream in(std::string(VCG_SOURCE_DIR) + "/assets/templates.json");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto j = nlohmann::json::parse(ss.str());
    for (const auto& st : j["scene_types"]) {
      const auto type = events.size();
      for (const auto& p : st["places"]) type_of_place[p.get<std::string>()] = type;
      const auto slots = st["slots"];
      auto expand = [&](const std::string& t) {
        std::set<std::string> out;
        const auto open = t.find('{');
        if (open == std::string::npos) return std::set<std::string>{t};
        const auto close = t.find('}');
        for (const auto& v : slots[t.substr(open + 1, close - open - 1)])
          out.insert(t.substr(0, open) + v.get<std::string>() + t.substr(close + 1));
        return out;
      };
      std::vector<EventClass> classes;
      for (const auto& ev : st["events"]) {
        auto text = ev["event"].get<std::string>();
        text = std::regex_replace(text, std::regex(R"(\{subject\}|\{other\})"), R"(\[Person[0-9]+\])");
        EventClass c{std::regex("^" + text + "$"), {}};
        for (auto rel : graph::kRelations)
          for (const auto& t : ev[std::string(graph::relation_name(rel))]) {
            const auto e = expand(t.get<std::string>());
            c.valid[static_cast<std::size_t>(rel)].insert(e.begin(), e.end());
          }
        classes.push_back(std::move(c));
      }
      events.push_back(std::move(classes));
    }
  }

  const EventClass* classify(const graph::EventRecord& r) const {
    const auto it = type_of_place.find(r.place_text);
    if (it == type_of_place.end()) return nullptr;
    for (const auto& c : events[it->second])
      if (std::regex_match(r.event_text, c.pattern)) return &c;
    return nullptr;
  }
};

}  // namespace

TEST_CASE("same seed gives byte-identical corpora") {
  SynthConfig cfg;
  cfg.n_scenes = 60;
  cfg.visual_dependence = 0.3;
  CHECK(graph::dump_corpus(generate(cfg)) == graph::dump_corpus(generate(cfg)));
  auto other = cfg;
  other.seed = 1;
  CHECK(graph::dump_corpus(generate(other)) != graph::dump_corpus(generate(cfg)));
}

TEST_CASE("inference counts stay inside the configured range") {
  SynthConfig cfg;
  cfg.n_scenes = 100;
  cfg.inferences_per_relation = {2, 4};
  const auto c = generate(cfg);
  for (const auto& ev : c.events())
    for (auto rel : graph::kRelations) {
      const auto n = ev.record.inferences_for(rel).size();
      CHECK(n >= 2);
      CHECK(n <= 4);
    }
  for (const auto& s : c.scenes()) {
    CHECK(s.persons.size() >= 2);
    CHECK(s.persons.size() <= 4);
  }
}

TEST_CASE("template lookup oracle explains every event when text is informative") {
  SynthConfig cfg;
  cfg.n_scene_types = 4;
  cfg.n_scenes = 200;
  cfg.visual_dependence = 0.0;
  const auto c = generate(cfg);
  const TemplateOracle oracle;
  std::size_t checked = 0;
  for (const auto& ev : c.events()) {
    const auto* cls = oracle.classify(ev.record);
    REQUIRE_MESSAGE(cls, ev.record.event_text);
    for (const auto& inf : ev.record.inferences) {
      CHECK(cls->valid[static_cast<std::size_t>(inf.relation)].count(inf.text) == 1);
      ++checked;
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("oracle answers reproduce the stored inferences") {
  SynthConfig cfg;
  cfg.n_scenes = 40;
  cfg.visual_dependence = 0.5;
  const auto c = generate(cfg);
  for (const auto& scene : c.scenes())
    for (auto rel : graph::kRelations) {
      std::set<std::string> stored;
      for (const auto& ev : c.events())
        if (ev.scene_id == scene.scene_id)
          for (const auto* inf : ev.record.inferences_for(rel)) stored.insert(inf->text);
      CHECK(oracle_answers(cfg, scene.scene_id, rel) == stored);
    }
  CHECK_THROWS_AS(oracle_answers(cfg, "scene_9999", Relation::kBefore), std::out_of_range);
  CHECK_THROWS_AS(oracle_answers(cfg, "elsewhere", Relation::kBefore), std::out_of_range);
}

TEST_CASE("visual dependence replaces exactly round(lambda * events) texts") {
  const auto& t = TemplateSet::builtin();
  for (double lambda : {0.0, 0.25, 0.5, 1.0}) {
    SynthConfig cfg;
    cfg.n_scenes = 90;
    cfg.visual_dependence = lambda;
    const auto c = generate(cfg);
    std::size_t masked = 0;
    for (const auto& ev : c.events())
      if (ev.record.place_text == t.uninformative_place) {
        ++masked;
        CHECK(ev.record.event_text == graph::person_token(ev.record.subject) + " is here");
      }
    CHECK(masked == static_cast<std::size_t>(std::llround(lambda * static_cast<double>(c.events().size()))));
  }
}

TEST_CASE("with lambda 1 only vision separates scene types") {
  SynthConfig cfg;
  cfg.n_scenes = 60;
  cfg.visual_dependence = 1.0;
  const auto c = generate(cfg);
  // Same event text, different scene types, different answers.
  std::map<std::string, std::pair<std::size_t, std::string>> first_by_text;
  bool found = false;
  for (const auto& ev : c.events()) {
    const auto truth = scene_truth(cfg, ev.scene_id);
    auto [it, fresh] = first_by_text.try_emplace(ev.record.event_text, truth.scene_type, ev.scene_id);
    if (fresh || it->second.first == truth.scene_type) continue;
    CHECK(oracle_answers(cfg, ev.scene_id, Relation::kIntent) !=
          oracle_answers(cfg, it->second.second, Relation::kIntent));
    found = true;
    break;
  }
  CHECK(found);
}

TEST_CASE("a single scene type shares one answer pool") {
  SynthConfig cfg;
  cfg.n_scene_types = 1;
  cfg.n_scenes = 20;
  const auto& t = TemplateSet::builtin();
  std::set<std::size_t> types;
  for (std::size_t i = 0; i < cfg.n_scenes; ++i) {
    const auto truth = scene_truth(cfg, scene_id_for(cfg, i));
    types.insert(truth.scene_type);
    for (std::size_t e = 0; e < truth.event_templates.size(); ++e)
      for (auto rel : graph::kRelations)
        for (const auto& text : oracle_answers(cfg, scene_id_for(cfg, i), rel)) {
          bool in_pool = false;
          for (std::size_t k = 0; k < t.scene_types[0].events.size(); ++k) {
            const auto pool = t.valid_inferences(0, k, rel);
            in_pool |= std::find(pool.begin(), pool.end(), text) != pool.end();
          }
          CHECK(in_pool);
        }
  }
  CHECK(types == std::set<std::size_t>{0});
}

TEST_CASE("subject features sit nearer their action centroid than bystanders do") {
  SynthConfig cfg;
  cfg.n_scenes = 50;
  const auto c = generate(cfg);
  // Two subjects doing the same action are closer than a subject and a bystander.
  std::map<std::pair<std::size_t, std::size_t>, std::vector<const std::vector<float>*>> by_action;
  for (const auto& s : c.scenes()) {
    const auto truth = scene_truth(cfg, s.scene_id);
    for (std::size_t e = 0; e < truth.event_templates.size(); ++e)
      by_action[{truth.scene_type, truth.event_templates[e]}].push_back(
          &s.find_person(truth.subjects[e])->feature);
  }
  auto dist = [](const std::vector<float>& a, const std::vector<float>& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(d);
  };
  std::size_t compared = 0;
  const std::vector<const std::vector<float>*>* prev = nullptr;
  for (const auto& [key, feats] : by_action) {
    if (feats.size() >= 2 && prev) {
      CHECK(dist(*feats[0], *feats[1]) < dist(*feats[0], *(*prev)[0]));
      ++compared;
    }
    if (!feats.empty()) prev = &feats;
  }
  CHECK(compared > 5);
}

TEST_CASE("config validation names the field") {
  SynthConfig cfg;
  cfg.persons_per_scene = {1, 3};
  CHECK_THROWS_WITH_AS(generate(cfg), doctest::Contains("persons_per_scene"), std::invalid_argument);
  cfg = {};
  cfg.n_scene_types = 99;
  CHECK_THROWS_WITH_AS(generate(cfg), doctest::Contains("n_scene_types"), std::invalid_argument);
  cfg = {};
  cfg.inferences_per_relation = {2, 40};
  CHECK_THROWS_WITH_AS(generate(cfg), doctest::Contains("inferences_per_relation"), std::invalid_argument);
}
