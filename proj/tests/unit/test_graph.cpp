#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "fixtures.hpp"
#include "vcg/graph/store.hpp"
#include "vcg/synth/synth.hpp"

using namespace vcg;
using namespace vcg::graph;
using vcg::testing::make_event;
using vcg::testing::make_scene;
using vcg::testing::tiny_corpus;

namespace {

bool has_rule(const std::vector<Violation>& v, const std::string& rule) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.rule == rule; });
}

}  // namespace

TEST_CASE("person tokens and word splitting") {
  CHECK(parse_person_token("[Person3]")->index == 3);
  CHECK_FALSE(parse_person_token("[person3]"));
  CHECK_FALSE(parse_person_token("[Person0]"));
  const auto m = person_mentions("[Person2] hands [Person1] a cup from [Person2]");
  REQUIRE(m.size() == 2);
  CHECK(m[0].index == 2);
  CHECK(split_words("[Person1] sits").size() == 2);
}

TEST_CASE("save and load round trip is byte stable") {
  const auto c = tiny_corpus();
  const auto text = dump_corpus(c);
  const auto back = parse_corpus(text);
  CHECK(back.scenes().size() == 2);
  CHECK(back.events().size() == 3);
  CHECK(dump_corpus(back) == text);
}

TEST_CASE("feature sidecar round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "vcg_graph_sidecar";
  std::filesystem::create_directories(dir);
  const auto c = tiny_corpus();
  save_corpus(c, dir / "c.jsonl", {.feature_sidecar = "features.vcgm"});
  const auto back = load_corpus(dir / "c.jsonl");
  CHECK(dump_corpus(back) == dump_corpus(c));
  std::filesystem::remove_all(dir);
}

TEST_CASE("inference naming an absent person is rejected with scene and tag") {
  auto c = tiny_corpus();
  c.mutable_events()[0].record.inferences.push_back({Relation::kAfter, "thank [Person9]", PersonTag{1}});
  const auto v = validate(c);
  REQUIRE(has_rule(v, "mention_in_scene"));
  try {
    parse_corpus(dump_corpus(c));
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("s0") != std::string::npos);
    CHECK(msg.find("[Person9]") != std::string::npos);
  }
}

TEST_CASE("validation rules fire on the matching defects") {
  SUBCASE("too many visual features") {
    Corpus c(4);
    c.add_scene(make_scene("big", 16, 4, 1));
    c.add_event("big", make_event("[Person1] waves", "outside", {{Relation::kBefore, "stand up"}}));
    CHECK(has_rule(validate(c), "max_visual_features"));
  }
  SUBCASE("empty place") {
    auto c = tiny_corpus();
    c.mutable_events()[1].record.place_text = "";
    CHECK(has_rule(validate(c), "place_nonempty"));
  }
  SUBCASE("feature dimension") {
    auto c = tiny_corpus();
    c.set_feature_dim(9);
    CHECK(has_rule(validate(c), "feature_dim"));
  }
  SUBCASE("subject not in scene") {
    auto c = tiny_corpus();
    c.mutable_events()[0].record.subject = PersonTag{7};
    CHECK(has_rule(validate(c), "subject_in_scene"));
  }
  SUBCASE("generated corpus is clean") {
    synth::SynthConfig cfg;
    cfg.n_scenes = 50;
    CHECK(validate(synth::generate(cfg)).empty());
  }
}

TEST_CASE("malformed input lines are errors") {
  CHECK_THROWS_AS(parse_corpus("not json\n"), CorpusError);
  CHECK_THROWS_AS(parse_corpus(R"({"format":"vcg","version":1,"feature_dim":2,"extra":1})"), CorpusError);
  CHECK_THROWS_AS(parse_corpus(""), CorpusError);
}

TEST_CASE("stats: hand-counted means") {
  Corpus c(2);
  c.add_scene(make_scene("a", 2, 2, 1));
  c.add_event("a", make_event("[Person1] sits", "here",
                              {{Relation::kBefore, "x y"}, {Relation::kBefore, "x z"}, {Relation::kIntent, "rest"}}));
  c.add_event("a", make_event("[Person1] sits", "here",
                              {{Relation::kBefore, "x y"}, {Relation::kBefore, "q"}, {Relation::kBefore, "r s t"}}));
  const auto s = compute_stats(c);
  CHECK(s.relations[0].mean_per_event == doctest::Approx(2.5));
  CHECK(s.relations[0].min_per_event == 2);
  CHECK(s.relations[0].max_per_event == 3);
  CHECK(s.relations[2].mean_per_event == 0.0);
  CHECK(s.words_event == doctest::Approx(2.0));
  CHECK(s.relations[0].top_start_bigrams.front() == std::pair<std::string, std::size_t>{"x y", 2});
  CHECK(s.event_length_histogram.at(2) == 2);
  CHECK_THROWS_AS(compute_stats(c, Split::kDev), CorpusError);
}

TEST_CASE("apportion follows the largest remainder rule") {
  CHECK(apportion(100, {0.8, 0.1, 0.1}) == std::array<std::size_t, 3>{80, 10, 10});
  // 7 * (0.5, 0.3, 0.2) = 3.5, 2.1, 1.4 -> floors 3, 2, 1, remainder 1 goes to the 0.5 remainder.
  CHECK(apportion(7, {0.5, 0.3, 0.2}) == std::array<std::size_t, 3>{4, 2, 1});
  // 10 * (1/3 each): floors 3, 3, 3; equal remainders, the earlier split wins.
  CHECK(apportion(10, {1.0 / 3, 1.0 / 3, 1.0 / 3}) == std::array<std::size_t, 3>{4, 3, 3});
  CHECK_THROWS(apportion(10, {0.5, 0.5, 0.5}));
}

TEST_CASE("split_corpus is deterministic and honours the counts") {
  Corpus c(2);
  for (int i = 0; i < 100; ++i) {
    const auto id = "id" + std::to_string(i);
    c.add_scene(make_scene(id, 1, 2, i));
  }
  const auto a = split_corpus(c, {0.8, 0.1, 0.1}, 7);
  const auto b = split_corpus(c, {0.8, 0.1, 0.1}, 7);
  CHECK(a.count_scenes(Split::kTrain) == 80);
  CHECK(a.count_scenes(Split::kDev) == 10);
  CHECK(a.count_scenes(Split::kTest) == 10);
  for (const auto& s : c.scenes()) CHECK(a.split_of(s.scene_id) == b.split_of(s.scene_id));
  const auto all = split_corpus(c, {1, 0, 0}, 3);
  CHECK(all.count_scenes(Split::kTrain) == 100);
}
