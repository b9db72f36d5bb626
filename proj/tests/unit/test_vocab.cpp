#include <doctest.h>

#include "fixtures.hpp"
#include "vcg/graph/store.hpp"
#include "vcg/synth/synth.hpp"
#include "vcg/text/vocab.hpp"

using namespace vcg;
using namespace vcg::text;
using graph::Relation;
using vcg::testing::make_event;
using vcg::testing::make_scene;

namespace {

// Ten distinct words across event, place and inference text.
graph::Corpus ten_word_corpus() {
  graph::Corpus c(2);
  c.add_scene(make_scene("a", 2, 2, 1));
  c.add_event("a", make_event("[Person1] orders a drink", "at the bar",
                              {{Relation::kBefore, "walk in"}, {Relation::kIntent, "relax now"}}));
  return c;
}

}  // namespace

TEST_CASE("special tokens and id layout") {
  CHECK(kNumSpecials == 12);
  CHECK(kFirstWordId == 27);
  CHECK(special_name(Special::kEndEvent) == "<e_event>");
  CHECK(relation_token(Relation::kIntent) == id_of(Special::kRelIntent));
}

TEST_CASE("vocabulary size counts specials, persons and words") {
  const auto v = build_vocab(ten_word_corpus(), 1);
  CHECK(v.size() == 12 + 15 + 10);
}

TEST_CASE("min_count drops every singleton") {
  const auto v = build_vocab(ten_word_corpus(), 2);
  CHECK(v.size() == 12 + 15);
  for (auto id : encode(v, "orders drink")) CHECK(id == id_of(Special::kUnk));
}

TEST_CASE("vocabulary is deterministic and ordered by count then text") {
  const auto c = vcg::testing::tiny_corpus();
  const auto a = build_vocab(c), b = build_vocab(c);
  CHECK(a == b);
  CHECK(a.to_json() == b.to_json());
  // "the" and "a" are the most frequent words in the fixture.
  CHECK(a.words()[0] == "the");
  CHECK(Vocab::from_json(a.to_json()) == a);
}

TEST_CASE("encode and decode") {
  const auto v = build_vocab(ten_word_corpus());
  const auto ids = encode(v, "orders a drink");
  REQUIRE(ids.size() == 3);
  for (auto id : ids) CHECK(id >= kFirstWordId);
  const auto p = encode(v, "[Person1] orders");
  CHECK(p[0] == v.person_id(graph::PersonTag{1}));
  CHECK(encode(v, "[person1]")[0] == id_of(Special::kUnk));
  CHECK(encode(v, "orders zebra")[1] == id_of(Special::kUnk));
  CHECK(decode(v, encode(v, "Orders  A drink")) == "orders a drink");
  CHECK(decode(v, {id_of(Special::kPad), id_of(Special::kPad)}).empty());
  CHECK(decode(v, {ids[0], id_of(Special::kEndEvent), ids[1]}) == "orders a");
  CHECK_THROWS_AS(decode(v, {static_cast<TokenId>(v.size())}), VocabError);
}

TEST_CASE("round trip holds on every text of an UNK-free corpus") {
  synth::SynthConfig cfg;
  cfg.n_scenes = 80;
  cfg.visual_dependence = 0.5;
  const auto c = synth::generate(cfg);
  const auto v = build_vocab(c);
  std::size_t checked = 0;
  for (const auto& ev : c.events()) {
    std::vector<std::string> texts{ev.record.event_text, ev.record.place_text};
    for (const auto& inf : ev.record.inferences) texts.push_back(inf.text);
    for (const auto& t : texts) {
      const auto once = decode(v, encode(v, t));
      CHECK(once == normalize(t));
      CHECK(decode(v, encode(v, once)) == once);
      ++checked;
    }
  }
  CHECK(checked > 500);
}
