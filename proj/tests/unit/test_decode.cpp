#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vcg/decode/decode.hpp"
#include "vcg/model/session.hpp"
#include "vcg/util/rng.hpp"

using namespace vcg;
using namespace vcg::decode;

namespace {

// Logits depend only on the prefix, so every path's probability is known.
class ToyState final : public DecodeState {
 public:
  explicit ToyState(std::size_t vocab) : vocab_(vocab) {}
  std::vector<float> logits() const override {
    std::vector<float> l(vocab_);
    std::uint64_t h = 1469598103934665603ull;
    for (int t : prefix_) h = (h ^ static_cast<std::uint64_t>(t + 1)) * 1099511628211ull;
    for (std::size_t i = 0; i < vocab_; ++i) l[i] = static_cast<float>(((h >> (8 * i)) & 0xff) / 64.0);
    return l;
  }
  void advance(int token) override { prefix_.push_back(token); }
  std::unique_ptr<DecodeState> clone() const override { return std::make_unique<ToyState>(*this); }
  const std::vector<int>& prefix() const { return prefix_; }

 private:
  std::size_t vocab_;
  std::vector<int> prefix_;
};

// Every sequence of at most `steps` tokens that stops at END (0) or the limit.
void enumerate(const ToyState& s, std::size_t steps, Candidate cur, std::vector<Candidate>& out) {
  if (steps == 0) {
    out.push_back(cur);
    return;
  }
  const auto logp = model::log_softmax(s.logits());
  for (int t = 0; t < static_cast<int>(logp.size()); ++t) {
    Candidate c = cur;
    c.tokens.push_back(t);
    c.token_logprobs.push_back(logp[static_cast<std::size_t>(t)]);
    c.total_logprob += logp[static_cast<std::size_t>(t)];
    if (t == 0) {
      c.finished = true;
      out.push_back(c);
      continue;
    }
    ToyState next = s;
    next.advance(t);
    enumerate(next, steps - 1, c, out);
  }
}

}  // namespace

TEST_CASE("nucleus filter keeps the smallest covering prefix") {
  const std::vector<double> p{0.5, 0.3, 0.15, 0.05};
  const auto f = nucleus_filter(p, 0.9);
  CHECK(f[0] == doctest::Approx(0.5 / 0.95));
  CHECK(f[1] == doctest::Approx(0.3 / 0.95));
  CHECK(f[2] == doctest::Approx(0.15 / 0.95));
  CHECK(f[3] == 0.0);

  const auto all = nucleus_filter(p, 1.0);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(all[i] == doctest::Approx(p[i]));

  const std::vector<double> one_hot{0.0, 1.0, 0.0};
  CHECK(nucleus_filter(one_hot, 0.1) == one_hot);

  const std::vector<double> tie{0.25, 0.25, 0.25, 0.25};
  const auto t = nucleus_filter(tie, 0.5);
  CHECK(t == std::vector<double>{0.5, 0.5, 0.0, 0.0});

  CHECK_THROWS_AS(nucleus_filter(p, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(nucleus_filter(p, 1.5), std::invalid_argument);
  const std::vector<double> zero{0.0, 0.0};
  CHECK_THROWS_AS(nucleus_filter(zero, 0.9), std::invalid_argument);
  const std::vector<double> unnormalized{0.5, 0.9};
  CHECK_THROWS_AS(nucleus_filter(unnormalized, 0.9), std::invalid_argument);
}

TEST_CASE("filtered mass is at least p and sums to one") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> logits(12);
    for (auto& l : logits) l = static_cast<float>(3 * rng.normal());
    const auto probs = softmax(logits);
    const double p = 0.05 + 0.95 * rng.uniform01();
    const auto f = nucleus_filter(probs, p);
    double kept = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
      if (f[i] > 0) kept += probs[i];
    CHECK(kept >= p - 1e-12);
    CHECK(std::accumulate(f.begin(), f.end(), 0.0) == doctest::Approx(1.0));
  }
}

TEST_CASE("beam search with a wide beam matches exhaustive enumeration") {
  const ToyState start(3);
  std::vector<Candidate> all;
  enumerate(start, 2, {}, all);
  REQUIRE(all.size() == 7);
  std::sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
    if (a.normalized() != b.normalized()) return a.normalized() > b.normalized();
    return a.tokens < b.tokens;
  });
  const auto beams = beam_search(start, 9, 7, 2, 0);
  REQUIRE(beams.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(beams[i].tokens == all[i].tokens);
    CHECK(beams[i].total_logprob == doctest::Approx(all[i].total_logprob).epsilon(1e-12));
    CHECK(beams[i].finished == all[i].finished);
  }
  CHECK_THROWS_AS(beam_search(start, 2, 3, 2, 0), std::invalid_argument);
}

TEST_CASE("beam of one equals greedy") {
  for (std::size_t v : {3u, 5u, 8u}) {
    const ToyState start(v);
    const auto b = beam_search(start, 1, 1, 6, 0);
    const auto g = greedy(start, 6, 0);
    CHECK(b.front().tokens == g.tokens);
    CHECK(b.front().total_logprob == doctest::Approx(g.total_logprob));
  }
}

TEST_CASE("sampling is reproducible per candidate and respects the limit") {
  const ToyState start(6);
  const auto a = sample_candidates(start, 0.9, 8, 5, 42, 0);
  const auto b = sample_candidates(start, 0.9, 8, 5, 42, 0);
  REQUIRE(a.size() == 8);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].tokens == b[i].tokens);
    CHECK(a[i].tokens.size() <= 5);
    CHECK(a[i].token_logprobs.size() == a[i].tokens.size());
    if (a[i].finished) CHECK(a[i].tokens.back() == 0);
  }
  // Candidate i does not depend on how many others are drawn.
  const auto few = sample_candidates(start, 0.9, 3, 5, 42, 0);
  for (std::size_t i = 0; i < few.size(); ++i) CHECK(few[i].tokens == a[i].tokens);
  CHECK(sample_candidates(start, 0.9, 4, 0, 42, 0).front().tokens.empty());
}

TEST_CASE("generation sets survive a JSON lines round trip") {
  GenerationSet s;
  s.scene_id = "scene_0003";
  s.event_index = 1;
  s.relation = graph::Relation::kIntent;
  s.mask = "full";
  s.method = "beam";
  Candidate c;
  c.tokens = {7, 8, 2};
  c.token_logprobs = {-0.5, -0.25, -0.125};
  c.total_logprob = -0.875;
  c.finished = true;
  s.candidates = {c};
  s.texts = {"get a drink"};
  const std::vector<GenerationSet> sets{s, s};
  const auto back = parse_generations(dump_generations(sets));
  REQUIRE(back.size() == 2);
  CHECK(back[0].scene_id == s.scene_id);
  CHECK(back[0].event_index == 1);
  CHECK(back[0].relation == graph::Relation::kIntent);
  CHECK(back[0].texts == s.texts);
  CHECK(dump_generations(back) == dump_generations(sets));
}

TEST_CASE("decode config validation") {
  DecodeConfig c;
  CHECK_NOTHROW(c.validate());
  c.p = 0.0;
  CHECK_THROWS(c.validate());
  c = {};
  c.method = Method::kBeam;
  c.n = 6;
  CHECK_THROWS(c.validate());
  CHECK(parse_method("nucleus") == Method::kNucleus);
  CHECK_FALSE(parse_method("topk").has_value());
}
