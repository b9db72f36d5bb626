#include "vcg/decode/decode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vcg/util/parallel.hpp"
#include "vcg/util/rng.hpp"

namespace vcg::decode {

using graph::Relation;

std::vector<float> SessionState::logits() const {
  const auto l = session_.logits();
  return {l.begin(), l.end()};
}

bool SessionState::can_advance() const { return session_.length() < session_.capacity(); }

std::vector<double> softmax(std::span<const float> logits) {
  auto out = model::log_softmax(logits);
  for (auto& v : out) v = std::exp(v);
  return out;
}

std::vector<double> nucleus_filter(std::span<const double> probs, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("nucleus_filter: p must be in (0, 1]");
  double total = 0;
  for (double v : probs) {
    if (!(v >= 0.0)) throw std::invalid_argument("nucleus_filter: negative or NaN probability");
    total += v;
  }
  if (total <= 0.0) throw std::invalid_argument("nucleus_filter: degenerate (all-zero) distribution");
  if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("nucleus_filter: distribution does not sum to 1");

  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  std::vector<double> out(probs.size(), 0.0);
  double kept = 0;
  for (auto idx : order) {
    if (probs[idx] <= 0.0) break;
    out[idx] = probs[idx];
    kept += probs[idx];
    if (kept >= p) break;
  }
  for (auto& v : out) v /= kept;
  return out;
}

namespace {

int argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<int>(best);
}

void append(Candidate& c, int token, double logprob, int end_id) {
  c.tokens.push_back(token);
  c.token_logprobs.push_back(logprob);
  c.total_logprob += logprob;
  c.finished = token == end_id;
}

}  // namespace

std::vector<Candidate> sample_candidates(const DecodeState& start, double p, std::size_t n,
                                         std::size_t max_new_tokens, std::uint64_t seed, int end_id) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("sample_candidates: p must be in (0, 1]");
  std::vector<Candidate> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    auto state = start.clone();
    auto& cand = out[i];
    for (std::size_t step = 0; step < max_new_tokens && !cand.finished; ++step) {
      const auto probs = softmax(state->logits());
      const auto kept = nucleus_filter(probs, p);
      const double u = rng.uniform01();
      double cum = 0;
      int token = -1;
      for (std::size_t t = 0; t < kept.size(); ++t) {
        if (kept[t] <= 0.0) continue;
        token = static_cast<int>(t);
        cum += kept[t];
        if (u < cum) break;
      }
      append(cand, token, std::log(probs[static_cast<std::size_t>(token)]), end_id);
      if (cand.finished || !state->can_advance()) break;
      state->advance(token);
    }
  }
  return out;
}

Candidate greedy(const DecodeState& start, std::size_t max_new_tokens, int end_id) {
  auto state = start.clone();
  Candidate cand;
  for (std::size_t step = 0; step < max_new_tokens && !cand.finished; ++step) {
    const auto logp = model::log_softmax(state->logits());
    const int token = argmax(logp);
    append(cand, token, logp[static_cast<std::size_t>(token)], end_id);
    if (cand.finished || !state->can_advance()) break;
    state->advance(token);
  }
  return cand;
}

std::vector<Candidate> beam_search(const DecodeState& start, std::size_t beam_size, std::size_t n,
                                   std::size_t max_new_tokens, int end_id) {
  if (beam_size == 0) throw std::invalid_argument("beam_search: beam_size must be positive");
  if (n > beam_size) throw std::invalid_argument("beam_search: n exceeds beam_size");
  struct Beam {
    std::unique_ptr<DecodeState> state;
    Candidate cand;
    bool stopped = false;  // finished or out of room
  };
  auto better = [](const Candidate& a, const Candidate& b) {
    const double sa = a.normalized(), sb = b.normalized();
    if (sa != sb) return sa > sb;
    return a.tokens < b.tokens;
  };

  std::vector<Beam> beams;
  beams.push_back({start.clone(), {}, false});
  for (std::size_t step = 0; step < max_new_tokens; ++step) {
    if (std::all_of(beams.begin(), beams.end(), [](const Beam& b) { return b.stopped; })) break;
    struct Expansion {
      Candidate cand;
      std::size_t parent;
      int token;  // -1 carries a stopped beam over unchanged
    };
    std::vector<Expansion> pool;
    for (std::size_t bi = 0; bi < beams.size(); ++bi) {
      auto& b = beams[bi];
      if (b.stopped) {
        pool.push_back({b.cand, bi, -1});
        continue;
      }
      const auto logp = model::log_softmax(b.state->logits());
      std::vector<int> ids(logp.size());
      std::iota(ids.begin(), ids.end(), 0);
      const auto keep = std::min(beam_size, ids.size());
      std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(), [&](int a, int c) {
        const auto la = logp[static_cast<std::size_t>(a)], lc = logp[static_cast<std::size_t>(c)];
        return la != lc ? la > lc : a < c;
      });
      for (std::size_t k = 0; k < keep; ++k) {
        Candidate c = b.cand;
        append(c, ids[k], logp[static_cast<std::size_t>(ids[k])], end_id);
        pool.push_back({std::move(c), bi, ids[k]});
      }
    }
    std::stable_sort(pool.begin(), pool.end(), [&](const Expansion& a, const Expansion& b) { return better(a.cand, b.cand); });
    if (pool.size() > beam_size) pool.resize(beam_size);
    std::vector<Beam> next;
    for (auto& e : pool) {
      auto& parent = beams[e.parent];
      Beam nb;
      nb.cand = std::move(e.cand);
      if (e.token < 0) {
        nb.state = parent.state->clone();
        nb.stopped = true;
      } else {
        nb.state = parent.state->clone();
        nb.stopped = nb.cand.finished || !nb.state->can_advance();
        if (!nb.stopped) nb.state->advance(e.token);
      }
      next.push_back(std::move(nb));
    }
    beams = std::move(next);
  }
  std::vector<Candidate> out;
  for (auto& b : beams) out.push_back(std::move(b.cand));
  std::stable_sort(out.begin(), out.end(), better);
  if (out.size() > n) out.resize(n);
  return out;
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kNucleus: return "nucleus";
    case Method::kBeam: return "beam";
    case Method::kGreedy: return "greedy";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view name) {
  if (name == "nucleus") return Method::kNucleus;
  if (name == "beam") return Method::kBeam;
  if (name == "greedy") return Method::kGreedy;
  return std::nullopt;
}

void DecodeConfig::validate() const {
  auto bad = [](const std::string& what) { throw std::invalid_argument("decode config: " + what); };
  if (!(p > 0.0 && p <= 1.0)) bad("p must be in (0, 1]");
  if (method == Method::kBeam && (beam_size == 0 || n > beam_size)) bad("beam search needs 0 < n <= beam_size");
  if (generate_event_place && !mask.use_image) bad("generating event and place needs the image");
}

std::size_t event_index_in_scene(const graph::Corpus& corpus, std::size_t corpus_event_index) {
  const auto& events = corpus.events();
  const auto& id = events.at(corpus_event_index).scene_id;
  std::size_t k = 0;
  for (std::size_t i = 0; i < corpus_event_index; ++i) k += events[i].scene_id == id;
  return k;
}

std::size_t corpus_event_index(const graph::Corpus& corpus, std::string_view scene_id, std::size_t event_index) {
  const auto& events = corpus.events();
  std::size_t k = 0;
  for (std::size_t i = 0; i < events.size(); ++i)
    if (events[i].scene_id == scene_id && k++ == event_index) return i;
  throw std::out_of_range("no event " + std::to_string(event_index) + " in scene " + std::string(scene_id));
}

GenerationSet generate(const model::ModelParams<float>& params, const text::Vocab& vocab,
                       const graph::Corpus& corpus, std::size_t corpus_event_index, Relation relation,
                       const DecodeConfig& config) {
  config.validate();
  const auto& ev = corpus.events().at(corpus_event_index);
  const auto* scene = corpus.find_scene(ev.scene_id);
  auto mask = config.mask;
  graph::EventRecord record = ev.record;
  if (config.generate_event_place) {
    record = model::infer_event_place(params, vocab, *scene, mask);
    mask.use_event = mask.use_place = true;
  }
  const auto context = model::assemble(params.config, vocab, *scene, &record, relation, nullptr, mask);
  const SessionState start(model::Session(params, context));
  const int end_id = text::id_of(text::Special::kEnd);

  GenerationSet set;
  set.scene_id = ev.scene_id;
  set.event_index = event_index_in_scene(corpus, corpus_event_index);
  set.relation = relation;
  set.mask = config.mask.name() + (config.generate_event_place ? "+generated" : "");
  set.method = std::string(method_name(config.method));
  switch (config.method) {
    case Method::kNucleus: {
      const auto seed = derive_seed(config.seed, corpus_event_index * 3 + static_cast<std::size_t>(relation));
      set.candidates = sample_candidates(start, config.p, config.n, config.max_new_tokens, seed, end_id);
      break;
    }
    case Method::kBeam:
      set.candidates = beam_search(start, config.beam_size, config.n, config.max_new_tokens, end_id);
      break;
    case Method::kGreedy:
      set.candidates.push_back(greedy(start, config.max_new_tokens, end_id));
      break;
  }
  for (const auto& c : set.candidates) set.texts.push_back(text::decode(vocab, c.tokens));
  return set;
}

std::vector<GenerationSet> generate_split(const model::ModelParams<float>& params, const text::Vocab& vocab,
                                          const graph::Corpus& corpus, std::optional<graph::Split> split,
                                          const DecodeConfig& config, std::size_t limit) {
  std::vector<std::pair<std::size_t, Relation>> contexts;
  for (auto e : corpus.event_indices(split))
    for (auto r : graph::kRelations) contexts.emplace_back(e, r);
  if (limit > 0 && contexts.size() > limit) contexts.resize(limit);
  std::vector<GenerationSet> out(contexts.size());
  parallel_for(contexts.size(), [&](std::size_t i) {
    out[i] = generate(params, vocab, corpus, contexts[i].first, contexts[i].second, config);
  });
  return out;
}

nlohmann::ordered_json to_json(const GenerationSet& set) {
  nlohmann::ordered_json j;
  j["scene_id"] = set.scene_id;
  j["event_index"] = set.event_index;
  j["relation"] = graph::relation_name(set.relation);
  j["mask"] = set.mask;
  j["method"] = set.method;
  auto cands = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    const auto& c = set.candidates[i];
    nlohmann::ordered_json jc;
    jc["text"] = i < set.texts.size() ? set.texts[i] : "";
    jc["logprob"] = c.total_logprob;
    jc["token_logprobs"] = c.token_logprobs;
    jc["finished"] = c.finished;
    cands.push_back(std::move(jc));
  }
  j["candidates"] = std::move(cands);
  return j;
}

GenerationSet generation_from_json(const nlohmann::json& j) {
  GenerationSet set;
  set.scene_id = j.at("scene_id").get<std::string>();
  set.event_index = j.at("event_index").get<std::size_t>();
  const auto rel = graph::parse_relation(j.at("relation").get<std::string>());
  if (!rel) throw std::invalid_argument("generation line: unknown relation");
  set.relation = *rel;
  set.mask = j.value("mask", "");
  set.method = j.value("method", "");
  for (const auto& jc : j.at("candidates")) {
    Candidate c;
    c.total_logprob = jc.value("logprob", 0.0);
    c.token_logprobs = jc.value("token_logprobs", std::vector<double>{});
    c.finished = jc.value("finished", false);
    set.candidates.push_back(std::move(c));
    set.texts.push_back(jc.at("text").get<std::string>());
  }
  return set;
}

std::string dump_generations(std::span<const GenerationSet> sets) {
  std::string out;
  for (const auto& s : sets) {
    out += to_json(s).dump();
    out += '\n';
  }
  return out;
}

std::vector<GenerationSet> parse_generations(std::string_view jsonl) {
  std::vector<GenerationSet> out;
  std::size_t line_no = 0, pos = 0;
  while (pos < jsonl.size()) {
    const auto end = std::min(jsonl.find('\n', pos), jsonl.size());
    const auto line = jsonl.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(generation_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::invalid_argument("generations line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace vcg::decode
