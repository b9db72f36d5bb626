#include "vcg/metrics/eval.hpp"

#include <map>
#include <unordered_set>

#include "vcg/metrics/diversity.hpp"
#include "vcg/metrics/overlap.hpp"

namespace vcg::metrics {

namespace {

nlohmann::ordered_json overlap_json(const OverlapScores& s) {
  return {{"bleu2", 100 * s.bleu2}, {"bleu4", 100 * s.bleu4},   {"cider", s.cider},
          {"rouge_l", 100 * s.rouge_l}, {"meteor", 100 * s.meteor}, {"contexts", s.contexts},
          {"sentences", s.sentences}};
}

struct Accumulator {
  OverlapScores scores;
  std::map<std::string, Words> hyps;
  std::map<std::string, std::vector<Words>> refs;

  void add(const std::string& id, const Words& hyp, const std::vector<Words>& references) {
    scores.bleu2 += bleu_n(hyp, references, 2);
    scores.bleu4 += bleu_n(hyp, references, 4);
    scores.rouge_l += rouge_l(hyp, references);
    scores.meteor += meteor_exact(hyp, references);
    ++scores.sentences;
    hyps[id] = hyp;
    refs[id] = references;
  }

  OverlapScores finish() const {
    OverlapScores out = scores;
    if (out.sentences == 0) return out;
    const auto n = static_cast<double>(out.sentences);
    out.bleu2 /= n;
    out.bleu4 /= n;
    out.rouge_l /= n;
    out.meteor /= n;
    out.cider = hyps.size() >= 2 ? cider(hyps, refs) : 0.0;
    return out;
  }
};

}  // namespace

nlohmann::ordered_json EvalBundle::to_json() const {
  nlohmann::ordered_json j;
  j["overall"] = overlap_json(overall);
  nlohmann::ordered_json rel;
  for (auto r : graph::kRelations) rel[std::string(graph::relation_name(r))] = overlap_json(relations[static_cast<std::size_t>(r)]);
  j["relations"] = rel;
  j["unique"] = 100 * unique;
  j["novel"] = 100 * novel;
  j["div1_s"] = 100 * div1_s;
  j["div2_s"] = 100 * div2_s;
  if (acc) {
    j["acc_k"] = acc_k;
    j["acc"] = *acc;
  }
  return j;
}

EvalBundle evaluate_generations(std::span<const decode::GenerationSet> sets, const graph::Corpus& corpus) {
  std::unordered_set<std::string> training;
  for (auto e : corpus.event_indices(graph::Split::kTrain))
    for (const auto& inf : corpus.events()[e].record.inferences) training.insert(canonicalize(inf.text));

  std::array<Accumulator, 3> per_rel;
  Accumulator all;
  std::vector<std::string> generated;
  double div1 = 0, div2 = 0;
  std::size_t nonempty_sets = 0;
  for (const auto& set : sets) {
    const auto e = decode::corpus_event_index(corpus, set.scene_id, set.event_index);
    std::vector<Words> references;
    for (const auto* inf : corpus.events()[e].record.inferences_for(set.relation)) references.push_back(tokenize(inf->text));
    const auto rel = static_cast<std::size_t>(set.relation);
    ++per_rel[rel].scores.contexts;
    ++all.scores.contexts;
    for (std::size_t k = 0; k < set.texts.size(); ++k) {
      const auto id = set.scene_id + "/" + std::to_string(set.event_index) + "/" +
                      std::string(graph::relation_name(set.relation)) + "/" + std::to_string(k);
      const auto hyp = tokenize(set.texts[k]);
      per_rel[rel].add(id, hyp, references);
      all.add(id, hyp, references);
      generated.push_back(set.texts[k]);
    }
    if (!set.texts.empty()) {
      div1 += div_ngram_s(set.texts, 1);
      div2 += div_ngram_s(set.texts, 2);
      ++nonempty_sets;
    }
  }
  EvalBundle out;
  for (std::size_t r = 0; r < 3; ++r) out.relations[r] = per_rel[r].finish();
  out.overall = all.finish();
  out.unique = unique_ratio(generated);
  out.novel = novel_ratio(generated, training);
  if (nonempty_sets > 0) {
    out.div1_s = div1 / static_cast<double>(nonempty_sets);
    out.div2_s = div2 / static_cast<double>(nonempty_sets);
  }
  return out;
}

}  // namespace vcg::metrics
