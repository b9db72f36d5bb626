#include "vcg/metrics/ranking.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <set>
#include <stdexcept>

#include "vcg/model/session.hpp"
#include "vcg/util/parallel.hpp"
#include "vcg/util/rng.hpp"

namespace vcg::metrics {

std::vector<RankItem> rank_items(const graph::Corpus& corpus, graph::Split split) {
  std::vector<RankItem> out;
  for (auto e : corpus.event_indices(split))
    for (auto r : graph::kRelations) {
      RankItem item{e, r, {}};
      for (const auto* inf : corpus.events()[e].record.inferences_for(r)) item.ground_truths.push_back(inf->text);
      if (!item.ground_truths.empty()) out.push_back(std::move(item));
    }
  return out;
}

std::vector<double> PerplexityScorer::score(const RankItem& item, std::span<const std::string> candidates) const {
  const auto& ev = corpus_.events().at(item.event_index);
  const auto* scene = corpus_.find_scene(ev.scene_id);
  const auto context = model::assemble(params_.config, vocab_, *scene, &ev.record, item.relation, nullptr, mask_);
  std::vector<text::TokenSeq> ids;
  ids.reserve(candidates.size());
  for (const auto& c : candidates) ids.push_back(text::encode(vocab_, c));
  return model::perplexities(params_, context, ids);
}

double item_accuracy(std::span<const double> scores, std::span<const std::uint8_t> is_gt) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  const auto g = static_cast<std::size_t>(std::count_if(is_gt.begin(), is_gt.end(), [](std::uint8_t v) { return v != 0; }));
  if (g == 0) throw std::invalid_argument("item_accuracy: no ground truth");
  std::size_t hits = 0;
  for (std::size_t r = 0; r < g; ++r) hits += is_gt[order[r]] != 0;
  return static_cast<double>(hits) / static_cast<double>(g);
}

AccResult acc_at_k(const CandidateScorer& scorer, const graph::Corpus& corpus, std::span<const RankItem> items,
                   const AccConfig& config) {
  // Pools of (scene, text) per relation, built once.
  struct Entry {
    const std::string* scene;
    const std::string* text;
  };
  std::array<std::vector<Entry>, 3> by_relation;
  std::vector<Entry> all;
  for (const auto& ev : corpus.events())
    for (const auto& inf : ev.record.inferences) {
      by_relation[static_cast<std::size_t>(inf.relation)].push_back({&ev.scene_id, &inf.text});
      all.push_back({&ev.scene_id, &inf.text});
    }

  AccResult result;
  result.per_item.assign(items.size(), 0.0);
  std::vector<double> chance(items.size(), 0.0);
  parallel_for(items.size(), [&](std::size_t i) {
    const auto& item = items[i];
    const auto g = item.ground_truths.size();
    if (g == 0) throw std::invalid_argument("acc_at_k: item without ground truth");
    if (g > config.k) throw std::invalid_argument("acc_at_k: more ground truths than candidates");
    const auto& scene = corpus.events().at(item.event_index).scene_id;
    const std::set<std::string> gt(item.ground_truths.begin(), item.ground_truths.end());
    const auto& pool = config.same_relation ? by_relation[static_cast<std::size_t>(item.relation)] : all;
    std::vector<const std::string*> negatives;
    for (const auto& e : pool)
      if (*e.scene != scene && !gt.contains(*e.text)) negatives.push_back(e.text);
    const auto need = config.k - g;
    if (negatives.size() < need)
      throw std::runtime_error("acc_at_k: only " + std::to_string(negatives.size()) + " negatives for an item needing " +
                               std::to_string(need));
    Rng rng(derive_seed(config.seed, i));
    // Partial Fisher-Yates: the first `need` entries become a uniform sample.
    for (std::size_t j = 0; j < need; ++j) {
      const auto pick = j + static_cast<std::size_t>(rng.uniform_index(negatives.size() - j));
      std::swap(negatives[j], negatives[pick]);
    }
    std::vector<std::pair<std::string, bool>> cands;
    for (const auto& t : item.ground_truths) cands.emplace_back(t, true);
    for (std::size_t j = 0; j < need; ++j) cands.emplace_back(*negatives[j], false);
    rng.shuffle(cands.begin(), cands.end());
    std::vector<std::string> texts;
    std::vector<std::uint8_t> flags;
    for (auto& [t, f] : cands) {
      texts.push_back(t);
      flags.push_back(f ? 1 : 0);
    }
    result.per_item[i] = item_accuracy(scorer.score(item, texts), flags);
    chance[i] = static_cast<double>(g) / static_cast<double>(config.k);
  });
  if (!items.empty()) {
    result.accuracy = std::accumulate(result.per_item.begin(), result.per_item.end(), 0.0) /
                      static_cast<double>(items.size());
    result.chance = std::accumulate(chance.begin(), chance.end(), 0.0) / static_cast<double>(items.size());
  }
  return result;
}

AccResult acc_at_k(const model::ModelParams<float>& params, const text::Vocab& vocab, const graph::Corpus& corpus,
                   std::span<const RankItem> items, const model::ModalityMask& mask, const AccConfig& config) {
  const PerplexityScorer scorer(params, vocab, corpus, mask);
  return acc_at_k(scorer, corpus, items, config);
}

}  // namespace vcg::metrics
