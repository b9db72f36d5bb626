#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vcg/graph/corpus.hpp"
#include "vcg/model/model.hpp"

namespace vcg::metrics {

/// One retrieval query: an (event, relation) context and its ground truths.
struct RankItem {
  std::size_t event_index = 0;  // into corpus.events()
  graph::Relation relation = graph::Relation::kBefore;
  std::vector<std::string> ground_truths;
};

/// Every (event, relation) of the split with at least one ground truth.
std::vector<RankItem> rank_items(const graph::Corpus& corpus, graph::Split split);

/// Lower score ranks first (perplexity).
class CandidateScorer {
 public:
  virtual ~CandidateScorer() = default;
  virtual std::vector<double> score(const RankItem& item, std::span<const std::string> candidates) const = 0;
};

class PerplexityScorer final : public CandidateScorer {
 public:
  PerplexityScorer(const model::ModelParams<float>& params, const text::Vocab& vocab, const graph::Corpus& corpus,
                   model::ModalityMask mask)
      : params_(params), vocab_(vocab), corpus_(corpus), mask_(mask) {}
  std::vector<double> score(const RankItem& item, std::span<const std::string> candidates) const override;

 private:
  const model::ModelParams<float>& params_;
  const text::Vocab& vocab_;
  const graph::Corpus& corpus_;
  model::ModalityMask mask_;
};

struct AccConfig {
  std::size_t k = 50;
  std::uint64_t seed = 0;
  /// Negatives come from other scenes' inferences of the same relation (true)
  /// or of any relation (false). Texts equal to a ground truth are never negatives.
  bool same_relation = true;
};

struct AccResult {
  double accuracy = 0.0;           // mean over items
  double chance = 0.0;             // mean of g / k
  std::vector<double> per_item;
};

/// Fraction of ground truths ranked within the top g of the candidate list,
/// where candidates sort by ascending score and then by position.
double item_accuracy(std::span<const double> scores, std::span<const std::uint8_t> is_ground_truth);

/// Candidates per item: g ground truths plus k - g sampled negatives, shuffled
/// with Rng(derive_seed(seed, item index)). Throws std::runtime_error when an
/// item cannot be filled.
AccResult acc_at_k(const CandidateScorer& scorer, const graph::Corpus& corpus, std::span<const RankItem> items,
                   const AccConfig& config);

AccResult acc_at_k(const model::ModelParams<float>& params, const text::Vocab& vocab, const graph::Corpus& corpus,
                   std::span<const RankItem> items, const model::ModalityMask& mask, const AccConfig& config);

}  // namespace vcg::metrics
