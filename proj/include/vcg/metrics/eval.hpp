#pragma once

#include <array>
#include <optional>
#include <span>

#include <json.hpp>

#include "vcg/decode/decode.hpp"
#include "vcg/graph/corpus.hpp"

namespace vcg::metrics {

/// Sentence-level means over every generated candidate (CIDEr over the whole set).
struct OverlapScores {
  double bleu2 = 0.0;
  double bleu4 = 0.0;
  double cider = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;
  std::size_t contexts = 0;
  std::size_t sentences = 0;
};

struct EvalBundle {
  std::array<OverlapScores, 3> relations;  // indexed by Relation
  OverlapScores overall;
  double unique = 0.0;  // over all generated sentences
  double novel = 0.0;   // against the train split
  double div1_s = 0.0;  // mean over candidate sets
  double div2_s = 0.0;
  std::optional<double> acc;
  std::size_t acc_k = 50;

  /// BLEU, ROUGE-L, METEOR and diversity scaled to 0..100, CIDEr 0..10, Acc 0..1.
  nlohmann::ordered_json to_json() const;
};

/// References come from the corpus event each set was generated for.
EvalBundle evaluate_generations(std::span<const decode::GenerationSet> sets, const graph::Corpus& corpus);

}  // namespace vcg::metrics
