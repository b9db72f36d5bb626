#pragma once

#include <span>
#include <vector>

#include "vcg/model/model.hpp"

namespace vcg::model {

/// Incremental inference outside the tape with per-layer key/value caches.
/// Copying a session forks it; the params must outlive every copy.
class Session {
 public:
  /// Runs the whole context (the visual prefix attends bidirectionally).
  Session(const ModelParams<float>& params, const AssembledInput& context);

  /// Next-token logits after the last position.
  std::span<const float> logits() const { return logits_; }
  /// Appends a text token; person tokens pick up PG when the context was grounded.
  void advance(int token);
  std::size_t length() const { return len_; }
  std::size_t capacity() const { return params_->config.max_seq_len; }

 private:
  void run(std::span<const float> rows, std::size_t n);

  const ModelParams<float>* params_;
  std::vector<std::vector<float>> keys_, values_;  // per layer, [len, d]
  std::vector<std::vector<float>> person_proj_;   // projected features by feature row
  AssembledInput context_;
  std::size_t prefix_len_ = 0;
  std::size_t len_ = 0;
  std::vector<float> logits_;
};

/// log softmax of `logits`, in double.
std::vector<double> log_softmax(std::span<const float> logits);

/// Mean NLL of candidate + END given the context; the sum and count are also returned.
struct SequenceScore {
  double total_logprob = 0.0;
  std::size_t tokens = 0;
  double mean_nll() const { return tokens == 0 ? 0.0 : -total_logprob / static_cast<double>(tokens); }
  double perplexity() const;
};

SequenceScore score_candidate(const Session& context, const text::TokenSeq& candidate);

/// exp(mean per-token NLL of the candidate followed by END). Throws on an empty candidate.
double perplexity(const ModelParams<float>& params, const AssembledInput& context, const text::TokenSeq& candidate);

/// One context pass shared by all candidates.
std::vector<double> perplexities(const ModelParams<float>& params, const AssembledInput& context,
                                 std::span<const text::TokenSeq> candidates);

/// Generation mode for models trained with the event/place loss: greedily
/// writes an event and a place from the image alone.
graph::EventRecord infer_event_place(const ModelParams<float>& params, const text::Vocab& vocab,
                                     const graph::VisualScene& scene, const ModalityMask& mask,
                                     std::size_t max_tokens = 16);

}  // namespace vcg::model
