#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcg/graph/corpus.hpp"
#include "vcg/model/model.hpp"
#include "vcg/model/session.hpp"

namespace vcg::decode {

/// What a decoder needs from a model: next-token logits, append, fork.
class DecodeState {
 public:
  virtual ~DecodeState() = default;
  virtual std::vector<float> logits() const = 0;
  virtual void advance(int token) = 0;
  virtual std::unique_ptr<DecodeState> clone() const = 0;
  /// False once no further token fits.
  virtual bool can_advance() const { return true; }
};

class SessionState final : public DecodeState {
 public:
  explicit SessionState(model::Session session) : session_(std::move(session)) {}
  std::vector<float> logits() const override;
  void advance(int token) override { session_.advance(token); }
  std::unique_ptr<DecodeState> clone() const override { return std::make_unique<SessionState>(*this); }
  bool can_advance() const override;

 private:
  model::Session session_;
};

struct Candidate {
  text::TokenSeq tokens;                // generated ids, END included when finished
  std::vector<double> token_logprobs;   // unfiltered log-probabilities, one per token
  double total_logprob = 0.0;
  bool finished = false;

  double normalized() const {
    return tokens.empty() ? 0.0 : total_logprob / static_cast<double>(tokens.size());
  }
};

/// Smallest prefix (descending probability, ties by lower id) with mass >= p,
/// renormalized; every other entry is zero. Throws std::invalid_argument on
/// p outside (0, 1], an all-zero or unnormalized distribution.
std::vector<double> nucleus_filter(std::span<const double> probs, double p);

std::vector<double> softmax(std::span<const float> logits);

/// n independent rollouts; candidate i draws from Rng(derive_seed(seed, i)).
std::vector<Candidate> sample_candidates(const DecodeState& start, double p, std::size_t n,
                                         std::size_t max_new_tokens, std::uint64_t seed, int end_id);

/// Length-normalized beam search (total logprob / tokens), ties by token ids.
/// Returns the best n beams, finished ones first. Throws when n > beam_size.
std::vector<Candidate> beam_search(const DecodeState& start, std::size_t beam_size, std::size_t n,
                                   std::size_t max_new_tokens, int end_id);

Candidate greedy(const DecodeState& start, std::size_t max_new_tokens, int end_id);

enum class Method { kNucleus, kBeam, kGreedy };
std::string_view method_name(Method m);
std::optional<Method> parse_method(std::string_view name);

struct DecodeConfig {
  Method method = Method::kNucleus;
  double p = 0.9;
  std::size_t beam_size = 5;
  std::size_t n = 5;
  std::size_t max_new_tokens = 16;
  std::uint64_t seed = 0;
  model::ModalityMask mask;
  /// Writes event and place from the image first, then decodes with them as text.
  bool generate_event_place = false;

  void validate() const;
};

struct GenerationSet {
  std::string scene_id;
  std::size_t event_index = 0;  // position among the scene's events
  graph::Relation relation = graph::Relation::kBefore;
  std::string mask;
  std::string method;
  std::vector<Candidate> candidates;
  std::vector<std::string> texts;  // decoded candidate surfaces
};

/// Decodes one (event, relation) context of the corpus.
GenerationSet generate(const model::ModelParams<float>& params, const text::Vocab& vocab,
                       const graph::Corpus& corpus, std::size_t corpus_event_index, graph::Relation relation,
                       const DecodeConfig& config);

/// Every (event, relation) context of the split, fanned out over threads.
std::vector<GenerationSet> generate_split(const model::ModelParams<float>& params, const text::Vocab& vocab,
                                          const graph::Corpus& corpus, std::optional<graph::Split> split,
                                          const DecodeConfig& config, std::size_t limit = 0);

/// Index of a corpus event among the events of its scene.
std::size_t event_index_in_scene(const graph::Corpus& corpus, std::size_t corpus_event_index);
/// Inverse of event_index_in_scene; throws std::out_of_range.
std::size_t corpus_event_index(const graph::Corpus& corpus, std::string_view scene_id, std::size_t event_index);

nlohmann::ordered_json to_json(const GenerationSet& set);
GenerationSet generation_from_json(const nlohmann::json& j);
std::string dump_generations(std::span<const GenerationSet> sets);
std::vector<GenerationSet> parse_generations(std::string_view jsonl);

}  // namespace vcg::decode
