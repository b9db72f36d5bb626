#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vcg/ad/tape.hpp"
#include "vcg/ad/tensor.hpp"
#include "vcg/graph/corpus.hpp"
#include "vcg/text/vocab.hpp"

namespace vcg::model {

using ad::Reduction;
using ad::Tape;
using ad::Tensor;

struct ModelConfig {
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_model = 64;
  std::size_t d_ff = 256;
  std::size_t vocab_size = 0;
  std::size_t max_seq_len = 64;
  std::size_t feature_dim = 64;
  std::size_t max_visual = graph::kDefaultMaxVisualFeatures;

  /// Throws std::invalid_argument.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);  // unknown keys rejected
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Which inputs the model sees. Person grounding only applies with the image on.
struct ModalityMask {
  bool use_image = true;
  bool use_event = true;
  bool use_place = true;
  bool use_pg = true;

  static ModalityMask full() { return {}; }
  static ModalityMask text_only() { return {false, true, true, false}; }
  static ModalityMask image_only() { return {true, false, false, true}; }
  bool grounding() const { return use_image && use_pg; }
  std::string name() const;  // e.g. "image+event+place+pg"
  static ModalityMask parse(std::string_view name);
  friend bool operator==(const ModalityMask&, const ModalityMask&) = default;
};

template <class T>
struct LayerParams {
  Tensor<T> ln1_g, ln1_b;
  Tensor<T> w_qkv, b_qkv;  // [d, 3d], [3d]
  Tensor<T> w_o, b_o;      // [d, d], [d]
  Tensor<T> ln2_g, ln2_b;
  Tensor<T> w_ff1, b_ff1;  // [d, d_ff], [d_ff]
  Tensor<T> w_ff2, b_ff2;  // [d_ff, d], [d]
};

/// Output projection is tied to tok_emb.
template <class T>
struct ModelParams {
  ModelConfig config;
  Tensor<T> tok_emb;  // [V, d]
  Tensor<T> pos_emb;  // [S, d]
  Tensor<T> vis_w;    // [D, d]
  Tensor<T> vis_b;    // [d]
  std::vector<LayerParams<T>> layers;
  Tensor<T> lnf_g, lnf_b;

  /// GPT-2 style: N(0, 0.02) weights, residual projections scaled by 1/sqrt(2 L),
  /// zero biases, unit layer-norm gains.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed, bool requires_grad = true);

  std::vector<std::pair<std::string, Tensor<T>*>> named();
  std::vector<std::pair<std::string, const Tensor<T>*>> named() const;
  std::vector<Tensor<T>*> tensors();
  std::size_t parameter_count() const;

  template <class U>
  ModelParams<U> cast(bool requires_grad) const {
    ModelParams<U> out;
    out.config = config;
    auto src = named();
    auto dst = out.allocate_like(config);
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<U>(requires_grad);
    return out;
  }

  /// Creates empty handles for every tensor and returns them by name.
  std::vector<std::pair<std::string, Tensor<T>*>> allocate_like(const ModelConfig& config);
};

extern template struct ModelParams<float>;
extern template struct ModelParams<double>;

enum class Field : std::uint8_t { kVisual, kEvent, kPlace, kRelation, kInference };
enum class LossPart : std::uint8_t { kNone, kEvent, kPlace, kInference };

class AssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One model sequence:
/// [S_IMG] v0 v1..vk [E_IMG] [S_EVENT] e [E_EVENT] [S_PLACE] p [E_PLACE] [REL_r] inference [END]
/// with masked or absent fields dropped together with their delimiters.
struct AssembledInput {
  std::vector<int> tokens;         // -1 at visual feature rows
  std::vector<int> visual_slot;    // feature row index at visual feature rows, else -1
  std::vector<int> grounding;      // feature row added to the word embedding (PG), else -1
  std::vector<Field> fields;
  std::vector<std::vector<float>> features;  // [0] image, [k] person k
  std::vector<int> feature_tags;   // person index per feature row, 0 for the image
  std::size_t prefix_len = 0;      // S_IMG..E_IMG inclusive; 0 without the image
  bool grounded = false;           // person tokens carry PG sums

  std::size_t length() const { return tokens.size(); }
  bool allowed(std::size_t i, std::size_t j) const { return j <= i || (i < prefix_len && j < prefix_len); }
  /// Loss part of the target at position i (the token at i + 1).
  LossPart part(std::size_t i) const;
  /// Next-token targets, -1 where the part is not selected.
  std::vector<int> targets(bool event, bool place, bool inference) const;
  std::size_t count(LossPart p) const;

  /// Appends a text token at the end (used by decoding).
  void push_text(int token, int grounding_row, Field field);
  /// Feature row a person token grounds to, -1 for other tokens or without PG.
  int grounding_row_for(int token) const;
};

/// Row index of a person's feature in AssembledInput::features, -1 when absent.
int person_feature_row(const graph::VisualScene& scene, graph::PersonTag tag);

/// Builds the sequence. `event` may be null; empty event or place text counts
/// as absent. `inference` null leaves the sequence open after REL_r; otherwise
/// the inference tokens and END are appended.
AssembledInput assemble(const ModelConfig& config, const text::Vocab& vocab, const graph::VisualScene& scene,
                        const graph::EventRecord* event, graph::Relation relation,
                        const text::TokenSeq* inference, const ModalityMask& mask);

/// Visual prefix only ([S_IMG] .. [E_IMG]), empty when the mask drops the image.
AssembledInput assemble_prefix(const ModelConfig& config, const graph::VisualScene& scene, const ModalityMask& mask);

/// gelu(feature * W + b) for one feature vector, outside any tape.
std::vector<float> project_visual(const ModelParams<float>& params, std::span<const float> feature);

/// Input embeddings [L, d]: word or projected visual rows, PG sums, positions.
template <class T>
Tensor<T> embed(Tape<T>& tape, const ModelParams<T>& params, const AssembledInput& input);

/// Logits [sum L, V] for the sequences stacked in order.
template <class T>
Tensor<T> forward(Tape<T>& tape, const ModelParams<T>& params, std::span<const AssembledInput> batch);

template <class T>
Tensor<T> forward(Tape<T>& tape, const ModelParams<T>& params, const AssembledInput& input) {
  return forward(tape, params, std::span<const AssembledInput>(&input, 1));
}

enum class Objective { kInference, kEventPlace };
std::string_view objective_name(Objective o);
std::optional<Objective> parse_objective(std::string_view name);

struct PartSelection {
  bool event = false;
  bool place = false;
  bool inference = true;
  static PartSelection for_objective(Objective o) {
    return o == Objective::kInference ? PartSelection{false, false, true} : PartSelection{true, true, true};
  }
};

/// Cross-entropy over the selected parts of every sequence in the batch.
/// kMean divides by the number of selected target tokens in the batch.
template <class T>
Tensor<T> batch_loss(Tape<T>& tape, const ModelParams<T>& params, std::span<const AssembledInput> batch,
                     PartSelection parts, Reduction reduction = Reduction::kMean);

/// Inference tokens + END. Throws AssemblyError when the inference is empty.
template <class T>
Tensor<T> loss_inference(Tape<T>& tape, const ModelParams<T>& params, const AssembledInput& input,
                         Reduction reduction = Reduction::kMean);

/// Event tokens + E_EVENT, place tokens + E_PLACE and inference tokens + END.
template <class T>
Tensor<T> loss_ep(Tape<T>& tape, const ModelParams<T>& params, const AssembledInput& input,
                  Reduction reduction = Reduction::kMean);

/// Weights and vocabulary in one VCGM file; `extra` lands under "run" in the header.
std::string encode_checkpoint(const ModelParams<float>& params, const text::Vocab& vocab,
                              const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());

struct Checkpoint {
  ModelParams<float> params;
  text::Vocab vocab;
  nlohmann::ordered_json run;
};

Checkpoint decode_checkpoint(std::string_view bytes, bool requires_grad = false);

}  // namespace vcg::model
