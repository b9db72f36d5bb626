#include "vcg/model/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vcg/simd/kernels.hpp"
#include "vcg/util/rng.hpp"
#include "vcg/util/tensor_file.hpp"

namespace vcg::model {

using ad::Shape;
using ad::shape_numel;
using graph::Relation;
using text::id_of;
using text::Special;

// --- config -------------------------------------------------------------------

void ModelConfig::validate() const {
  auto bad = [](const std::string& what) { throw std::invalid_argument("model config: " + what); };
  if (n_layers == 0) bad("n_layers must be positive");
  if (n_heads == 0 || d_model == 0 || d_model % n_heads != 0) bad("d_model must be a positive multiple of n_heads");
  if (d_ff == 0) bad("d_ff must be positive");
  if (vocab_size <= static_cast<std::size_t>(text::kFirstWordId)) bad("vocab_size too small");
  if (max_seq_len == 0) bad("max_seq_len must be positive");
  if (feature_dim == 0) bad("feature_dim must be positive");
  if (max_visual == 0 || max_visual > graph::kDefaultMaxVisualFeatures) bad("max_visual must be in 1..15");
}

nlohmann::ordered_json ModelConfig::to_json() const {
  return {{"n_layers", n_layers},   {"n_heads", n_heads},         {"d_model", d_model},
          {"d_ff", d_ff},           {"vocab_size", vocab_size},   {"max_seq_len", max_seq_len},
          {"feature_dim", feature_dim}, {"max_visual", max_visual}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    std::size_t* slot = nullptr;
    if (key == "n_layers") slot = &c.n_layers;
    else if (key == "n_heads") slot = &c.n_heads;
    else if (key == "d_model") slot = &c.d_model;
    else if (key == "d_ff") slot = &c.d_ff;
    else if (key == "vocab_size") slot = &c.vocab_size;
    else if (key == "max_seq_len") slot = &c.max_seq_len;
    else if (key == "feature_dim") slot = &c.feature_dim;
    else if (key == "max_visual") slot = &c.max_visual;
    else throw std::invalid_argument("model config: unknown key '" + key + "'");
    if (!value.is_number_unsigned()) throw std::invalid_argument("model config: '" + key + "' must be a non-negative integer");
    *slot = value.get<std::size_t>();
  }
  return c;
}

std::string ModalityMask::name() const {
  std::string out;
  auto add = [&](const char* part) {
    if (!out.empty()) out += '+';
    out += part;
  };
  if (use_image) add("image");
  if (use_event) add("event");
  if (use_place) add("place");
  if (grounding()) add("pg");
  return out.empty() ? "none" : out;
}

ModalityMask ModalityMask::parse(std::string_view name) {
  ModalityMask m{false, false, false, false};
  if (name == "none") return m;
  std::size_t pos = 0;
  while (pos <= name.size()) {
    const auto end = std::min(name.find('+', pos), name.size());
    const auto part = name.substr(pos, end - pos);
    if (part == "image") m.use_image = true;
    else if (part == "event") m.use_event = true;
    else if (part == "place") m.use_place = true;
    else if (part == "pg") m.use_pg = true;
    else throw std::invalid_argument("unknown modality '" + std::string(part) + "' in mask '" + std::string(name) + "'");
    pos = end + 1;
  }
  if (m.use_pg && !m.use_image) throw std::invalid_argument("mask '" + std::string(name) + "': pg requires image");
  return m;
}

// --- parameters -----------------------------------------------------------------

template <class T>
std::vector<std::pair<std::string, Tensor<T>*>> ModelParams<T>::named() {
  std::vector<std::pair<std::string, Tensor<T>*>> out{
      {"tok_emb", &tok_emb}, {"pos_emb", &pos_emb}, {"visual.w", &vis_w}, {"visual.b", &vis_b}};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const auto p = "layers." + std::to_string(i) + ".";
    for (auto [name, t] : {std::pair{"ln1.g", &l.ln1_g}, std::pair{"ln1.b", &l.ln1_b},
                           std::pair{"attn.qkv.w", &l.w_qkv}, std::pair{"attn.qkv.b", &l.b_qkv},
                           std::pair{"attn.out.w", &l.w_o}, std::pair{"attn.out.b", &l.b_o},
                           std::pair{"ln2.g", &l.ln2_g}, std::pair{"ln2.b", &l.ln2_b},
                           std::pair{"ff1.w", &l.w_ff1}, std::pair{"ff1.b", &l.b_ff1},
                           std::pair{"ff2.w", &l.w_ff2}, std::pair{"ff2.b", &l.b_ff2}})
      out.emplace_back(p + name, t);
  }
  out.emplace_back("ln_f.g", &lnf_g);
  out.emplace_back("ln_f.b", &lnf_b);
  return out;
}

template <class T>
std::vector<std::pair<std::string, const Tensor<T>*>> ModelParams<T>::named() const {
  auto self = const_cast<ModelParams<T>*>(this)->named();
  return {self.begin(), self.end()};
}

template <class T>
std::vector<Tensor<T>*> ModelParams<T>::tensors() {
  std::vector<Tensor<T>*> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

template <class T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named()) n += t->size();
  return n;
}

template <class T>
std::vector<std::pair<std::string, Tensor<T>*>> ModelParams<T>::allocate_like(const ModelConfig& c) {
  config = c;
  layers.assign(c.n_layers, {});
  return named();
}

template <class T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& c, std::uint64_t seed, bool requires_grad) {
  c.validate();
  ModelParams<T> p;
  p.allocate_like(c);
  Rng rng(seed, 0x5EED);
  const std::size_t d = c.d_model;
  auto normal = [&](Shape shape, double sd) {
    std::vector<T> v(shape_numel(shape));
    for (auto& x : v) x = static_cast<T>(sd * rng.normal());
    return Tensor<T>::leaf(std::move(shape), std::move(v), requires_grad);
  };
  auto fill = [&](Shape shape, T value) {
    std::vector<T> v(shape_numel(shape), value);
    return Tensor<T>::leaf(std::move(shape), std::move(v), requires_grad);
  };
  const double sd = 0.02;
  const double sd_res = sd / std::sqrt(2.0 * static_cast<double>(c.n_layers));
  p.tok_emb = normal({c.vocab_size, d}, sd);
  p.pos_emb = normal({c.max_seq_len, d}, sd);
  p.vis_w = normal({c.feature_dim, d}, sd);
  p.vis_b = fill({d}, T(0));
  for (auto& l : p.layers) {
    l.ln1_g = fill({d}, T(1));
    l.ln1_b = fill({d}, T(0));
    l.w_qkv = normal({d, 3 * d}, sd);
    l.b_qkv = fill({3 * d}, T(0));
    l.w_o = normal({d, d}, sd_res);
    l.b_o = fill({d}, T(0));
    l.ln2_g = fill({d}, T(1));
    l.ln2_b = fill({d}, T(0));
    l.w_ff1 = normal({d, c.d_ff}, sd);
    l.b_ff1 = fill({c.d_ff}, T(0));
    l.w_ff2 = normal({c.d_ff, d}, sd_res);
    l.b_ff2 = fill({d}, T(0));
  }
  p.lnf_g = fill({d}, T(1));
  p.lnf_b = fill({d}, T(0));
  return p;
}

template struct ModelParams<float>;
template struct ModelParams<double>;

// --- assembly ---------------------------------------------------------------------

LossPart AssembledInput::part(std::size_t i) const {
  if (i + 1 >= tokens.size()) return LossPart::kNone;
  const auto next = tokens[i + 1];
  switch (fields[i + 1]) {
    case Field::kEvent: return next == id_of(Special::kStartEvent) ? LossPart::kNone : LossPart::kEvent;
    case Field::kPlace: return next == id_of(Special::kStartPlace) ? LossPart::kNone : LossPart::kPlace;
    case Field::kInference: return LossPart::kInference;
    default: return LossPart::kNone;
  }
}

std::vector<int> AssembledInput::targets(bool event, bool place, bool inference) const {
  std::vector<int> out(tokens.size(), -1);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    const auto p = part(i);
    if ((p == LossPart::kEvent && event) || (p == LossPart::kPlace && place) ||
        (p == LossPart::kInference && inference))
      out[i] = tokens[i + 1];
  }
  return out;
}

std::size_t AssembledInput::count(LossPart p) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) n += part(i) == p;
  return n;
}

void AssembledInput::push_text(int token, int grounding_row, Field field) {
  tokens.push_back(token);
  visual_slot.push_back(-1);
  grounding.push_back(grounding_row);
  fields.push_back(field);
}

int AssembledInput::grounding_row_for(int token) const {
  if (!grounded || token < text::kFirstPersonId || token >= text::kFirstWordId) return -1;
  const int tag = token - text::kFirstPersonId + 1;
  for (std::size_t r = 1; r < feature_tags.size(); ++r)
    if (feature_tags[r] == tag) return static_cast<int>(r);
  return -1;
}

int person_feature_row(const graph::VisualScene& scene, graph::PersonTag tag) {
  for (std::size_t i = 0; i < scene.persons.size(); ++i)
    if (scene.persons[i].tag == tag) return static_cast<int>(i + 1);
  return -1;
}

AssembledInput assemble_prefix(const ModelConfig& config, const graph::VisualScene& scene, const ModalityMask& mask) {
  AssembledInput in;
  in.grounded = mask.grounding();
  if (!mask.use_image) return in;
  if (scene.visual_count() > config.max_visual)
    throw AssemblyError("scene " + scene.scene_id + " has " + std::to_string(scene.visual_count()) +
                        " visual features, limit " + std::to_string(config.max_visual));
  in.features.push_back(scene.image_feature);
  in.feature_tags.push_back(0);
  for (const auto& p : scene.persons) {
    in.features.push_back(p.feature);
    in.feature_tags.push_back(p.tag.index);
  }
  for (const auto& f : in.features)
    if (f.size() != config.feature_dim)
      throw AssemblyError("scene " + scene.scene_id + " feature has dimension " + std::to_string(f.size()) +
                          ", model expects " + std::to_string(config.feature_dim));
  in.push_text(id_of(Special::kStartImage), -1, Field::kVisual);
  for (std::size_t k = 0; k < in.features.size(); ++k) {
    in.tokens.push_back(-1);
    in.visual_slot.push_back(static_cast<int>(k));
    in.grounding.push_back(-1);
    in.fields.push_back(Field::kVisual);
  }
  in.push_text(id_of(Special::kEndImage), -1, Field::kVisual);
  in.prefix_len = in.tokens.size();
  return in;
}

AssembledInput assemble(const ModelConfig& config, const text::Vocab& vocab, const graph::VisualScene& scene,
                        const graph::EventRecord* event, Relation relation, const text::TokenSeq* inference,
                        const ModalityMask& mask) {
  AssembledInput in = assemble_prefix(config, scene, mask);
  const bool pg = mask.grounding();
  auto push_ids = [&](const text::TokenSeq& ids, Field field) {
    for (auto id : ids) {
      int row = -1;
      if (pg && vocab.is_person(id)) {
        row = person_feature_row(scene, vocab.person_of(id));
        if (row < 0)
          throw AssemblyError("scene " + scene.scene_id + " has no feature for " +
                              graph::person_token(vocab.person_of(id)));
      }
      in.push_text(id, row, field);
    }
  };
  auto push_field = [&](std::string_view text, Special open, Special close, Field field) {
    const auto ids = text::encode(vocab, text);
    if (ids.empty()) return;
    in.push_text(id_of(open), -1, field);
    push_ids(ids, field);
    in.push_text(id_of(close), -1, field);
  };
  if (event && mask.use_event) push_field(event->event_text, Special::kStartEvent, Special::kEndEvent, Field::kEvent);
  if (event && mask.use_place) push_field(event->place_text, Special::kStartPlace, Special::kEndPlace, Field::kPlace);
  in.push_text(text::relation_token(relation), -1, Field::kRelation);
  if (inference) {
    push_ids(*inference, Field::kInference);
    in.push_text(id_of(Special::kEnd), -1, Field::kInference);
  }
  if (in.length() > config.max_seq_len)
    throw AssemblyError("sequence of length " + std::to_string(in.length()) + " exceeds max_seq_len " +
                        std::to_string(config.max_seq_len));
  return in;
}

std::vector<float> project_visual(const ModelParams<float>& params, std::span<const float> feature) {
  const auto& c = params.config;
  if (feature.size() != c.feature_dim)
    throw std::invalid_argument("project_visual: feature has dimension " + std::to_string(feature.size()) +
                                ", expected " + std::to_string(c.feature_dim));
  std::vector<float> out(params.vis_b.data().begin(), params.vis_b.data().end());
  simd::gemm_nn(1, c.d_model, c.feature_dim, feature.data(), params.vis_w.data().data(), out.data());
  constexpr float k = 0.7978845608028654f, a = 0.044715f;
  for (auto& v : out) v = 0.5f * v * (1.0f + std::tanh(k * (v + a * v * v * v)));
  return out;
}

// --- tape forward -----------------------------------------------------------------

template <class T>
Tensor<T> embed(Tape<T>& tape, const ModelParams<T>& params, const AssembledInput& in) {
  const auto L = in.length();
  const auto& c = params.config;
  if (L == 0) throw AssemblyError("empty sequence");
  if (L > c.max_seq_len) throw AssemblyError("sequence exceeds max_seq_len");

  std::vector<int> word_ids(L), pos_ids(L), vis_rows(L, -1);
  for (std::size_t i = 0; i < L; ++i) {
    word_ids[i] = in.tokens[i];  // -1 gives a zero row at visual feature positions
    pos_ids[i] = static_cast<int>(i);
  }
  Tensor<T> x = tape.add(tape.gather_rows(params.tok_emb, word_ids), tape.gather_rows(params.pos_emb, pos_ids));
  if (!in.features.empty()) {
    std::vector<T> feats;
    for (const auto& f : in.features) feats.insert(feats.end(), f.begin(), f.end());
    auto fmat = Tensor<T>::leaf({in.features.size(), c.feature_dim}, std::move(feats));
    auto proj = tape.gelu(tape.add_bias(tape.matmul(fmat, params.vis_w), params.vis_b));
    bool any = false;
    for (std::size_t i = 0; i < L; ++i) {
      const int row = in.visual_slot[i] >= 0 ? in.visual_slot[i] : in.grounding[i];
      vis_rows[i] = row;
      any = any || row >= 0;
    }
    if (any) x = tape.add(x, tape.gather_rows(proj, vis_rows));
  }
  return x;
}

template <class T>
Tensor<T> forward(Tape<T>& tape, const ModelParams<T>& params, std::span<const AssembledInput> batch) {
  const auto& c = params.config;
  const std::size_t d = c.d_model, H = c.n_heads, dh = d / H;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const T neg = T(-1e9);

  std::vector<Tensor<T>> parts;
  std::vector<std::size_t> offsets{0};
  std::vector<std::vector<std::uint8_t>> masks;
  for (const auto& in : batch) {
    parts.push_back(embed(tape, params, in));
    offsets.push_back(offsets.back() + in.length());
    const auto L = in.length();
    std::vector<std::uint8_t> m(L * L);
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j < L; ++j) m[i * L + j] = in.allowed(i, j) ? 0 : 1;
    masks.push_back(std::move(m));
  }
  Tensor<T> x = parts.size() == 1 ? parts[0] : tape.concat_rows(parts);

  for (const auto& l : params.layers) {
    auto h = tape.layer_norm(x, l.ln1_g, l.ln1_b);
    auto qkv = tape.add_bias(tape.matmul(h, l.w_qkv), l.b_qkv);
    std::vector<Tensor<T>> seq_out;
    for (std::size_t s = 0; s < batch.size(); ++s) {
      auto blk = batch.size() == 1 ? qkv : tape.slice_rows(qkv, offsets[s], offsets[s + 1]);
      std::vector<Tensor<T>> heads;
      for (std::size_t hd = 0; hd < H; ++hd) {
        auto q = tape.slice_cols(blk, hd * dh, (hd + 1) * dh);
        auto k = tape.slice_cols(blk, d + hd * dh, d + (hd + 1) * dh);
        auto v = tape.slice_cols(blk, 2 * d + hd * dh, 2 * d + (hd + 1) * dh);
        auto att = tape.softmax_lastdim(tape.masked_fill(tape.scale(tape.matmul_nt(q, k), scale), masks[s], neg));
        heads.push_back(tape.matmul(att, v));
      }
      seq_out.push_back(heads.size() == 1 ? heads[0] : tape.concat_cols(heads));
    }
    auto a = seq_out.size() == 1 ? seq_out[0] : tape.concat_rows(seq_out);
    x = tape.add(x, tape.add_bias(tape.matmul(a, l.w_o), l.b_o));
    auto h2 = tape.layer_norm(x, l.ln2_g, l.ln2_b);
    auto f = tape.gelu(tape.add_bias(tape.matmul(h2, l.w_ff1), l.b_ff1));
    x = tape.add(x, tape.add_bias(tape.matmul(f, l.w_ff2), l.b_ff2));
  }
  auto hf = tape.layer_norm(x, params.lnf_g, params.lnf_b);
  return tape.matmul_nt(hf, params.tok_emb);
}

template <class T>
Tensor<T> batch_loss(Tape<T>& tape, const ModelParams<T>& params, std::span<const AssembledInput> batch,
                     PartSelection parts, Reduction reduction) {
  std::vector<int> targets;
  for (const auto& in : batch) {
    auto t = in.targets(parts.event, parts.place, parts.inference);
    targets.insert(targets.end(), t.begin(), t.end());
  }
  return tape.cross_entropy(forward(tape, params, batch), targets, -1, reduction);
}

template <class T>
Tensor<T> loss_inference(Tape<T>& tape, const ModelParams<T>& params, const AssembledInput& input,
                         Reduction reduction) {
  if (input.count(LossPart::kInference) < 2) throw AssemblyError("loss_inference: empty inference");
  return batch_loss(tape, params, std::span<const AssembledInput>(&input, 1), {false, false, true}, reduction);
}

template <class T>
Tensor<T> loss_ep(Tape<T>& tape, const ModelParams<T>& params, const AssembledInput& input, Reduction reduction) {
  if (input.count(LossPart::kInference) < 2) throw AssemblyError("loss_ep: empty inference");
  return batch_loss(tape, params, std::span<const AssembledInput>(&input, 1), {true, true, true}, reduction);
}

#define VCG_INSTANTIATE(T)                                                                                    \
  template Tensor<T> embed<T>(Tape<T>&, const ModelParams<T>&, const AssembledInput&);                      \
  template Tensor<T> forward<T>(Tape<T>&, const ModelParams<T>&, std::span<const AssembledInput>);          \
  template Tensor<T> batch_loss<T>(Tape<T>&, const ModelParams<T>&, std::span<const AssembledInput>,        \
                                   PartSelection, Reduction);                                               \
  template Tensor<T> loss_inference<T>(Tape<T>&, const ModelParams<T>&, const AssembledInput&, Reduction); \
  template Tensor<T> loss_ep<T>(Tape<T>&, const ModelParams<T>&, const AssembledInput&, Reduction);
VCG_INSTANTIATE(float)
VCG_INSTANTIATE(double)
#undef VCG_INSTANTIATE

std::string_view objective_name(Objective o) { return o == Objective::kInference ? "eq1" : "eq2"; }

std::optional<Objective> parse_objective(std::string_view name) {
  if (name == "eq1" || name == "inference") return Objective::kInference;
  if (name == "eq2" || name == "ep") return Objective::kEventPlace;
  return std::nullopt;
}

// --- checkpoints ---------------------------------------------------------------

std::string encode_checkpoint(const ModelParams<float>& params, const text::Vocab& vocab,
                              const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json header;
  header["model"] = params.config.to_json();
  header["vocab"] = nlohmann::ordered_json::parse(vocab.to_json());
  header["run"] = extra;
  TensorFile file;
  file.config_json = header.dump();
  for (const auto& [name, t] : params.named()) {
    TensorRecord rec;
    rec.name = name;
    for (auto dim : t->shape()) rec.dims.push_back(static_cast<std::uint32_t>(dim));
    rec.data.assign(t->data().begin(), t->data().end());
    file.records.push_back(std::move(rec));
  }
  return encode_tensor_file(file);
}

Checkpoint decode_checkpoint(std::string_view bytes, bool requires_grad) {
  const auto file = decode_tensor_file(bytes);
  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(file.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw TensorFileError(std::string("checkpoint header: ") + e.what());
  }
  if (!header.contains("model") || !header.contains("vocab"))
    throw TensorFileError("checkpoint header lacks model or vocab");
  Checkpoint ck;
  ck.vocab = text::Vocab::from_json(header["vocab"].dump());
  const auto config = ModelConfig::from_json(header["model"]);
  config.validate();
  if (config.vocab_size != ck.vocab.size()) throw TensorFileError("checkpoint vocab size does not match model config");
  ck.run = header.value("run", nlohmann::ordered_json::object());
  auto slots = ck.params.allocate_like(config);
  if (file.records.size() != slots.size())
    throw TensorFileError("checkpoint has " + std::to_string(file.records.size()) + " tensors, expected " +
                          std::to_string(slots.size()));
  auto reference = ModelParams<float>::init(config, 0, false);
  auto ref_named = reference.named();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto* rec = file.find(slots[i].first);
    if (!rec) throw TensorFileError("checkpoint lacks tensor " + slots[i].first);
    ad::Shape shape(rec->dims.begin(), rec->dims.end());
    if (shape != ref_named[i].second->shape())
      throw TensorFileError("tensor " + slots[i].first + " has shape " + ad::shape_str(shape) + ", expected " +
                            ad::shape_str(ref_named[i].second->shape()));
    *slots[i].second = Tensor<float>::leaf(std::move(shape), rec->data, requires_grad);
  }
  return ck;
}

}  // namespace vcg::model
