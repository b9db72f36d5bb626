#include "vcg/model/session.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vcg/simd/kernels.hpp"

namespace vcg::model {

using text::id_of;
using text::Special;

namespace {

void layer_norm_row(const float* x, const float* g, const float* b, float* out, std::size_t n) {
  float mean = 0;
  for (std::size_t j = 0; j < n; ++j) mean += x[j];
  mean /= static_cast<float>(n);
  float var = 0;
  for (std::size_t j = 0; j < n; ++j) var += (x[j] - mean) * (x[j] - mean);
  var /= static_cast<float>(n);
  const float rstd = 1.0f / std::sqrt(var + 1e-5f);
  for (std::size_t j = 0; j < n; ++j) out[j] = g[j] * (x[j] - mean) * rstd + b[j];
}

void gelu_inplace(std::vector<float>& v) {
  constexpr float k = 0.7978845608028654f, a = 0.044715f;
  for (auto& x : v) x = 0.5f * x * (1.0f + std::tanh(k * (x + a * x * x * x)));
}

void add_bias_rows(std::vector<float>& m, std::span<const float> bias, std::size_t rows) {
  const auto n = bias.size();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i * n + j] += bias[j];
}

}  // namespace

Session::Session(const ModelParams<float>& params, const AssembledInput& context)
    : params_(&params), keys_(params.config.n_layers), values_(params.config.n_layers), context_(context) {
  const auto& c = params.config;
  if (context.length() == 0) throw AssemblyError("empty context");
  if (context.length() > c.max_seq_len) throw AssemblyError("context exceeds max_seq_len");
  for (const auto& f : context.features) person_proj_.push_back(project_visual(params, f));
  prefix_len_ = context.prefix_len;

  const std::size_t d = c.d_model, n = context.length();
  std::vector<float> rows(n * d, 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    float* r = rows.data() + i * d;
    const auto pos = params.pos_emb.data().subspan(i * d, d);
    for (std::size_t j = 0; j < d; ++j) r[j] = pos[j];
    if (context.tokens[i] >= 0) {
      const auto w = params.tok_emb.data().subspan(static_cast<std::size_t>(context.tokens[i]) * d, d);
      for (std::size_t j = 0; j < d; ++j) r[j] += w[j];
    }
    const int vrow = context.visual_slot[i] >= 0 ? context.visual_slot[i] : context.grounding[i];
    if (vrow >= 0)
      for (std::size_t j = 0; j < d; ++j) r[j] += person_proj_[static_cast<std::size_t>(vrow)][j];
  }
  run(rows, n);
}

void Session::advance(int token) {
  const auto& c = params_->config;
  if (len_ >= c.max_seq_len) throw AssemblyError("decoding ran past max_seq_len");
  if (token < 0 || static_cast<std::size_t>(token) >= c.vocab_size)
    throw std::out_of_range("token id out of range: " + std::to_string(token));
  const std::size_t d = c.d_model;
  std::vector<float> row(d);
  const auto pos = params_->pos_emb.data().subspan(len_ * d, d);
  const auto w = params_->tok_emb.data().subspan(static_cast<std::size_t>(token) * d, d);
  for (std::size_t j = 0; j < d; ++j) row[j] = pos[j] + w[j];
  const int g = context_.grounding_row_for(token);
  if (g >= 0)
    for (std::size_t j = 0; j < d; ++j) row[j] += person_proj_[static_cast<std::size_t>(g)][j];
  run(row, 1);
}

void Session::run(std::span<const float> input, std::size_t n) {
  const auto& p = *params_;
  const auto& c = p.config;
  const std::size_t d = c.d_model, H = c.n_heads, dh = d / H, ff = c.d_ff;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  const std::size_t start = len_;
  std::vector<float> x(input.begin(), input.end());
  std::vector<float> h(n * d), qkv(n * 3 * d), att(n * d), proj(n * d), f(n * ff), out(n * d);
  std::vector<float> scores;

  for (std::size_t li = 0; li < c.n_layers; ++li) {
    const auto& l = p.layers[li];
    for (std::size_t i = 0; i < n; ++i)
      layer_norm_row(x.data() + i * d, l.ln1_g.data().data(), l.ln1_b.data().data(), h.data() + i * d, d);
    std::fill(qkv.begin(), qkv.end(), 0.0f);
    simd::gemm_nn(n, 3 * d, d, h.data(), l.w_qkv.data().data(), qkv.data());
    add_bias_rows(qkv, l.b_qkv.data(), n);

    auto& K = keys_[li];
    auto& V = values_[li];
    for (std::size_t i = 0; i < n; ++i) {
      K.insert(K.end(), qkv.begin() + static_cast<std::ptrdiff_t>(i * 3 * d + d),
               qkv.begin() + static_cast<std::ptrdiff_t>(i * 3 * d + 2 * d));
      V.insert(V.end(), qkv.begin() + static_cast<std::ptrdiff_t>(i * 3 * d + 2 * d),
               qkv.begin() + static_cast<std::ptrdiff_t>(i * 3 * d + 3 * d));
    }
    const std::size_t total = start + n;
    std::fill(att.begin(), att.end(), 0.0f);
    scores.resize(total);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t abs_i = start + i;
      const std::size_t visible = abs_i < prefix_len_ ? std::max(prefix_len_, abs_i + 1) : abs_i + 1;
      for (std::size_t hd = 0; hd < H; ++hd) {
        const float* q = qkv.data() + i * 3 * d + hd * dh;
        float mx = -std::numeric_limits<float>::infinity();
        for (std::size_t j = 0; j < visible; ++j) {
          scores[j] = simd::dot(q, K.data() + j * d + hd * dh, dh) * scale;
          mx = std::max(mx, scores[j]);
        }
        float sum = 0;
        for (std::size_t j = 0; j < visible; ++j) {
          scores[j] = std::exp(scores[j] - mx);
          sum += scores[j];
        }
        float* o = att.data() + i * d + hd * dh;
        for (std::size_t j = 0; j < visible; ++j) simd::axpy(scores[j] / sum, V.data() + j * d + hd * dh, o, dh);
      }
    }
    std::fill(proj.begin(), proj.end(), 0.0f);
    simd::gemm_nn(n, d, d, att.data(), l.w_o.data().data(), proj.data());
    add_bias_rows(proj, l.b_o.data(), n);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += proj[k];

    for (std::size_t i = 0; i < n; ++i)
      layer_norm_row(x.data() + i * d, l.ln2_g.data().data(), l.ln2_b.data().data(), h.data() + i * d, d);
    std::fill(f.begin(), f.end(), 0.0f);
    simd::gemm_nn(n, ff, d, h.data(), l.w_ff1.data().data(), f.data());
    add_bias_rows(f, l.b_ff1.data(), n);
    gelu_inplace(f);
    std::fill(out.begin(), out.end(), 0.0f);
    simd::gemm_nn(n, d, ff, f.data(), l.w_ff2.data().data(), out.data());
    add_bias_rows(out, l.b_ff2.data(), n);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += out[k];
  }
  len_ = start + n;

  std::vector<float> last(d);
  layer_norm_row(x.data() + (n - 1) * d, p.lnf_g.data().data(), p.lnf_b.data().data(), last.data(), d);
  logits_.assign(c.vocab_size, 0.0f);
  simd::gemm_nt(1, c.vocab_size, d, last.data(), p.tok_emb.data().data(), logits_.data());
}

std::vector<double> log_softmax(std::span<const float> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (float v : logits) mx = std::max(mx, static_cast<double>(v));
  double sum = 0;
  for (float v : logits) sum += std::exp(static_cast<double>(v) - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<double>(logits[i]) - lse;
  return out;
}

double SequenceScore::perplexity() const { return std::exp(mean_nll()); }

SequenceScore score_candidate(const Session& context, const text::TokenSeq& candidate) {
  Session s = context;
  SequenceScore score;
  auto take = [&](int token) {
    score.total_logprob += log_softmax(s.logits())[static_cast<std::size_t>(token)];
    ++score.tokens;
  };
  for (auto t : candidate) {
    take(t);
    s.advance(t);
  }
  take(id_of(Special::kEnd));
  return score;
}

double perplexity(const ModelParams<float>& params, const AssembledInput& context, const text::TokenSeq& candidate) {
  return perplexities(params, context, std::span<const text::TokenSeq>(&candidate, 1)).front();
}

std::vector<double> perplexities(const ModelParams<float>& params, const AssembledInput& context,
                                 std::span<const text::TokenSeq> candidates) {
  for (const auto& c : candidates)
    if (c.empty()) throw std::invalid_argument("perplexity: empty candidate");
  const Session base(params, context);
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(score_candidate(base, c).perplexity());
  return out;
}

graph::EventRecord infer_event_place(const ModelParams<float>& params, const text::Vocab& vocab,
                                     const graph::VisualScene& scene, const ModalityMask& mask,
                                     std::size_t max_tokens) {
  auto prefix = assemble_prefix(params.config, scene, mask);
  prefix.push_text(id_of(Special::kStartEvent), -1, Field::kEvent);
  Session s(params, prefix);
  auto write = [&](Special close) {
    text::TokenSeq ids;
    for (std::size_t step = 0; step < max_tokens; ++step) {
      const auto logits = s.logits();
      int best = id_of(close);
      for (int id = text::kFirstPersonId; id < static_cast<int>(logits.size()); ++id)
        if (logits[static_cast<std::size_t>(id)] > logits[static_cast<std::size_t>(best)]) best = id;
      if (s.length() + 2 >= params.config.max_seq_len) break;
      s.advance(best);
      if (best == id_of(close)) return ids;
      ids.push_back(best);
    }
    s.advance(id_of(close));
    return ids;
  };
  graph::EventRecord rec;
  rec.event_text = text::decode(vocab, write(Special::kEndEvent));
  s.advance(id_of(Special::kStartPlace));
  rec.place_text = text::decode(vocab, write(Special::kEndPlace));
  const auto mentions = graph::person_mentions(rec.event_text);
  rec.subject = mentions.empty() ? graph::PersonTag{1} : mentions.front();
  return rec;
}

}  // namespace vcg::model
