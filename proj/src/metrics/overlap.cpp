#include "vcg/metrics/overlap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "vcg/graph/corpus.hpp"
#include "vcg/text/vocab.hpp"

namespace vcg::metrics {

namespace {

using Counts = std::map<Words, double>;

Counts ngram_counts(const Words& w, int n) {
  Counts out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= w.size(); ++i)
    out[Words(w.begin() + static_cast<std::ptrdiff_t>(i), w.begin() + static_cast<std::ptrdiff_t>(i) + n)] += 1;
  return out;
}

}  // namespace

Words tokenize(std::string_view text) {
  Words out;
  const auto norm = text::normalize(text);
  for (auto w : graph::split_words(norm)) out.emplace_back(w);
  return out;
}

double bleu_n(const Words& hyp, std::span<const Words> refs, int n) {
  if (n < 1) throw std::invalid_argument("bleu_n: n must be >= 1");
  if (hyp.empty() || refs.empty()) return 0.0;
  constexpr double eps = 1e-9;
  double log_sum = 0;
  for (int i = 1; i <= n; ++i) {
    const auto h = ngram_counts(hyp, i);
    Counts max_ref;
    for (const auto& r : refs)
      for (const auto& [g, c] : ngram_counts(r, i)) max_ref[g] = std::max(max_ref[g], c);
    double clipped = 0, total = 0;
    for (const auto& [g, c] : h) {
      total += c;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) clipped += std::min(c, it->second);
    }
    const double p = total > 0 && clipped > 0 ? clipped / total : eps;
    log_sum += std::log(p);
  }
  const auto c = static_cast<double>(hyp.size());
  double r = static_cast<double>(refs.front().size());
  for (const auto& ref : refs) {
    const auto len = static_cast<double>(ref.size());
    if (std::abs(len - c) < std::abs(r - c) || (std::abs(len - c) == std::abs(r - c) && len < r)) r = len;
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / n);
}

std::vector<double> cider_scores(const std::map<std::string, Words>& hyps,
                                 const std::map<std::string, std::vector<Words>>& refs) {
  constexpr int N = 4;
  constexpr double sigma = 6.0;
  if (hyps.size() != refs.size()) throw std::invalid_argument("cider: hypothesis and reference ids differ");
  for (const auto& [id, h] : hyps)
    if (!refs.contains(id)) throw std::invalid_argument("cider: no references for id " + id);
  if (hyps.size() < 2) throw std::invalid_argument("cider: needs at least 2 items");

  std::map<Words, double> df;
  for (const auto& [id, rs] : refs) {
    std::map<Words, bool> seen;
    for (const auto& r : rs)
      for (int n = 1; n <= N; ++n)
        for (const auto& [g, c] : ngram_counts(r, n)) seen[g] = true;
    for (const auto& [g, b] : seen) df[g] += 1;
  }
  const double log_n = std::log(static_cast<double>(refs.size()));

  struct Vec {
    std::array<std::map<Words, double>, N> v;
    std::array<double, N> norm{};
    double length = 0;
  };
  auto to_vec = [&](const Words& w) {
    Vec out;
    for (int n = 1; n <= N; ++n)
      for (const auto& [g, tf] : ngram_counts(w, n)) {
        auto it = df.find(g);
        const double idf = log_n - std::log(std::max(1.0, it == df.end() ? 0.0 : it->second));
        const double val = tf * idf;
        out.v[static_cast<std::size_t>(n - 1)][g] = val;
        out.norm[static_cast<std::size_t>(n - 1)] += val * val;
        if (n == 2) out.length += tf;
      }
    for (auto& x : out.norm) x = std::sqrt(x);
    return out;
  };
  auto sim = [&](const Vec& h, const Vec& r) {
    const double delta = h.length - r.length;
    double total = 0;
    for (std::size_t n = 0; n < N; ++n) {
      double val = 0;
      for (const auto& [g, hv] : h.v[n]) {
        auto it = r.v[n].find(g);
        if (it != r.v[n].end()) val += std::min(hv, it->second) * it->second;
      }
      if (h.norm[n] != 0 && r.norm[n] != 0) val /= h.norm[n] * r.norm[n];
      total += val * std::exp(-(delta * delta) / (2 * sigma * sigma));
    }
    return total;
  };

  std::vector<double> out;
  for (const auto& [id, h] : hyps) {
    const auto& rs = refs.at(id);
    if (rs.empty()) throw std::invalid_argument("cider: empty reference list for id " + id);
    const auto hv = to_vec(h);
    double score = 0;
    for (const auto& r : rs) score += sim(hv, to_vec(r));
    out.push_back(score / N / static_cast<double>(rs.size()) * 10.0);
  }
  return out;
}

double cider(const std::map<std::string, Words>& hyps, const std::map<std::string, std::vector<Words>>& refs) {
  const auto s = cider_scores(hyps, refs);
  double total = 0;
  for (double v : s) total += v;
  return total / static_cast<double>(s.size());
}

std::size_t lcs_length(const Words& a, const Words& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Words& hyp, std::span<const Words> refs) {
  if (hyp.empty()) return 0.0;
  constexpr double beta2 = 1.2 * 1.2;
  double best = 0;
  for (const auto& r : refs) {
    if (r.empty()) continue;
    const auto l = static_cast<double>(lcs_length(hyp, r));
    if (l == 0) continue;
    const double p = l / static_cast<double>(hyp.size()), rec = l / static_cast<double>(r.size());
    best = std::max(best, (1 + beta2) * p * rec / (rec + beta2 * p));
  }
  return best;
}

namespace {

/// Exact one-to-one alignment that prefers extending the current chunk.
/// Returns (matches, chunks).
std::pair<std::size_t, std::size_t> align_exact(const Words& hyp, const Words& ref) {
  std::unordered_map<std::string, std::vector<std::size_t>> positions;
  for (std::size_t j = 0; j < ref.size(); ++j) positions[ref[j]].push_back(j);
  std::vector<bool> used(ref.size(), false);
  std::size_t matches = 0, chunks = 0;
  long prev = -2;
  for (const auto& w : hyp) {
    auto it = positions.find(w);
    if (it == positions.end()) {
      prev = -2;
      continue;
    }
    long pick = -1;
    for (auto j : it->second)
      if (!used[j] && static_cast<long>(j) == prev + 1) pick = static_cast<long>(j);
    if (pick < 0)
      for (auto j : it->second)
        if (!used[j]) {
          pick = static_cast<long>(j);
          break;
        }
    if (pick < 0) {
      prev = -2;
      continue;
    }
    used[static_cast<std::size_t>(pick)] = true;
    ++matches;
    if (pick != prev + 1) ++chunks;
    prev = pick;
  }
  return {matches, chunks};
}

}  // namespace

double meteor_exact(const Words& hyp, std::span<const Words> refs) {
  if (hyp.empty()) return 0.0;
  double best = 0;
  for (const auto& r : refs) {
    if (r.empty()) continue;
    const auto [m, chunks] = align_exact(hyp, r);
    if (m == 0) continue;
    const double md = static_cast<double>(m);
    const double p = md / static_cast<double>(hyp.size()), rec = md / static_cast<double>(r.size());
    const double fmean = 10 * p * rec / (rec + 9 * p);
    const double frag = static_cast<double>(chunks) / md;
    best = std::max(best, fmean * (1 - 0.5 * frag * frag * frag));
  }
  return best;
}

}  // namespace vcg::metrics
