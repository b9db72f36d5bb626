#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vcg::metrics {

using Words = std::vector<std::string>;

/// Lowercased whitespace tokens; person tags stay as written.
Words tokenize(std::string_view text);

/// Clipped n-gram precision (1..n) geometric mean times the brevity penalty
/// against the closest reference length. Zero precisions become 1e-9.
double bleu_n(const Words& hypothesis, std::span<const Words> references, int n);

/// CIDEr-D: tf-idf over 1..4-grams with document frequencies taken from the
/// reference sets, clipped cosine, gaussian length penalty (sigma 6), x10.
/// Returns per-id scores in key order; throws on id mismatch or fewer than 2 ids.
std::vector<double> cider_scores(const std::map<std::string, Words>& hypotheses,
                                 const std::map<std::string, std::vector<Words>>& references);
double cider(const std::map<std::string, Words>& hypotheses,
             const std::map<std::string, std::vector<Words>>& references);

std::size_t lcs_length(const Words& a, const Words& b);

/// LCS F-measure with beta 1.2, best reference.
double rouge_l(const Words& hypothesis, std::span<const Words> references);

/// Exact-match METEOR: Fmean = 10PR / (R + 9P), penalty 0.5 (chunks / matches)^3,
/// best reference.
double meteor_exact(const Words& hypothesis, std::span<const Words> references);

}  // namespace vcg::metrics
