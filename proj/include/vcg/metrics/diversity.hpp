#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_set>

namespace vcg::metrics {

/// Normalized text with every [PersonN] replaced by [Person].
std::string canonicalize(std::string_view text);

/// Distinct canonical sentences / total. 0 for an empty list.
double unique_ratio(std::span<const std::string> generated);

/// Generated sentences whose canonical form is absent from `training_canonical` / total.
double novel_ratio(std::span<const std::string> generated, const std::unordered_set<std::string>& training_canonical);
double novel_ratio(std::span<const std::string> generated, std::span<const std::string> training);

/// Distinct n-grams over the set / total words over the set. 0 for an empty set.
double div_ngram_s(std::span<const std::string> candidate_set, int n);

}  // namespace vcg::metrics
