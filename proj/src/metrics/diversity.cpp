#include "vcg/metrics/diversity.hpp"

#include <cctype>
#include <set>
#include <vector>

#include "vcg/graph/corpus.hpp"
#include "vcg/metrics/overlap.hpp"

namespace vcg::metrics {

std::string canonicalize(std::string_view text) {
  std::string out;
  for (auto w : graph::split_words(text)) {
    if (!out.empty()) out += ' ';
    if (graph::parse_person_token(w)) {
      out += "[Person]";
    } else {
      for (char c : w) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  return out;
}

double unique_ratio(std::span<const std::string> generated) {
  if (generated.empty()) return 0.0;
  std::set<std::string> distinct;
  for (const auto& g : generated) distinct.insert(canonicalize(g));
  return static_cast<double>(distinct.size()) / static_cast<double>(generated.size());
}

double novel_ratio(std::span<const std::string> generated, const std::unordered_set<std::string>& training) {
  if (generated.empty()) return 0.0;
  std::size_t novel = 0;
  for (const auto& g : generated) novel += !training.contains(canonicalize(g));
  return static_cast<double>(novel) / static_cast<double>(generated.size());
}

double novel_ratio(std::span<const std::string> generated, std::span<const std::string> training) {
  std::unordered_set<std::string> canon;
  for (const auto& t : training) canon.insert(canonicalize(t));
  return novel_ratio(generated, canon);
}

double div_ngram_s(std::span<const std::string> candidate_set, int n) {
  std::set<Words> distinct;
  std::size_t words = 0;
  for (const auto& s : candidate_set) {
    const auto w = tokenize(s);
    words += w.size();
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= w.size(); ++i)
      distinct.insert(Words(w.begin() + static_cast<std::ptrdiff_t>(i), w.begin() + static_cast<std::ptrdiff_t>(i) + n));
  }
  return words == 0 ? 0.0 : static_cast<double>(distinct.size()) / static_cast<double>(words);
}

}  // namespace vcg::metrics
