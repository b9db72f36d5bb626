#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vcg/graph/corpus.hpp"

namespace vcg::graph {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Violation {
  std::string locator;  // e.g. "scene_0003" or "scene_0003/event[1]/inference[2]"
  std::string rule;     // stable rule id, e.g. "max_visual_features"
  std::string detail;
};

struct ValidateOptions {
  std::size_t max_visual_features = kDefaultMaxVisualFeatures;
  bool allow_empty_inferences = false;  // generation-input records
};

/// Empty iff every corpus invariant holds. Rule ids:
/// feature_dim, max_visual_features, person_tag_range, person_tag_unique,
/// person_tags_contiguous, event_scene_exists, event_mentions_person,
/// subject_in_scene, place_nonempty, inferences_nonempty, inference_nonempty,
/// mention_in_scene.
std::vector<Violation> validate(const Corpus& corpus, const ValidateOptions& options = {});

// --- JSONL serialization -----------------------------------------------------

struct SaveOptions {
  /// When set, features go into this VCGM sidecar (written next to the corpus)
  /// and scene lines omit their inline arrays.
  std::optional<std::string> feature_sidecar;
};

/// Canonical text form: header line then one scene per line, scenes and events
/// in corpus order. save(load(save(c))) == save(c) byte for byte.
std::string dump_corpus(const Corpus& corpus);
Corpus parse_corpus(std::string_view text, const std::filesystem::path& base_dir = {},
                    const ValidateOptions& options = {});

Corpus load_corpus(const std::filesystem::path& path, const ValidateOptions& options = {});
void save_corpus(const Corpus& corpus, const std::filesystem::path& path, const SaveOptions& options = {});

// --- statistics --------------------------------------------------------------

struct RelationStats {
  double mean_per_event = 0.0;
  std::size_t min_per_event = 0;
  std::size_t max_per_event = 0;
  std::size_t total = 0;
  std::vector<std::pair<std::string, std::size_t>> top_start_bigrams;
  std::map<std::size_t, std::size_t> length_histogram;  // words -> count
};

struct StatsReport {
  std::string split;  // "train" | "dev" | "test" | "all"
  std::size_t scenes = 0;
  std::size_t events = 0;
  std::size_t inferences = 0;
  std::array<RelationStats, 3> relations;  // indexed by Relation
  double events_per_scene = 0.0;
  double persons_in_event = 0.0;      // unique persons mentioned per event
  double persons_in_inference = 0.0;  // unique persons mentioned per inference
  double words_event = 0.0;
  double words_place = 0.0;
  double words_inference = 0.0;
  std::map<std::size_t, std::size_t> event_length_histogram;
  std::map<std::size_t, std::size_t> place_length_histogram;
  std::map<std::size_t, std::size_t> inference_length_histogram;
};

/// Throws CorpusError when the selected split has no events.
StatsReport compute_stats(const Corpus& corpus, std::optional<Split> split = std::nullopt,
                          std::size_t top_k = 5);

// --- splitting ----------------------------------------------------------------

/// Scene counts per split by largest-remainder apportionment (ties to the
/// earlier split). Throws std::invalid_argument on bad fractions.
std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& fractions);

/// Reassigns splits: scene ids sorted, shuffled with the seeded Fisher-Yates,
/// then cut into train/dev/test by apportion().
Corpus split_corpus(const Corpus& corpus, const std::array<double, 3>& fractions, std::uint64_t seed);

}  // namespace vcg::graph
