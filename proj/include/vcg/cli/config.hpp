#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcg/decode/decode.hpp"
#include "vcg/metrics/ranking.hpp"
#include "vcg/model/model.hpp"
#include "vcg/model/train.hpp"
#include "vcg/synth/synth.hpp"

namespace vcg::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataSection {
  std::optional<std::string> path;  // corpus JSONL; otherwise `synth` generates one
  synth::SynthConfig synth;
  std::uint32_t min_count = 1;      // vocabulary cutoff
};

struct DecodeSection {
  decode::DecodeConfig config;
  graph::Split split = graph::Split::kDev;
  std::size_t limit = 0;  // contexts, 0 = all
};

struct EvalSection {
  std::vector<std::string> metrics;  // empty = all
  metrics::AccConfig acc;
  model::ModalityMask mask;  // ranking context
  graph::Split split = graph::Split::kDev;
  std::size_t limit = 0;  // rank items, 0 = all
};

struct AblateSection {
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t rank_limit = 150;
  std::size_t generation_limit = 60;
};

/// Sections: data, model, train, decode, eval, ablate. Unknown keys are errors.
/// model.vocab_size and model.feature_dim come from the data.
struct RunConfig {
  DataSection data;
  model::ModelConfig model;
  model::TrainConfig train;
  DecodeSection decode;
  EvalSection eval;
  AblateSection ablate;

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
  /// --seed: replaces every seed in the document.
  void apply_seed(std::uint64_t seed);
};

RunConfig load_run_config(const std::filesystem::path& path);

/// Desk-scale defaults with the model sized for the synthetic benchmark.
RunConfig default_run_config();

nlohmann::ordered_json synth_to_json(const synth::SynthConfig& c);
synth::SynthConfig synth_from_json(const nlohmann::json& j);

const std::vector<std::string>& known_metrics();

}  // namespace vcg::cli
