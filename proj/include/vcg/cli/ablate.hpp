#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcg/decode/decode.hpp"
#include "vcg/metrics/ranking.hpp"
#include "vcg/model/train.hpp"
#include "vcg/synth/synth.hpp"

namespace vcg::cli {

/// One row of the ablation grid: how the model is trained and what it sees at test time.
struct AblationRow {
  std::string name;
  bool text_given = true;
  model::Objective objective = model::Objective::kInference;
  std::vector<model::MaskChoice> schedule;
  model::ModalityMask test_mask;

  /// Rows sharing a key reuse one trained model per seed.
  std::string model_key() const;
};

/// The six standard rows: three with event and place given, three without.
std::vector<AblationRow> standard_rows();

struct AblationSettings {
  synth::SynthConfig synth;
  std::uint32_t min_count = 1;
  model::ModelConfig model;
  model::TrainConfig train;  // objective and schedule come from each row
  decode::DecodeConfig decode;
  metrics::AccConfig acc;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t rank_limit = 150;
  std::size_t generation_limit = 60;
  graph::Split split = graph::Split::kDev;
};

struct SeedScores {
  std::uint64_t seed = 0;
  double acc = 0.0;
  double chance = 0.0;
  double bleu2 = 0.0;  // 0..100
  double meteor = 0.0;  // 0..100
  double cider = 0.0;
  double unique = 0.0;  // 0..100
  double novel = 0.0;   // 0..100
  double final_loss = 0.0;
};

struct RowResult {
  AblationRow row;
  std::vector<SeedScores> per_seed;
  SeedScores median;  // metric-wise median, seed field unused
};

struct AblationReport {
  std::vector<RowResult> rows;
  nlohmann::ordered_json to_json() const;
  std::string to_markdown() const;
};

/// Everything a trained model was evaluated with, for callers that want to probe it further.
struct TrainedModel {
  const AblationRow& row;
  std::uint64_t seed;
  const model::ModelParams<float>& params;
  const text::Vocab& vocab;
  const graph::Corpus& corpus;
};

using ModelHook = std::function<void(const TrainedModel&)>;
using LogFn = std::function<void(const std::string&)>;

/// Each seed gets its own synthetic corpus and model initialisation.
AblationReport run_ablation(const AblationSettings& settings, std::span<const AblationRow> rows,
                            const LogFn& log = {}, const ModelHook& hook = {});

double median(std::vector<double> values);

}  // namespace vcg::cli
