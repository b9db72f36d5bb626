#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "vcg/cli/config.hpp"
#include "vcg/graph/store.hpp"

namespace vcg::cli {

struct CommandOptions {
  std::filesystem::path out_dir = ".";
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> corpus;
  std::optional<std::filesystem::path> generations;
  bool quiet = false;  // suppresses progress on stderr
};

/// Each command writes its artifacts plus config.json into out_dir and returns
/// a summary object for stdout.
nlohmann::ordered_json cmd_gen_data(const RunConfig& config, const CommandOptions& options);
nlohmann::ordered_json cmd_stats(const RunConfig& config, const CommandOptions& options);
nlohmann::ordered_json cmd_train(const RunConfig& config, const CommandOptions& options);
nlohmann::ordered_json cmd_generate(const RunConfig& config, const CommandOptions& options);
nlohmann::ordered_json cmd_rank(const RunConfig& config, const CommandOptions& options);
nlohmann::ordered_json cmd_evaluate(const RunConfig& config, const CommandOptions& options);
nlohmann::ordered_json cmd_ablate(const RunConfig& config, const CommandOptions& options);

/// --corpus, then data.path, then a corpus generated from data.synth.
graph::Corpus resolve_corpus(const RunConfig& config, const CommandOptions& options);

nlohmann::ordered_json stats_to_json(const graph::StatsReport& report);

/// {"error": {"type": ..., "message": ...}}
nlohmann::ordered_json error_json(const std::exception& e);

}  // namespace vcg::cli
