#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vcg/cli/commands.hpp"
#include "vcg/cli/config.hpp"

using namespace vcg::cli;

int main(int argc, char** argv) {
  CLI::App app{"Visual commonsense generation on synthetic scenes"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string checkpoint, corpus, generations;
  bool quiet = false;

  app.add_option("--config", config_path, "Run configuration (JSON)");
  app.add_option("--seed", seed, "Overrides every seed in the configuration");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--checkpoint", checkpoint, "Model checkpoint (.vcgm)");
  app.add_option("--corpus", corpus, "Corpus JSONL, overrides data in the configuration");
  app.add_option("--generations", generations, "Generations JSONL");
  app.add_flag("-q,--quiet", quiet, "No progress output");

  using Command = nlohmann::ordered_json (*)(const RunConfig&, const CommandOptions&);
  const std::pair<const char*, std::pair<const char*, Command>> commands[] = {
      {"gen-data", {"Generate a synthetic corpus", cmd_gen_data}},
      {"stats", {"Corpus statistics", cmd_stats}},
      {"train", {"Train a model", cmd_train}},
      {"generate", {"Decode inferences for a split", cmd_generate}},
      {"rank", {"Retrieval accuracy Acc@k", cmd_rank}},
      {"evaluate", {"Score generations", cmd_evaluate}},
      {"ablate", {"Run the modality ablation grid", cmd_ablate}},
  };
  for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.first)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << nlohmann::ordered_json{{"error", {{"type", "usage"}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  }

  try {
    RunConfig config = config_path.empty() ? default_run_config() : load_run_config(config_path);
    if (seed) config.apply_seed(*seed);
    CommandOptions options;
    options.out_dir = out_dir;
    options.quiet = quiet;
    if (!checkpoint.empty()) options.checkpoint = checkpoint;
    if (!corpus.empty()) options.corpus = corpus;
    if (!generations.empty()) options.generations = generations;
    for (const auto& [name, entry] : commands) {
      if (app.got_subcommand(name)) {
        std::cout << entry.second(config, options).dump(2) << '\n';
        return 0;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << error_json(e).dump() << '\n';
    return 1;
  }
  return 1;
}
