#include "vcg/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "vcg/cli/ablate.hpp"
#include "vcg/decode/decode.hpp"
#include "vcg/metrics/eval.hpp"
#include "vcg/metrics/ranking.hpp"
#include "vcg/model/model.hpp"
#include "vcg/model/train.hpp"
#include "vcg/synth/synth.hpp"
#include "vcg/text/vocab.hpp"
#include "vcg/util/atomic_file.hpp"
#include "vcg/util/parallel.hpp"
#include "vcg/util/tensor_file.hpp"

namespace vcg::cli {

using OJson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

void note(const CommandOptions& o, const std::string& msg) {
  if (!o.quiet) std::cerr << msg << '\n';
}

fs::path prepare_out(const CommandOptions& o) {
  fs::create_directories(o.out_dir);
  return o.out_dir;
}

void write_json(const fs::path& path, const OJson& j) { write_file_atomic(path, j.dump(2) + "\n"); }

void write_config(const fs::path& dir, const RunConfig& config) { write_json(dir / "config.json", config.to_json()); }

model::Checkpoint load_checkpoint(const CommandOptions& o) {
  if (!o.checkpoint) throw ConfigError("--checkpoint is required");
  return model::decode_checkpoint(read_file(*o.checkpoint));
}

bool wants(const RunConfig& c, const std::string& metric) {
  return c.eval.metrics.empty() || std::find(c.eval.metrics.begin(), c.eval.metrics.end(), metric) != c.eval.metrics.end();
}

OJson filter_metrics(const RunConfig& c, OJson bundle) {
  for (const char* m : {"bleu2", "bleu4", "cider", "rouge_l", "meteor"}) {
    if (wants(c, m)) continue;
    bundle["overall"].erase(m);
    for (auto& [_, rel] : bundle["relations"].items()) rel.erase(m);
  }
  for (const char* m : {"unique", "novel", "div1_s", "div2_s"})
    if (!wants(c, m)) bundle.erase(m);
  return bundle;
}

OJson histogram_json(const std::map<std::size_t, std::size_t>& h) {
  OJson j = OJson::object();
  for (auto [k, v] : h) j[std::to_string(k)] = v;
  return j;
}

}  // namespace

graph::Corpus resolve_corpus(const RunConfig& config, const CommandOptions& options) {
  if (options.corpus) return graph::load_corpus(*options.corpus);
  if (config.data.path) return graph::load_corpus(*config.data.path);
  return synth::generate(config.data.synth);
}

OJson stats_to_json(const graph::StatsReport& r) {
  OJson j;
  j["split"] = r.split;
  j["scenes"] = r.scenes;
  j["events"] = r.events;
  j["inferences"] = r.inferences;
  j["events_per_scene"] = r.events_per_scene;
  j["persons_in_event"] = r.persons_in_event;
  j["persons_in_inference"] = r.persons_in_inference;
  j["words_event"] = r.words_event;
  j["words_place"] = r.words_place;
  j["words_inference"] = r.words_inference;
  OJson rels;
  for (auto rel : graph::kRelations) {
    const auto& s = r.relations[static_cast<std::size_t>(rel)];
    OJson bigrams = OJson::array();
    for (const auto& [b, n] : s.top_start_bigrams) bigrams.push_back({b, n});
    rels[std::string(graph::relation_name(rel))] = {{"total", s.total},
                                                     {"mean_per_event", s.mean_per_event},
                                                     {"min_per_event", s.min_per_event},
                                                     {"max_per_event", s.max_per_event},
                                                     {"top_start_bigrams", bigrams},
                                                     {"length_histogram", histogram_json(s.length_histogram)}};
  }
  j["relations"] = rels;
  j["event_length_histogram"] = histogram_json(r.event_length_histogram);
  j["place_length_histogram"] = histogram_json(r.place_length_histogram);
  j["inference_length_histogram"] = histogram_json(r.inference_length_histogram);
  return j;
}

OJson cmd_gen_data(const RunConfig& config, const CommandOptions& options) {
  const auto dir = prepare_out(options);
  const auto corpus = synth::generate(config.data.synth);
  const auto path = dir / "corpus.jsonl";
  graph::save_corpus(corpus, path);
  write_config(dir, config);
  return {{"corpus", path.string()},
          {"scenes", corpus.scenes().size()},
          {"events", corpus.events().size()},
          {"seed", config.data.synth.seed}};
}

OJson cmd_stats(const RunConfig& config, const CommandOptions& options) {
  const auto dir = prepare_out(options);
  const auto corpus = resolve_corpus(config, options);
  OJson j;
  j["all"] = stats_to_json(graph::compute_stats(corpus));
  for (auto s : {graph::Split::kTrain, graph::Split::kDev, graph::Split::kTest})
    if (!corpus.event_indices(s).empty()) j[std::string(graph::split_name(s))] = stats_to_json(graph::compute_stats(corpus, s));
  j["config"] = config.to_json();
  write_json(dir / "stats.json", j);
  write_config(dir, config);
  return {{"stats", (dir / "stats.json").string()}, {"events", corpus.events().size()}};
}

OJson cmd_train(const RunConfig& config, const CommandOptions& options) {
  const auto dir = prepare_out(options);
  const auto corpus = resolve_corpus(config, options);
  const auto vocab = text::build_vocab(corpus, config.data.min_count);
  auto mc = config.model;
  mc.vocab_size = vocab.size();
  mc.feature_dim = corpus.feature_dim();
  auto params = model::ModelParams<float>::init(mc, config.train.seed);
  note(options, "training " + std::to_string(params.parameter_count()) + " parameters, vocab " +
                    std::to_string(vocab.size()));
  const auto every = std::max<std::size_t>(1, config.train.steps / 10);
  const auto report = model::train(params, vocab, corpus, config.train, [&](std::size_t step, double loss) {
    if ((step + 1) % every == 0) note(options, "step " + std::to_string(step + 1) + " loss " + std::to_string(loss));
  });
  OJson run;
  run["config"] = config.to_json();
  run["final_loss"] = report.final_loss;
  const auto ckpt = dir / "model.vcgm";
  write_file_atomic(ckpt, model::encode_checkpoint(params, vocab, run));
  auto log = report.to_json();
  log["config"] = config.to_json();
  write_json(dir / "train_log.json", log);
  write_config(dir, config);
  OJson out{{"checkpoint", ckpt.string()},
            {"steps", report.steps},
            {"initial_loss", report.initial_loss},
            {"final_loss", report.final_loss},
            {"seconds", report.seconds}};
  if (std::isfinite(report.dev_loss)) out["dev_loss"] = report.dev_loss;
  return out;
}

OJson cmd_generate(const RunConfig& config, const CommandOptions& options) {
  const auto dir = prepare_out(options);
  const auto ck = load_checkpoint(options);
  const auto corpus = resolve_corpus(config, options);
  const auto sets = decode::generate_split(ck.params, ck.vocab, corpus, config.decode.split, config.decode.config,
                                           config.decode.limit);
  const auto path = dir / "generations.jsonl";
  write_file_atomic(path, decode::dump_generations(sets));
  write_config(dir, config);
  return {{"generations", path.string()},
          {"contexts", sets.size()},
          {"method", decode::method_name(config.decode.config.method)},
          {"seed", config.decode.config.seed}};
}

OJson cmd_rank(const RunConfig& config, const CommandOptions& options) {
  const auto dir = prepare_out(options);
  const auto ck = load_checkpoint(options);
  const auto corpus = resolve_corpus(config, options);
  auto items = metrics::rank_items(corpus, config.eval.split);
  if (config.eval.limit > 0 && items.size() > config.eval.limit) items.resize(config.eval.limit);
  const auto res = metrics::acc_at_k(ck.params, ck.vocab, corpus, items, config.eval.mask, config.eval.acc);
  OJson j{{"acc", res.accuracy},
          {"chance", res.chance},
          {"k", config.eval.acc.k},
          {"items", items.size()},
          {"mask", config.eval.mask.name()},
          {"split", graph::split_name(config.eval.split)},
          {"per_item", res.per_item},
          {"config", config.to_json()}};
  write_json(dir / "rank.json", j);
  write_config(dir, config);
  return {{"acc", res.accuracy}, {"chance", res.chance}, {"items", items.size()}};
}

OJson cmd_evaluate(const RunConfig& config, const CommandOptions& options) {
  const auto dir = prepare_out(options);
  if (!options.generations) throw ConfigError("--generations is required");
  const auto corpus = resolve_corpus(config, options);
  const auto sets = decode::parse_generations(read_file(*options.generations));
  auto bundle = metrics::evaluate_generations(sets, corpus);
  if (options.checkpoint && wants(config, "acc")) {
    const auto ck = load_checkpoint(options);
    auto items = metrics::rank_items(corpus, config.eval.split);
    if (config.eval.limit > 0 && items.size() > config.eval.limit) items.resize(config.eval.limit);
    bundle.acc = metrics::acc_at_k(ck.params, ck.vocab, corpus, items, config.eval.mask, config.eval.acc).accuracy;
    bundle.acc_k = config.eval.acc.k;
  }
  auto j = filter_metrics(config, bundle.to_json());
  j["config"] = config.to_json();
  write_json(dir / "eval.json", j);
  write_config(dir, config);
  j.erase("config");
  return j;
}

OJson cmd_ablate(const RunConfig& config, const CommandOptions& options) {
  const auto dir = prepare_out(options);
  if (config.data.path || options.corpus) throw ConfigError("ablate generates its own corpora from data.synth");
  AblationSettings s;
  s.synth = config.data.synth;
  s.min_count = config.data.min_count;
  s.model = config.model;
  s.train = config.train;
  s.decode = config.decode.config;
  s.acc = config.eval.acc;
  s.seeds = config.ablate.seeds;
  s.rank_limit = config.ablate.rank_limit;
  s.generation_limit = config.ablate.generation_limit;
  s.split = config.eval.split;
  const auto rows = standard_rows();
  const auto report = run_ablation(s, rows, [&](const std::string& m) { note(options, m); });
  OJson j{{"rows", report.to_json()}, {"config", config.to_json()}};
  write_json(dir / "ablation.json", j);
  write_file_atomic(dir / "ablation.md", report.to_markdown());
  write_config(dir, config);
  return {{"ablation", (dir / "ablation.json").string()}, {"table", (dir / "ablation.md").string()}};
}

OJson error_json(const std::exception& e) {
  std::string type = "error";
  if (dynamic_cast<const ConfigError*>(&e)) type = "config";
  else if (dynamic_cast<const graph::CorpusError*>(&e)) type = "corpus";
  else if (dynamic_cast<const TensorFileError*>(&e)) type = "checkpoint";
  else if (dynamic_cast<const model::TrainDivergence*>(&e)) type = "divergence";
  else if (dynamic_cast<const model::AssemblyError*>(&e)) type = "assembly";
  else if (dynamic_cast<const text::VocabError*>(&e)) type = "vocab";
  else if (dynamic_cast<const std::invalid_argument*>(&e)) type = "invalid_argument";
  else if (dynamic_cast<const fs::filesystem_error*>(&e)) type = "io";
  return {{"error", {{"type", type}, {"message", e.what()}}}};
}

}  // namespace vcg::cli
