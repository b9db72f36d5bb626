#include "vcg/cli/ablate.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>

#include "vcg/metrics/eval.hpp"
#include "vcg/text/vocab.hpp"

namespace vcg::cli {

using model::MaskChoice;
using model::ModalityMask;
using model::Objective;

std::string AblationRow::model_key() const {
  std::string key(model::objective_name(objective));
  for (const auto& s : schedule) key += "|" + s.mask.name() + ":" + std::to_string(s.weight);
  return key;
}

std::vector<AblationRow> standard_rows() {
  const auto full = ModalityMask::full();
  const auto text = ModalityMask::text_only();
  const auto image = ModalityMask::image_only();
  const std::vector<MaskChoice> mixed{{full, 0.5}, {image, 0.5}};
  return {
      {"Event+Place", true, Objective::kInference, {{text, 1.0}}, text},
      {"Image+Event+Place+PG", true, Objective::kInference, {{full, 1.0}}, full},
      {"Image+Event+Place+PG+EP", true, Objective::kEventPlace, mixed, full},
      {"Image+PG", false, Objective::kInference, {{image, 1.0}}, image},
      {"Image+Event+Place+PG (image at test)", false, Objective::kInference, {{full, 1.0}}, image},
      {"Image+Event+Place+PG+EP (image at test)", false, Objective::kEventPlace, mixed, image},
  };
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

SeedScores median_scores(const std::vector<SeedScores>& seeds) {
  auto pick = [&](double SeedScores::*field) {
    std::vector<double> v;
    for (const auto& s : seeds) v.push_back(s.*field);
    return median(std::move(v));
  };
  SeedScores m;
  m.acc = pick(&SeedScores::acc);
  m.chance = pick(&SeedScores::chance);
  m.bleu2 = pick(&SeedScores::bleu2);
  m.meteor = pick(&SeedScores::meteor);
  m.cider = pick(&SeedScores::cider);
  m.unique = pick(&SeedScores::unique);
  m.novel = pick(&SeedScores::novel);
  m.final_loss = pick(&SeedScores::final_loss);
  return m;
}

nlohmann::ordered_json scores_json(const SeedScores& s) {
  return {{"acc", s.acc},       {"chance", s.chance}, {"bleu2", s.bleu2},   {"meteor", s.meteor},
          {"cider", s.cider},   {"unique", s.unique}, {"novel", s.novel},   {"final_loss", s.final_loss}};
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

nlohmann::ordered_json AblationReport::to_json() const {
  auto out = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["name"] = r.row.name;
    j["text_given"] = r.row.text_given;
    j["objective"] = model::objective_name(r.row.objective);
    auto sched = nlohmann::ordered_json::array();
    for (const auto& s : r.row.schedule) sched.push_back({{"mask", s.mask.name()}, {"weight", s.weight}});
    j["train_masks"] = sched;
    j["test_mask"] = r.row.test_mask.name();
    j["median"] = scores_json(r.median);
    auto seeds = nlohmann::ordered_json::array();
    for (const auto& s : r.per_seed) {
      auto js = scores_json(s);
      js["seed"] = s.seed;
      seeds.push_back(js);
    }
    j["seeds"] = seeds;
    out.push_back(j);
  }
  return out;
}

std::string AblationReport::to_markdown() const {
  std::string md = "| Setting | Acc@50 | BLEU-2 | METEOR | CIDEr | Unique | Novel |\n";
  md += "|---|---|---|---|---|---|---|\n";
  std::optional<bool> section;
  for (const auto& r : rows) {
    if (section != r.row.text_given) {
      section = r.row.text_given;
      md += std::string("| *") + (r.row.text_given ? "event and place given" : "no event or place") +
            "* | | | | | | |\n";
    }
    const auto& m = r.median;
    md += "| " + r.row.name + " | " + fixed(m.acc, 3) + " | " + fixed(m.bleu2, 2) + " | " + fixed(m.meteor, 2) +
          " | " + fixed(m.cider, 3) + " | " + fixed(m.unique, 1) + " | " + fixed(m.novel, 1) + " |\n";
  }
  return md;
}

AblationReport run_ablation(const AblationSettings& settings, std::span<const AblationRow> rows, const LogFn& log,
                            const ModelHook& hook) {
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  AblationReport report;
  for (const auto& row : rows) report.rows.push_back({row, {}, {}});

  for (auto seed : settings.seeds) {
    auto synth_config = settings.synth;
    synth_config.seed = seed;
    const auto corpus = synth::generate(synth_config);
    const auto vocab = text::build_vocab(corpus, settings.min_count);
    auto mc = settings.model;
    mc.vocab_size = vocab.size();
    mc.feature_dim = corpus.feature_dim();

    auto items = metrics::rank_items(corpus, settings.split);
    if (settings.rank_limit > 0 && items.size() > settings.rank_limit) items.resize(settings.rank_limit);

    std::map<std::string, std::pair<model::ModelParams<float>, double>> models;
    for (auto& result : report.rows) {
      const auto& row = result.row;
      const auto key = row.model_key();
      auto it = models.find(key);
      if (it == models.end()) {
        auto params = model::ModelParams<float>::init(mc, seed);
        auto tc = settings.train;
        tc.seed = seed;
        tc.objective = row.objective;
        tc.schedule = row.schedule;
        say("seed " + std::to_string(seed) + ": training " + key);
        const auto rep = model::train(params, vocab, corpus, tc);
        say("  final loss " + fixed(rep.final_loss, 4) + " in " + fixed(rep.seconds, 1) + "s");
        it = models.emplace(key, std::make_pair(std::move(params), rep.final_loss)).first;
      }
      const auto& params = it->second.first;

      SeedScores s;
      s.seed = seed;
      s.final_loss = it->second.second;
      auto ac = settings.acc;
      ac.seed = seed;
      const auto acc = metrics::acc_at_k(params, vocab, corpus, items, row.test_mask, ac);
      s.acc = acc.accuracy;
      s.chance = acc.chance;

      auto dc = settings.decode;
      dc.seed = seed;
      dc.mask = row.test_mask;
      const auto sets = decode::generate_split(params, vocab, corpus, settings.split, dc, settings.generation_limit);
      const auto bundle = metrics::evaluate_generations(sets, corpus);
      s.bleu2 = 100.0 * bundle.overall.bleu2;
      s.meteor = 100.0 * bundle.overall.meteor;
      s.cider = bundle.overall.cider;
      s.unique = 100.0 * bundle.unique;
      s.novel = 100.0 * bundle.novel;
      say("  " + row.name + ": acc " + fixed(s.acc, 3) + " bleu2 " + fixed(s.bleu2, 2));
      result.per_seed.push_back(s);
      if (hook) hook({row, seed, params, vocab, corpus});
    }
  }
  for (auto& r : report.rows) r.median = median_scores(r.per_seed);
  return report;
}

}  // namespace vcg::cli
