#include "vcg/cli/config.hpp"

#include <algorithm>
#include <set>

#include "vcg/util/atomic_file.hpp"

namespace vcg::cli {

namespace {

using Json = nlohmann::json;
using OJson = nlohmann::ordered_json;

void only_keys(const Json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
      throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

synth::IntRange read_range(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    throw ConfigError(where + " must be [lo, hi]");
  return {j[0].get<int>(), j[1].get<int>()};
}

graph::Split read_split(const Json& j, const char* key, graph::Split fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto s = graph::parse_split(j.at(key).get<std::string>());
  if (!s) throw ConfigError(where + "." + key + " must be train, dev or test");
  return *s;
}

model::ModalityMask read_mask(const Json& j, const std::string& where) {
  try {
    return model::ModalityMask::parse(j.get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

const std::vector<std::string>& known_metrics() {
  static const std::vector<std::string> names{"bleu2", "bleu4", "cider", "rouge_l", "meteor",
                                              "unique", "novel", "div1_s", "div2_s", "acc"};
  return names;
}

OJson synth_to_json(const synth::SynthConfig& c) {
  OJson j;
  j["n_scene_types"] = c.n_scene_types;
  j["n_scenes"] = c.n_scenes;
  j["persons_per_scene"] = {c.persons_per_scene.lo, c.persons_per_scene.hi};
  j["events_per_scene"] = {c.events_per_scene.lo, c.events_per_scene.hi};
  j["inferences_per_relation"] = {c.inferences_per_relation.lo, c.inferences_per_relation.hi};
  j["feature_dim"] = c.feature_dim;
  j["noise_sigma"] = c.noise_sigma;
  j["visual_dependence"] = c.visual_dependence;
  j["seed"] = c.seed;
  j["split_fractions"] = c.split_fractions;
  if (c.templates_path) j["templates_path"] = *c.templates_path;
  return j;
}

synth::SynthConfig synth_from_json(const Json& j) {
  const std::string w = "data.synth";
  only_keys(j, w, {"n_scene_types", "n_scenes", "persons_per_scene", "events_per_scene", "inferences_per_relation",
                   "feature_dim", "noise_sigma", "visual_dependence", "seed", "split_fractions", "templates_path"});
  synth::SynthConfig c;
  read(j, "n_scene_types", c.n_scene_types, w);
  read(j, "n_scenes", c.n_scenes, w);
  if (j.contains("persons_per_scene")) c.persons_per_scene = read_range(j["persons_per_scene"], w + ".persons_per_scene");
  if (j.contains("events_per_scene")) c.events_per_scene = read_range(j["events_per_scene"], w + ".events_per_scene");
  if (j.contains("inferences_per_relation"))
    c.inferences_per_relation = read_range(j["inferences_per_relation"], w + ".inferences_per_relation");
  read(j, "feature_dim", c.feature_dim, w);
  read(j, "noise_sigma", c.noise_sigma, w);
  read(j, "visual_dependence", c.visual_dependence, w);
  read(j, "seed", c.seed, w);
  read(j, "split_fractions", c.split_fractions, w);
  if (j.contains("templates_path")) c.templates_path = j["templates_path"].get<std::string>();
  return c;
}

RunConfig default_run_config() {
  RunConfig c;
  c.model.d_model = 48;
  c.model.d_ff = 192;
  c.train.steps = 2000;
  return c;
}

RunConfig RunConfig::from_json(const Json& j) {
  only_keys(j, "config", {"data", "model", "train", "decode", "eval", "ablate"});
  RunConfig c = default_run_config();

  if (j.contains("data")) {
    const auto& d = j["data"];
    only_keys(d, "data", {"path", "synth", "min_count"});
    if (d.contains("path") && d.contains("synth")) throw ConfigError("data: give either path or synth, not both");
    if (d.contains("path")) c.data.path = d["path"].get<std::string>();
    if (d.contains("synth")) c.data.synth = synth_from_json(d["synth"]);
    read(d, "min_count", c.data.min_count, "data");
  }

  if (j.contains("model")) {
    const auto& m = j["model"];
    for (const char* derived : {"vocab_size", "feature_dim"})
      if (m.contains(derived)) throw ConfigError(std::string("model.") + derived + " is derived from the data");
    auto merged = Json(c.model.to_json());
    for (const auto& [k, v] : m.items()) merged[k] = v;
    try {
      c.model = model::ModelConfig::from_json(merged);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }

  if (j.contains("train")) {
    const auto& t = j["train"];
    only_keys(t, "train", {"objective", "masks", "lr", "batch", "steps", "seed", "grad_clip", "dev_limit"});
    if (t.contains("objective")) {
      const auto o = model::parse_objective(t["objective"].get<std::string>());
      if (!o) throw ConfigError("train.objective must be eq1 or eq2");
      c.train.objective = *o;
    }
    if (t.contains("masks")) {
      c.train.schedule.clear();
      for (const auto& m : t["masks"]) {
        if (m.is_string()) {
          c.train.schedule.push_back({read_mask(m, "train.masks"), 1.0});
          continue;
        }
        only_keys(m, "train.masks[]", {"mask", "weight"});
        model::MaskChoice choice{read_mask(m.at("mask"), "train.masks"), 1.0};
        read(m, "weight", choice.weight, "train.masks[]");
        c.train.schedule.push_back(choice);
      }
    }
    read(t, "lr", c.train.lr, "train");
    read(t, "batch", c.train.batch_size, "train");
    read(t, "steps", c.train.steps, "train");
    read(t, "seed", c.train.seed, "train");
    read(t, "grad_clip", c.train.grad_clip, "train");
    read(t, "dev_limit", c.train.dev_limit, "train");
  }

  if (j.contains("decode")) {
    const auto& d = j["decode"];
    only_keys(d, "decode", {"method", "p", "beam_size", "n", "max_new_tokens", "seed", "mask",
                            "generate_event_place", "split", "limit"});
    auto& dc = c.decode.config;
    if (d.contains("method")) {
      const auto m = decode::parse_method(d["method"].get<std::string>());
      if (!m) throw ConfigError("decode.method must be nucleus, beam or greedy");
      dc.method = *m;
    }
    read(d, "p", dc.p, "decode");
    read(d, "beam_size", dc.beam_size, "decode");
    read(d, "n", dc.n, "decode");
    read(d, "max_new_tokens", dc.max_new_tokens, "decode");
    read(d, "seed", dc.seed, "decode");
    if (d.contains("mask")) dc.mask = read_mask(d["mask"], "decode.mask");
    read(d, "generate_event_place", dc.generate_event_place, "decode");
    c.decode.split = read_split(d, "split", c.decode.split, "decode");
    read(d, "limit", c.decode.limit, "decode");
  }

  if (j.contains("eval")) {
    const auto& e = j["eval"];
    only_keys(e, "eval", {"metrics", "acc_k", "seed", "same_relation", "mask", "split", "limit"});
    read(e, "metrics", c.eval.metrics, "eval");
    for (const auto& m : c.eval.metrics)
      if (std::find(known_metrics().begin(), known_metrics().end(), m) == known_metrics().end())
        throw ConfigError("eval.metrics: unknown metric '" + m + "'");
    read(e, "acc_k", c.eval.acc.k, "eval");
    read(e, "seed", c.eval.acc.seed, "eval");
    read(e, "same_relation", c.eval.acc.same_relation, "eval");
    if (e.contains("mask")) c.eval.mask = read_mask(e["mask"], "eval.mask");
    c.eval.split = read_split(e, "split", c.eval.split, "eval");
    read(e, "limit", c.eval.limit, "eval");
  }

  if (j.contains("ablate")) {
    const auto& a = j["ablate"];
    only_keys(a, "ablate", {"seeds", "rank_limit", "generation_limit"});
    read(a, "seeds", c.ablate.seeds, "ablate");
    read(a, "rank_limit", c.ablate.rank_limit, "ablate");
    read(a, "generation_limit", c.ablate.generation_limit, "ablate");
    if (c.ablate.seeds.empty()) throw ConfigError("ablate.seeds is empty");
  }

  try {
    c.train.validate();
    c.decode.config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

OJson RunConfig::to_json() const {
  OJson j;
  OJson d;
  if (data.path) d["path"] = *data.path;
  else d["synth"] = synth_to_json(data.synth);
  d["min_count"] = data.min_count;
  j["data"] = d;

  auto m = model.to_json();
  m.erase("vocab_size");
  m.erase("feature_dim");
  j["model"] = m;

  OJson t;
  t["objective"] = model::objective_name(train.objective);
  auto masks = OJson::array();
  for (const auto& s : train.schedule) masks.push_back({{"mask", s.mask.name()}, {"weight", s.weight}});
  t["masks"] = masks;
  t["lr"] = train.lr;
  t["batch"] = train.batch_size;
  t["steps"] = train.steps;
  t["seed"] = train.seed;
  t["grad_clip"] = train.grad_clip;
  t["dev_limit"] = train.dev_limit;
  j["train"] = t;

  const auto& dc = decode.config;
  j["decode"] = {{"method", decode::method_name(dc.method)},
                 {"p", dc.p},
                 {"beam_size", dc.beam_size},
                 {"n", dc.n},
                 {"max_new_tokens", dc.max_new_tokens},
                 {"seed", dc.seed},
                 {"mask", dc.mask.name()},
                 {"generate_event_place", dc.generate_event_place},
                 {"split", graph::split_name(decode.split)},
                 {"limit", decode.limit}};

  j["eval"] = {{"metrics", eval.metrics.empty() ? known_metrics() : eval.metrics},
               {"acc_k", eval.acc.k},
               {"seed", eval.acc.seed},
               {"same_relation", eval.acc.same_relation},
               {"mask", eval.mask.name()},
               {"split", graph::split_name(eval.split)},
               {"limit", eval.limit}};

  j["ablate"] = {{"seeds", ablate.seeds}, {"rank_limit", ablate.rank_limit}, {"generation_limit", ablate.generation_limit}};
  return j;
}

void RunConfig::apply_seed(std::uint64_t seed) {
  data.synth.seed = seed;
  train.seed = seed;
  decode.config.seed = seed;
  eval.acc.seed = seed;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return RunConfig::from_json(j);
}

}  // namespace vcg::cli
