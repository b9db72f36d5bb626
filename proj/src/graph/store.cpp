#include "vcg/graph/store.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vcg/util/atomic_file.hpp"
#include "vcg/util/rng.hpp"
#include "vcg/util/tensor_file.hpp"

namespace vcg::graph {

using ojson = nlohmann::ordered_json;

namespace {

std::string event_locator(const std::string& scene_id, std::size_t event_pos) {
  return scene_id + "/event[" + std::to_string(event_pos) + "]";
}

std::string image_tensor_name(const std::string& scene_id) { return scene_id + "/image"; }
std::string person_tensor_name(const std::string& scene_id, PersonTag tag) {
  return scene_id + "/person" + std::to_string(tag.index);
}

void reject_unknown_keys(const ojson& obj, std::initializer_list<std::string_view> allowed,
                         const std::string& where) {
  for (const auto& [key, _] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw CorpusError(where + ": unknown key \"" + key + "\"");
}

std::vector<float> to_floats(const ojson& arr, const std::string& where) {
  if (!arr.is_array()) throw CorpusError(where + ": expected an array of numbers");
  std::vector<float> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw CorpusError(where + ": non-numeric feature value");
    out.push_back(static_cast<float>(v.get<double>()));
  }
  return out;
}

ojson from_floats(const std::vector<float>& v) {
  ojson arr = ojson::array();
  for (float f : v) arr.push_back(static_cast<double>(f));
  return arr;
}

template <class Map>
void bump(Map& m, std::size_t key) {
  ++m[key];
}

}  // namespace

std::vector<Violation> validate(const Corpus& corpus, const ValidateOptions& options) {
  std::vector<Violation> out;
  const std::size_t dim = corpus.feature_dim();
  for (const auto& scene : corpus.scenes()) {
    const auto& id = scene.scene_id;
    if (scene.image_feature.size() != dim)
      out.push_back({id, "feature_dim", "image feature has " + std::to_string(scene.image_feature.size()) +
                                            " values, corpus dimension is " + std::to_string(dim)});
    if (scene.visual_count() > options.max_visual_features)
      out.push_back({id, "max_visual_features",
                     std::to_string(scene.visual_count()) + " visual features exceed the limit of " +
                         std::to_string(options.max_visual_features)});
    std::set<int> tags;
    for (const auto& p : scene.persons) {
      if (p.tag.index < 1 || p.tag.index > kMaxPersonTag)
        out.push_back({id, "person_tag_range", person_token(p.tag) + " outside 1.." + std::to_string(kMaxPersonTag)});
      if (!tags.insert(p.tag.index).second)
        out.push_back({id, "person_tag_unique", person_token(p.tag) + " appears twice"});
      if (p.feature.size() != dim)
        out.push_back({id + "/" + person_token(p.tag), "feature_dim",
                       "person feature has " + std::to_string(p.feature.size()) + " values"});
    }
    if (!tags.empty() && (*tags.begin() != 1 || *tags.rbegin() != static_cast<int>(tags.size())))
      out.push_back({id, "person_tags_contiguous", "person tags are not numbered 1..k"});
  }

  std::unordered_map<std::string, std::size_t> per_scene_pos;
  for (const auto& ev : corpus.events()) {
    const std::size_t pos = per_scene_pos[ev.scene_id]++;
    const auto loc = event_locator(ev.scene_id, pos);
    const VisualScene* scene = corpus.find_scene(ev.scene_id);
    if (!scene) {
      out.push_back({loc, "event_scene_exists", "scene " + ev.scene_id + " not in corpus"});
      continue;
    }
    const auto& rec = ev.record;
    const auto mentions = person_mentions(rec.event_text);
    if (!rec.event_text.empty() && mentions.empty())
      out.push_back({loc, "event_mentions_person", "event text mentions no person tag"});
    if (rec.event_text.empty() && !options.allow_empty_inferences)
      out.push_back({loc, "event_mentions_person", "event text is empty"});
    for (auto tag : mentions)
      if (!scene->find_person(tag))
        out.push_back({loc, "mention_in_scene", person_token(tag) + " not present in scene " + ev.scene_id});
    if (!scene->find_person(rec.subject))
      out.push_back({loc, "subject_in_scene", "subject " + person_token(rec.subject) + " not in scene"});
    if (rec.place_text.empty()) out.push_back({loc, "place_nonempty", "place text is empty"});
    if (rec.inferences.empty() && !options.allow_empty_inferences)
      out.push_back({loc, "inferences_nonempty", "event has no inferences"});
    for (std::size_t i = 0; i < rec.inferences.size(); ++i) {
      const auto& inf = rec.inferences[i];
      const auto iloc = loc + "/inference[" + std::to_string(i) + "]";
      if (split_words(inf.text).empty()) out.push_back({iloc, "inference_nonempty", "inference text is empty"});
      for (auto tag : person_mentions(inf.text))
        if (!scene->find_person(tag))
          out.push_back({iloc, "mention_in_scene", person_token(tag) + " not present in scene " + ev.scene_id});
    }
  }
  return out;
}

std::string dump_corpus_impl(const Corpus& corpus, const std::optional<std::string>& sidecar) {
  std::ostringstream out;
  ojson header;
  header["format"] = "vcg";
  header["version"] = 1;
  header["feature_dim"] = corpus.feature_dim();
  if (sidecar) header["feature_file"] = *sidecar;
  out << header.dump() << '\n';

  std::unordered_map<std::string, std::vector<const EventRecord*>> grouped;
  for (const auto& ev : corpus.events()) grouped[ev.scene_id].push_back(&ev.record);

  for (const auto& scene : corpus.scenes()) {
    ojson line;
    line["scene_id"] = scene.scene_id;
    if (!sidecar) line["image_feature"] = from_floats(scene.image_feature);
    ojson persons = ojson::array();
    for (const auto& p : scene.persons) {
      ojson jp;
      jp["tag"] = p.tag.index;
      if (!sidecar) jp["feature"] = from_floats(p.feature);
      persons.push_back(std::move(jp));
    }
    line["persons"] = std::move(persons);
    line["split"] = split_name(corpus.split_of(scene.scene_id));
    ojson events = ojson::array();
    for (const auto* rec : grouped[scene.scene_id]) {
      ojson je;
      je["event"] = rec->event_text;
      je["place"] = rec->place_text;
      je["subject"] = rec->subject.index;
      ojson infs = ojson::array();
      for (const auto& inf : rec->inferences) {
        ojson ji;
        ji["relation"] = relation_name(inf.relation);
        ji["text"] = inf.text;
        infs.push_back(std::move(ji));
      }
      je["inferences"] = std::move(infs);
      events.push_back(std::move(je));
    }
    line["events"] = std::move(events);
    out << line.dump() << '\n';
  }
  return out.str();
}

std::string dump_corpus(const Corpus& corpus) { return dump_corpus_impl(corpus, std::nullopt); }

Corpus parse_corpus(std::string_view text, const std::filesystem::path& base_dir,
                    const ValidateOptions& options) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  Corpus corpus;
  std::optional<TensorFile> sidecar;

  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusError(where + ": malformed JSON: " + e.what());
    }
    if (!j.is_object()) throw CorpusError(where + ": expected a JSON object");

    try {
      if (!have_header) {
        reject_unknown_keys(j, {"format", "version", "feature_dim", "feature_file"}, where);
        if (j.value("format", "") != "vcg") throw CorpusError(where + ": header format must be \"vcg\"");
        if (j.value("version", 0) != 1) throw CorpusError(where + ": unsupported version");
        corpus.set_feature_dim(j.at("feature_dim").get<std::size_t>());
        if (j.contains("feature_file")) {
          const auto path = base_dir / j["feature_file"].get<std::string>();
          sidecar = decode_tensor_file(read_file(path));
        }
        have_header = true;
        continue;
      }

      reject_unknown_keys(j, {"scene_id", "image_feature", "persons", "split", "events"}, where);
      VisualScene scene;
      scene.scene_id = j.at("scene_id").get<std::string>();
      const std::string sw = where + " (" + scene.scene_id + ")";
      auto sidecar_vector = [&](const std::string& name) {
        if (!sidecar) throw CorpusError(sw + ": missing inline features and no feature_file");
        const auto* rec = sidecar->find(name);
        if (!rec) throw CorpusError(sw + ": feature tensor " + name + " not in sidecar");
        return rec->data;
      };
      scene.image_feature = j.contains("image_feature") ? to_floats(j["image_feature"], sw)
                                                        : sidecar_vector(image_tensor_name(scene.scene_id));
      for (const auto& jp : j.value("persons", ojson::array())) {
        reject_unknown_keys(jp, {"tag", "feature"}, sw);
        Person p;
        p.tag = PersonTag{jp.at("tag").get<int>()};
        p.feature = jp.contains("feature") ? to_floats(jp["feature"], sw)
                                           : sidecar_vector(person_tensor_name(scene.scene_id, p.tag));
        scene.persons.push_back(std::move(p));
      }
      const auto split_text = j.value("split", std::string("train"));
      const auto split = parse_split(split_text);
      if (!split) throw CorpusError(sw + ": unknown split \"" + split_text + "\"");
      const std::string scene_id = scene.scene_id;
      if (corpus.find_scene(scene_id)) throw CorpusError(sw + ": duplicate scene_id");
      corpus.add_scene(std::move(scene), *split);

      for (const auto& je : j.value("events", ojson::array())) {
        reject_unknown_keys(je, {"event", "place", "subject", "inferences"}, sw);
        EventRecord rec;
        rec.event_text = je.at("event").get<std::string>();
        rec.place_text = je.at("place").get<std::string>();
        rec.subject = PersonTag{je.at("subject").get<int>()};
        for (const auto& ji : je.value("inferences", ojson::array())) {
          reject_unknown_keys(ji, {"relation", "text"}, sw);
          const auto rel_text = ji.at("relation").get<std::string>();
          const auto rel = parse_relation(rel_text);
          if (!rel) throw CorpusError(sw + ": unknown relation \"" + rel_text + "\"");
          rec.inferences.push_back({*rel, ji.at("text").get<std::string>(), rec.subject});
        }
        corpus.add_event(scene_id, std::move(rec));
      }
    } catch (const nlohmann::json::exception& e) {
      throw CorpusError(where + ": " + e.what());
    }
  }
  if (!have_header) throw CorpusError("corpus has no header line");

  const auto violations = validate(corpus, options);
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw CorpusError("invalid corpus: " + v.locator + ": " + v.rule + ": " + v.detail +
                      (violations.size() > 1 ? " (+" + std::to_string(violations.size() - 1) + " more)" : ""));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, const ValidateOptions& options) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw CorpusError(e.what());
  }
  return parse_corpus(text, path.parent_path(), options);
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path, const SaveOptions& options) {
  if (options.feature_sidecar) {
    TensorFile tf;
    tf.config_json = R"({"kind":"features","feature_dim":)" + std::to_string(corpus.feature_dim()) + "}";
    const auto d = static_cast<std::uint32_t>(corpus.feature_dim());
    for (const auto& scene : corpus.scenes()) {
      tf.records.push_back({image_tensor_name(scene.scene_id), {d}, scene.image_feature});
      for (const auto& p : scene.persons)
        tf.records.push_back({person_tensor_name(scene.scene_id, p.tag), {d}, p.feature});
    }
    write_file_atomic(path.parent_path() / *options.feature_sidecar, encode_tensor_file(tf));
  }
  write_file_atomic(path, dump_corpus_impl(corpus, options.feature_sidecar));
}

StatsReport compute_stats(const Corpus& corpus, std::optional<Split> split, std::size_t top_k) {
  StatsReport r;
  r.split = split ? std::string(split_name(*split)) : "all";
  const auto idx = corpus.event_indices(split);
  if (idx.empty()) throw CorpusError("compute_stats: split \"" + r.split + "\" has no events");

  for (const auto& scene : corpus.scenes())
    if (!split || corpus.split_of(scene.scene_id) == *split) ++r.scenes;
  r.events = idx.size();

  std::array<std::map<std::string, std::size_t>, 3> bigrams;
  std::array<bool, 3> seen_any{};
  double persons_event = 0, persons_inf = 0, words_event = 0, words_place = 0, words_inf = 0;
  for (auto i : idx) {
    const auto& rec = corpus.events()[i].record;
    const auto ew = split_words(rec.event_text).size();
    const auto pw = split_words(rec.place_text).size();
    words_event += static_cast<double>(ew);
    words_place += static_cast<double>(pw);
    bump(r.event_length_histogram, ew);
    bump(r.place_length_histogram, pw);
    persons_event += static_cast<double>(person_mentions(rec.event_text).size());

    std::array<std::size_t, 3> counts{};
    for (const auto& inf : rec.inferences) {
      const auto k = static_cast<std::size_t>(inf.relation);
      ++counts[k];
      const auto words = split_words(inf.text);
      words_inf += static_cast<double>(words.size());
      persons_inf += static_cast<double>(person_mentions(inf.text).size());
      bump(r.inference_length_histogram, words.size());
      bump(r.relations[k].length_histogram, words.size());
      if (words.size() >= 2) ++bigrams[k][std::string(words[0]) + " " + std::string(words[1])];
    }
    for (std::size_t k = 0; k < 3; ++k) {
      auto& rs = r.relations[k];
      rs.total += counts[k];
      rs.min_per_event = seen_any[k] ? std::min(rs.min_per_event, counts[k]) : counts[k];
      rs.max_per_event = seen_any[k] ? std::max(rs.max_per_event, counts[k]) : counts[k];
      seen_any[k] = true;
    }
    r.inferences += rec.inferences.size();
  }

  const auto n_events = static_cast<double>(r.events);
  for (std::size_t k = 0; k < 3; ++k) {
    auto& rs = r.relations[k];
    rs.mean_per_event = static_cast<double>(rs.total) / n_events;
    std::vector<std::pair<std::string, std::size_t>> sorted(bigrams[k].begin(), bigrams[k].end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (sorted.size() > top_k) sorted.resize(top_k);
    rs.top_start_bigrams = std::move(sorted);
  }
  r.events_per_scene = r.scenes ? n_events / static_cast<double>(r.scenes) : 0.0;
  r.persons_in_event = persons_event / n_events;
  r.words_event = words_event / n_events;
  r.words_place = words_place / n_events;
  if (r.inferences) {
    r.persons_in_inference = persons_inf / static_cast<double>(r.inferences);
    r.words_inference = words_inf / static_cast<double>(r.inferences);
  }
  return r;
}

std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& fractions) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("split fraction out of range [0,1]");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % 3]];
  while (assigned > n) {  // only reachable through the +1e-9 guard on exact integers
    for (auto& c : counts)
      if (c > 0 && assigned > n) --c, --assigned;
  }
  return counts;
}

Corpus split_corpus(const Corpus& corpus, const std::array<double, 3>& fractions, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& s : corpus.scenes()) ids.push_back(s.scene_id);
  std::sort(ids.begin(), ids.end());
  const auto counts = apportion(ids.size(), fractions);
  Rng rng(seed);
  rng.shuffle(ids.begin(), ids.end());
  Corpus out = corpus;
  std::size_t i = 0;
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t c = 0; c < counts[k]; ++c, ++i) out.set_split(ids[i], static_cast<Split>(k));
  return out;
}

}  // namespace vcg::graph
