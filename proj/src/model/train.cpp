#include "vcg/model/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "vcg/ad/optim.hpp"
#include "vcg/util/rng.hpp"

namespace vcg::model {

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (schedule.empty()) bad("mask schedule is empty");
  double total = 0;
  for (const auto& c : schedule) {
    if (!(c.weight >= 0.0)) bad("mask weights must be non-negative");
    total += c.weight;
  }
  if (!(total > 0.0)) bad("mask weights sum to zero");
  if (!(lr >= 0.0) || !std::isfinite(lr)) bad("lr must be finite and non-negative");
  if (batch_size == 0) bad("batch_size must be positive");
  if (!(grad_clip >= 0.0)) bad("grad_clip must be non-negative");
}

nlohmann::ordered_json TrainReport::to_json() const {
  nlohmann::ordered_json j;
  j["steps"] = steps;
  j["instances"] = instances;
  j["initial_loss"] = initial_loss;
  j["final_loss"] = final_loss;
  j["dev_loss"] = std::isfinite(dev_loss) ? nlohmann::ordered_json(dev_loss) : nlohmann::ordered_json(nullptr);
  j["seconds"] = seconds;
  j["loss_curve"] = loss_curve;
  return j;
}

std::vector<TrainingInstance> training_instances(const graph::Corpus& corpus, graph::Split split) {
  std::vector<TrainingInstance> out;
  for (auto e : corpus.event_indices(split))
    for (std::size_t k = 0; k < corpus.events()[e].record.inferences.size(); ++k) out.push_back({e, k});
  return out;
}

AssembledInput assemble_instance(const ModelConfig& config, const text::Vocab& vocab, const graph::Corpus& corpus,
                                 const TrainingInstance& instance, const ModalityMask& mask) {
  const auto& ev = corpus.events().at(instance.event_index);
  const auto& inf = ev.record.inferences.at(instance.inference_index);
  const auto* scene = corpus.find_scene(ev.scene_id);
  const auto ids = text::encode(vocab, inf.text);
  return assemble(config, vocab, *scene, &ev.record, inf.relation, &ids, mask);
}

double evaluate_loss(const ModelParams<float>& params, const text::Vocab& vocab, const graph::Corpus& corpus,
                     std::span<const TrainingInstance> instances, Objective objective, const ModalityMask& mask,
                     std::size_t batch_size) {
  const auto parts = PartSelection::for_objective(objective);
  double total = 0;
  std::size_t tokens = 0;
  for (std::size_t b = 0; b < instances.size(); b += batch_size) {
    std::vector<AssembledInput> batch;
    for (std::size_t i = b; i < std::min(instances.size(), b + batch_size); ++i) {
      batch.push_back(assemble_instance(params.config, vocab, corpus, instances[i], mask));
      const auto& in = batch.back();
      const auto t = in.targets(parts.event, parts.place, parts.inference);
      tokens += static_cast<std::size_t>(std::count_if(t.begin(), t.end(), [](int v) { return v >= 0; }));
    }
    Tape<float> tape;
    tape.set_check_nan(false);
    total += static_cast<double>(batch_loss(tape, params, batch, parts, Reduction::kSum).item());
  }
  return tokens == 0 ? std::numeric_limits<double>::quiet_NaN() : total / static_cast<double>(tokens);
}

TrainReport train(ModelParams<float>& params, const text::Vocab& vocab, const graph::Corpus& corpus,
                  const TrainConfig& config, const ProgressFn& progress) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const auto instances = training_instances(corpus, graph::Split::kTrain);
  if (instances.empty()) throw std::invalid_argument("train: corpus has no training instances");

  auto tensors = params.tensors();
  for (auto* t : tensors)
    if (!t->requires_grad()) t->set_requires_grad(true);
  ad::AdamState adam(tensors, ad::AdamHyper{config.lr, 0.9, 0.999, 1e-8});

  std::vector<double> weights;
  for (const auto& c : config.schedule) weights.push_back(c.weight);
  const auto parts = PartSelection::for_objective(config.objective);

  Rng order_rng(config.seed, 1);
  Rng mask_rng(config.seed, 2);
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), 0);
  order_rng.shuffle(order.begin(), order.end());
  std::size_t cursor = 0;

  TrainReport report;
  report.instances = instances.size();
  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<AssembledInput> batch;
    batch.reserve(config.batch_size);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        order_rng.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      const auto& mask = config.schedule[weights.size() == 1 ? 0 : mask_rng.categorical(weights)].mask;
      batch.push_back(assemble_instance(params.config, vocab, corpus, instances[order[cursor++]], mask));
    }
    for (auto* t : tensors) t->zero_grad();
    Tape<float> tape;
    tape.set_check_nan(false);
    auto loss = batch_loss(tape, params, batch, parts, Reduction::kMean);
    const double value = loss.item();
    if (!std::isfinite(value))
      throw TrainDivergence("loss became " + std::to_string(value) + " at step " + std::to_string(step) +
                            " (lr " + std::to_string(config.lr) + ")");
    tape.backward(loss);
    if (config.grad_clip > 0) {
      double sq = 0;
      for (auto* t : tensors)
        for (float g : t->grad()) sq += static_cast<double>(g) * g;
      const double norm = std::sqrt(sq);
      if (norm > config.grad_clip) {
        const auto s = static_cast<float>(config.grad_clip / norm);
        for (auto* t : tensors)
          for (auto& g : t->grad()) g *= s;
      }
    }
    adam.step(tensors);
    report.loss_curve.push_back(value);
    if (progress) progress(step, value);
  }
  report.steps = config.steps;
  if (!report.loss_curve.empty()) {
    report.initial_loss = report.loss_curve.front();
    const std::size_t tail = std::max<std::size_t>(1, report.loss_curve.size() / 10);
    report.final_loss = std::accumulate(report.loss_curve.end() - static_cast<std::ptrdiff_t>(tail),
                                        report.loss_curve.end(), 0.0) /
                        static_cast<double>(tail);
  }
  report.dev_loss = std::numeric_limits<double>::quiet_NaN();
  if (config.dev_limit > 0) {
    auto dev = training_instances(corpus, graph::Split::kDev);
    if (dev.size() > config.dev_limit) dev.resize(config.dev_limit);
    if (!dev.empty())
      report.dev_loss = evaluate_loss(params, vocab, corpus, dev, config.objective, config.schedule.front().mask);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace vcg::model
