#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "vcg/graph/corpus.hpp"
#include "vcg/model/model.hpp"

namespace vcg::model {

/// A modality mask drawn per training instance with probability proportional to weight.
struct MaskChoice {
  ModalityMask mask;
  double weight = 1.0;
};

struct TrainConfig {
  Objective objective = Objective::kInference;
  std::vector<MaskChoice> schedule{{ModalityMask::full(), 1.0}};
  double lr = 1e-3;
  std::size_t batch_size = 16;
  std::size_t steps = 1000;
  std::uint64_t seed = 0;
  double grad_clip = 0.0;      // global L2 norm, 0 disables
  std::size_t dev_limit = 256; // dev instances scored after training, 0 skips

  void validate() const;
};

struct TrainReport {
  std::vector<double> loss_curve;  // mean token loss per step
  std::size_t steps = 0;
  std::size_t instances = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;  // mean of the last 10% of steps
  double dev_loss = 0.0;    // NaN without dev data
  double seconds = 0.0;

  nlohmann::ordered_json to_json() const;
};

class TrainDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One (event, inference) pair; every inference of every event in the split.
struct TrainingInstance {
  std::size_t event_index = 0;
  std::size_t inference_index = 0;
};

std::vector<TrainingInstance> training_instances(const graph::Corpus& corpus, graph::Split split);

AssembledInput assemble_instance(const ModelConfig& config, const text::Vocab& vocab, const graph::Corpus& corpus,
                                 const TrainingInstance& instance, const ModalityMask& mask);

using ProgressFn = std::function<void(std::size_t step, double loss)>;

/// Minibatch Adam over the train split. Single-threaded and deterministic in
/// config.seed. Throws TrainDivergence when the loss stops being finite.
TrainReport train(ModelParams<float>& params, const text::Vocab& vocab, const graph::Corpus& corpus,
                  const TrainConfig& config, const ProgressFn& progress = {});

/// Mean token loss of the objective's parts over up to `limit` instances.
double evaluate_loss(const ModelParams<float>& params, const text::Vocab& vocab, const graph::Corpus& corpus,
                     std::span<const TrainingInstance> instances, Objective objective, const ModalityMask& mask,
                     std::size_t batch_size = 32);

}  // namespace vcg::model
