#pragma once

// Multi-step training: relative L2 losses, AdamW, step learning-rate
// schedule and global gradient clipping.

#include "isfno/dataset.hpp"
#include "isfno/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace isfno {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double lr = 0.0025;
  double weight_decay = 1e-6;
  double eps = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t schedule_step = 100;
  double schedule_factor = 0.5;
  /// Global gradient norm cap; <= 0 disables clipping.
  double clip_norm = 10.0;
  std::size_t horizon = 20;
  std::uint64_t seed = 0;
  /// Independent tapes per batch, reduced in shard order.
  std::size_t shards = 1;
  /// Unroll single_step n times instead of the multi-step forward.
  bool recurrent = false;

  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> lr;
  double wall_seconds = 0.0;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  std::optional<std::filesystem::path> checkpoint;
};

/// Per-sample ||a - b|| / ||b|| over all non-batch axes, shape (B).
Var relative_l2_per_sample(Var a, const Tensor &b);
/// Batch mean of relative_l2_per_sample.
Var relative_l2(Var a, const Tensor &b);
double relative_l2(const Tensor &a, const Tensor &b);

/// Targets (B, n, N..., C); the model horizon must equal n.
Var loss_multistep(const Bound &p, const Tensor &inputs, const Tensor &targets);
/// single_step composed n times on the tape.
Var loss_recurrent(const Bound &p, const Tensor &inputs, const Tensor &targets);

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;
};

AdamState adam_init(const Model &model);
/// One AdamW update at learning rate `lr`. Throws NumericalError on a
/// non-finite gradient.
void adam_step(std::vector<Parameter> &params, const std::vector<Tensor> &grads, AdamState &state,
               const TrainConfig &cfg, double lr);

/// Rescales in place when the global norm exceeds max_norm; returns the norm
/// before clipping.
double clip_gradients(std::vector<Tensor> &grads, double max_norm);

double lr_at(std::size_t epoch, const TrainConfig &cfg);

/// Loss value and parameter gradients of one batch.
struct BatchResult {
  double loss;
  std::vector<Tensor> grads;
};
BatchResult batch_gradients(const Model &model, const Tensor &inputs, const Tensor &targets,
                            const TrainConfig &cfg);

/// Mean per-sample loss over the given pairs without gradients.
double evaluate_loss(const Model &model, const Dataset &ds, std::span<const PairIndex> pairs,
                     const TrainConfig &cfg);

using EpochCallback = std::function<void(std::size_t epoch, double train, double val)>;

/// Trains in place; on return the model holds the best-validation parameters,
/// which are also written to `checkpoint` when given.
TrainReport train(Model &model, const Dataset &ds, const TrainConfig &cfg,
                  const std::optional<std::filesystem::path> &checkpoint = std::nullopt,
                  const EpochCallback &on_epoch = {});

/// CSV with header epoch,train_loss,val_loss,lr and one row per epoch.
void write_report_csv(const TrainReport &report, const std::filesystem::path &path);

} // namespace isfno
