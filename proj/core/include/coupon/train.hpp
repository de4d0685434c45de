#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "coupon/data.hpp"
#include "coupon/iidn.hpp"
#include "coupon/lr_baseline.hpp"
#include "coupon/param_store.hpp"

namespace coupon::train {

struct TrainConfig {
  int epochs = 4;
  int batch_size = 32;
  // Global L2 clip applied to each batch gradient before the Adam step; long
  // sessions produce violent early transients that otherwise poison the
  // second-moment estimates. Set to infinity to disable.
  double max_grad_norm = 5.0;
  nn::AdamConfig adam;
  std::uint64_t shuffle_seed = 1;

  // ConfigError unless epochs >= 0, batch_size > 0 and max_grad_norm > 0.
  void validate() const;
};

// Disjoint train/validation index sets, split by user id hash so the same
// user never appears on both sides.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};
Split split_by_user(std::span<const LabeledSample> data, double val_fraction,
                    std::uint64_t seed);

struct EpochStats {
  int epoch = 0;
  BatchLoss loss;  // sample-weighted mean training loss over the epoch
};

// Generic minibatch loop: shuffles the index each epoch (seeded), calls the
// batch closure, applies one Adam step per batch. TrainingError on non-finite
// loss. With epochs == 0 the parameters are left untouched.
using BatchFn =
    std::function<BatchLoss(std::span<const std::size_t>, nn::Gradients*)>;
std::vector<EpochStats> run_training(nn::ParamStore& params, const BatchFn& fn,
                                     std::span<const std::size_t> train_index,
                                     const TrainConfig& cfg);

std::vector<EpochStats> train_iidn(iidn::IidnModel& model,
                                   std::span<const LabeledSample> data,
                                   std::span<const std::size_t> train_index,
                                   const TrainConfig& cfg);
std::vector<EpochStats> train_lr(lr::LrModel& model,
                                 std::span<const LabeledSample> data,
                                 std::span<const std::size_t> train_index,
                                 const TrainConfig& cfg);

void write_loss_curve_csv(const std::string& path,
                          std::span<const EpochStats> curve);

}  // namespace coupon::train
