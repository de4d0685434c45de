#include "coupon/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "coupon/errors.hpp"
#include "coupon/rng.hpp"

namespace coupon::train {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train config: epochs must be >= 0");
  if (batch_size <= 0) throw ConfigError("train config: batch_size must be > 0");
  if (!(max_grad_norm > 0.0)) {
    throw ConfigError("train config: max_grad_norm must be > 0");
  }
  adam.validate();
}

Split split_by_user(std::span<const LabeledSample> data, double val_fraction,
                    std::uint64_t seed) {
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw ConfigError("split_by_user: val_fraction must be in [0, 1)");
  }
  Split split;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (in_validation_split(data[i].user_id, seed, val_fraction)) {
      split.validation.push_back(i);
    } else {
      split.train.push_back(i);
    }
  }
  return split;
}

std::vector<EpochStats> run_training(nn::ParamStore& params, const BatchFn& fn,
                                     std::span<const std::size_t> train_index,
                                     const TrainConfig& cfg) {
  cfg.validate();
  if (train_index.empty()) throw ContractError("run_training: empty train set");
  std::vector<std::size_t> order(train_index.begin(), train_index.end());
  const std::size_t n = order.size();
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

  std::vector<EpochStats> curve;
  curve.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(Rng::mix(cfg.shuffle_seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);

    BatchLoss epoch_loss;
    nn::Gradients grads = nn::Gradients::zeros_like(params);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      grads.clear();
      const BatchLoss loss =
          fn(std::span<const std::size_t>(order.data() + start, len), &grads);
      if (!std::isfinite(loss.total())) {
        throw TrainingError("training diverged: non-finite batch loss");
      }
      nn::clip_gradient_norm(grads, cfg.max_grad_norm);
      nn::adam_step(params, grads, cfg.adam);
      const double w = static_cast<double>(len);
      epoch_loss.stay += loss.stay * w;
      epoch_loss.pay += loss.pay * w;
    }
    epoch_loss.stay /= static_cast<double>(n);
    epoch_loss.pay /= static_cast<double>(n);
    curve.push_back({epoch, epoch_loss});
  }
  return curve;
}

std::vector<EpochStats> train_iidn(iidn::IidnModel& model,
                                   std::span<const LabeledSample> data,
                                   std::span<const std::size_t> train_index,
                                   const TrainConfig& cfg) {
  auto fn = [&](std::span<const std::size_t> batch, nn::Gradients* grads) {
    return iidn::forward_backward(model.config(), model.params(), data, batch,
                                  grads);
  };
  return run_training(model.params(), fn, train_index, cfg);
}

std::vector<EpochStats> train_lr(lr::LrModel& model,
                                 std::span<const LabeledSample> data,
                                 std::span<const std::size_t> train_index,
                                 const TrainConfig& cfg) {
  auto fn = [&](std::span<const std::size_t> batch, nn::Gradients* grads) {
    return lr::forward_backward(model.config(), model.params(), data, batch,
                                grads);
  };
  return run_training(model.params(), fn, train_index, cfg);
}

void write_loss_curve_csv(const std::string& path,
                          std::span<const EpochStats> curve) {
  std::ofstream out(path);
  if (!out) throw IoError("loss curve: cannot open " + path);
  out << "# schema: loss-curve/v1\n";
  out << "epoch,loss_stay,loss_pay,loss_total\n";
  char buf[128];
  for (const auto& row : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", row.epoch,
                  row.loss.stay, row.loss.pay, row.loss.total());
    out << buf;
  }
  if (!out) throw IoError("loss curve: write failed for " + path);
}

}  // namespace coupon::train
