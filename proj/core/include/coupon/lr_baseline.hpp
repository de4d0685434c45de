#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "coupon/data.hpp"
#include "coupon/param_store.hpp"

namespace coupon::lr {

// Session-level logistic regression over summary features: normalized action
// histogram, mean dwell, log session length, one-hot static codes, coupon
// amount. Two independent logistic heads (stay, pay) share the feature vector.
struct LrConfig {
  int action_vocab = 14;
  int static_slots = 89;
  int static_buckets = 8;
  std::vector<Money> coupon_amounts_cents = {0, 100, 200, 300, 500};

  int feature_dim() const;
  void validate() const;
};

// Writes the feature vector for one sample; out.size() must equal feature_dim().
void featurize(const LrConfig& cfg, const FeatureTuple& sample,
               std::span<double> out);

nn::ParamStore make_params(const LrConfig& cfg, std::uint64_t seed);

// Mean BCE over the indexed samples on both heads; accumulates gradients
// (scaled by 1/batch) into `grads` when non-null.
BatchLoss forward_backward(const LrConfig& cfg, const nn::ParamStore& params,
                           std::span<const LabeledSample> samples,
                           std::span<const std::size_t> index,
                           nn::Gradients* grads);
BatchLoss forward_backward(const LrConfig& cfg, const nn::ParamStore& params,
                           std::span<const LabeledSample> samples,
                           nn::Gradients* grads);

class LrModel {
 public:
  static LrModel init(const LrConfig& cfg, std::uint64_t seed);
  LrModel(LrConfig cfg, nn::ParamStore params);

  const LrConfig& config() const { return cfg_; }
  const nn::ParamStore& params() const { return params_; }
  nn::ParamStore& params() { return params_; }

  IntentScores score(const FeatureTuple& sample) const;
  // Scores for every menu amount; only the coupon feature changes.
  std::vector<IntentScores> score_menu(const FeatureTuple& sample) const;

 private:
  LrConfig cfg_;
  nn::ParamStore params_;
};

}  // namespace coupon::lr
