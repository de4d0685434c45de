// Instantaneous intent detection network: embedding lookups, a stacked
// LSTM over the behavior sequence, attention pooling, an MLP encoder over
// (sequence, portrait, coupon) and a two-step decoder that factors the pay
// probability as p_pay = p_stay * p_pay_given_stay. Backward passes are
// derived by hand; grad_check verifies them against central differences.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coupon/data.hpp"
#include "coupon/param_store.hpp"

namespace coupon::iidn {

// Ablations keep everything else fixed: kSingleLstm drops the second LSTM
// layer, kNonAttention pools with the last output state instead of
// attention, kNonAuxiliary predicts p_pay directly without the stay factor.
enum class Variant { kIidn, kSingleLstm, kNonAttention, kNonAuxiliary };

Variant variant_from_name(const std::string& name);
std::string variant_name(Variant v);

// kLinear scores an output state with w.q + b; kAdditive with v.tanh(Wq + b).
enum class AttentionKind { kLinear, kAdditive };

AttentionKind attention_from_name(const std::string& name);
std::string attention_name(AttentionKind k);

struct IidnConfig {
  Variant variant = Variant::kIidn;
  AttentionKind attention = AttentionKind::kLinear;
  int embed_dim = 32;
  int hidden_dim = 16;
  int enc1_dim = 32;
  int enc2_dim = 16;
  int dec_dim = 16;
  // 14 action categories + dwell = 15 real-time features per event.
  int action_vocab = 14;
  int static_slots = 89;
  int static_buckets = 8;
  int max_seq_len = 100;
  // Ascending dwell-time bucket edges; bucket count = edges + 1. Row 0 of
  // every embedding table is reserved for out-of-vocabulary codes.
  std::vector<double> dwell_edges = {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0};
  std::vector<Money> coupon_amounts_cents = {0, 100, 200, 300, 500};

  int num_layers() const { return variant == Variant::kSingleLstm ? 1 : 2; }
  bool has_attention() const { return variant != Variant::kNonAttention; }
  bool auxiliary() const { return variant != Variant::kNonAuxiliary; }
  int dwell_buckets() const { return static_cast<int>(dwell_edges.size()) + 1; }

  // Index into coupon_amounts_cents; ContractError for unknown amounts.
  int coupon_index(Money cents) const;

  void validate() const;
};

// Equal-mass dwell bucket edges estimated from a sample set (deduplicated,
// so the bucket count may come out smaller than requested).
std::vector<double> dwell_quantile_edges(std::span<const LabeledSample> samples,
                                         int buckets);

// Mean losses over the indexed samples; accumulates analytic gradients
// (scaled by 1/batch) into `grads` when non-null.
BatchLoss forward_backward(const IidnConfig& cfg, nn::ParamStore& params,
                           std::span<const LabeledSample> samples,
                           std::span<const std::size_t> index,
                           nn::Gradients* grads);
BatchLoss forward_backward(const IidnConfig& cfg, nn::ParamStore& params,
                           std::span<const LabeledSample> samples,
                           nn::Gradients* grads);

struct ScoreDetail {
  IntentScores scores;
  std::vector<double> attention;  // per kept event; empty for kNonAttention
};

class IidnModel {
 public:
  // Fresh parameters, U[-1/sqrt(fan_in), 1/sqrt(fan_in)] per tensor.
  static IidnModel init(IidnConfig cfg, std::uint64_t seed);
  IidnModel(IidnConfig cfg, nn::ParamStore params);

  const IidnConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  IntentScores score(const FeatureTuple& features) const;
  ScoreDetail score_detail(const FeatureTuple& features) const;
  // Scores every configured coupon amount, running the sequence and
  // portrait trunk once and swapping only the coupon embedding.
  std::vector<IntentScores> score_menu(const FeatureTuple& features) const;

 private:
  IidnConfig cfg_;
  nn::ParamStore params_;
};

// Registers every tensor the variant needs, in a fixed order.
nn::ParamStore make_params(const IidnConfig& cfg, std::uint64_t seed);

}  // namespace coupon::iidn
