#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coupon/data.hpp"
#include "coupon/rng.hpp"

namespace coupon::sim {

// One mixture component of the synthetic marketplace. Latent propensities are
// drawn uniformly from the [lo, hi] ranges; sensitivities are logit shifts
// per currency unit of coupon value.
struct SegmentSpec {
  std::string name;
  double weight = 0.0;
  double stay_base_lo = 0.5, stay_base_hi = 0.5;  // P(stay | no coupon)
  double buy_base_lo = 0.1, buy_base_hi = 0.1;    // P(pay | stay, no coupon)
  double stay_sens_lo = 0.0, stay_sens_hi = 0.0;
  double buy_sens_lo = 0.0, buy_sens_hi = 0.0;
  double intent_rate = 0.2;  // mean share of intent-type events per session
};

struct PopulationSpec {
  int action_vocab = 14;   // actions 0..9 browse-like, 10..13 intent-like
  int static_slots = 89;
  int static_buckets = 8;
  int max_session_len = 100;
  double mean_session_len = 40.0;
  std::vector<Money> menu = {0, 100, 200, 300, 500};
  std::vector<SegmentSpec> segments;

  // Four-segment marketplace the defaults and tests are calibrated against.
  static PopulationSpec builtin();

  // ConfigError unless weights sum to 1 within 1e-9, ranges are ordered,
  // probabilities stay inside (0, 1) and the menu is ascending from 0.
  void validate() const;

  static PopulationSpec from_json(const std::string& text);
  std::string to_json() const;
  static PopulationSpec load_file(const std::string& path);
  void save_file(const std::string& path) const;
};

// Ground-truth response curves; both factors are non-decreasing in the coupon
// amount by construction (sensitivities are non-negative).
struct UserTruth {
  int segment = 0;
  double stay_logit0 = 0.0;
  double stay_sens = 0.0;
  double buy_logit0 = 0.0;  // logit of P(pay | stay) at no coupon
  double buy_sens = 0.0;

  double p_stay(Money amount_cents) const;
  double p_pay_given_stay(Money amount_cents) const;
  double p_pay(Money amount_cents) const {
    return p_stay(amount_cents) * p_pay_given_stay(amount_cents);
  }
};

struct SimUser {
  std::int64_t user_id = 0;
  UserTruth truth;
  FeatureTuple features;  // session + statics, coupon_cents left at 0
};

class Simulator {
 public:
  Simulator(PopulationSpec spec, std::uint64_t seed);

  const PopulationSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }

  // Deterministic in (seed, user_id): regenerating any user in any order, in
  // parallel or serially, yields bit-identical truth and features.
  SimUser make_user(std::int64_t user_id) const;
  std::vector<SimUser> make_population(std::int64_t first_id,
                                       std::size_t count) const;

  // Draws (stayed, paid) at the given amount; paid can be true only when
  // stayed is.
  static std::pair<bool, bool> sample_labels(const UserTruth& truth,
                                             Money amount_cents, Rng& rng);

  // Exposure amounts are sampled uniformly from the menu; labels follow the
  // user's truth at the assigned amount. ContractError when n == 0.
  std::vector<LabeledSample> make_dataset(std::size_t n,
                                          std::int64_t first_id = 1) const;

 private:
  PopulationSpec spec_;
  std::uint64_t seed_ = 0;
};

// Ground-truth response table for a user set: one row per (user, amount).
void write_truth_csv(const std::string& path, std::span<const SimUser> users,
                     std::span<const Money> menu);

}  // namespace coupon::sim
