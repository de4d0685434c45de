// Feature tuples, labeled samples, intent score triples and the
// line-delimited JSON dataset format.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "coupon/errors.hpp"

namespace coupon {

// Coupon amounts and budgets are integer cents throughout; probabilities
// stay float64.
using Money = std::int64_t;

inline Money units_to_cents(double units) {
  return static_cast<Money>(std::llround(units * 100.0));
}
inline double cents_to_units(Money cents) {
  return static_cast<double>(cents) / 100.0;
}
std::string format_money(Money cents);

// One step of a user's real-time behavior sequence.
struct BehaviorEvent {
  int action = 0;            // small-integer action category
  double dwell_seconds = 0;  // finite, >= 0
};

// The network input: real-time sequence s, static vector h, coupon amount c.
struct FeatureTuple {
  std::vector<BehaviorEvent> events;  // length >= 1, <= max_seq_len
  std::vector<int> static_codes;      // bucketed static features
  Money coupon_cents = 0;
};

// (stay, pay-given-stay, pay) probability triple. Models that factor the
// pay probability build it with from_factors, which makes p_pay <= p_stay
// structural; from_marginals derives a clamped conditional for models that
// predict the pay probability directly.
struct IntentScores {
  double p_stay = 0.0;
  double p_pay_given_stay = 0.0;
  double p_pay = 0.0;

  static IntentScores from_factors(double stay, double pay_given_stay) {
    return {stay, pay_given_stay, stay * pay_given_stay};
  }
  static IntentScores from_marginals(double stay, double pay) {
    const double cond = stay > 0.0 ? std::min(1.0, pay / stay) : 0.0;
    return {stay, cond, pay};
  }
};

struct BatchLoss {
  double stay = 0.0;  // mean BCE of the stay head
  double pay = 0.0;   // mean BCE of the pay head
  double total() const { return stay + pay; }
};

struct LabeledSample {
  std::int64_t user_id = 0;
  FeatureTuple features;
  bool stayed = false;
  bool paid = false;  // paid implies stayed
};

// ContractError if paid && !stayed, the sequence is empty, or a dwell is
// negative/non-finite.
void validate_sample(const LabeledSample& sample);

// Line-delimited JSON. write_dataset is byte-deterministic for a fixed
// sample vector; read rejects records violating the label invariant.
void write_dataset(const std::string& path,
                   const std::vector<LabeledSample>& samples);
std::vector<LabeledSample> read_dataset(const std::string& path);

// Seeded 80/20-style split on user id; returns true for validation members.
bool in_validation_split(std::int64_t user_id, std::uint64_t seed,
                         double validation_fraction);

}  // namespace coupon
