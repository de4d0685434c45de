#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coupon/data.hpp"

namespace coupon::mckp {

// One user's scored coupon menu. Slot j holds the predicted pay probability
// (value) and stay probability at costs[j]; costs are ascending with
// costs[0] == 0, the always-available null option.
struct ScoredMenu {
  std::int64_t user_id = 0;
  std::vector<Money> costs;
  std::vector<double> values;
  std::vector<double> stays;
};

struct AllocationInstance {
  std::vector<ScoredMenu> users;
  Money budget = 0;
  double gamma = 1.0;  // eligibility cap on the no-coupon stay score

  // ContractError on empty/ill-formed menus, negative budget, bad gamma.
  void validate() const;
};

// Retention gate: users already likely to stay are not worth paying.
bool gate_eligible(const ScoredMenu& menu, double gamma);

// argmax_j values[j] - alpha * units(costs[j]); ties resolve to the smaller
// cost. ContractError on an empty menu. choose_affordable restricts the
// argmax to costs[j] <= limit.
int choose(const ScoredMenu& menu, double alpha);
int choose_affordable(const ScoredMenu& menu, double alpha, Money limit);

// Price per currency unit of budget plus the context it was estimated in.
// betas records each sample user's surplus max_j(v_ij - alpha c_j) at the
// final price; the online rule never reads it.
struct DualState {
  double alpha = 0.0;
  std::size_t sample_size = 0;
  Money scaled_budget = 0;
  double tolerance = 1e-6;
  double gamma = 1.0;
  std::vector<double> betas;
};

// Spend of the price-greedy rule applied to every eligible sample user with
// no budget interaction; non-increasing in alpha.
Money projected_spend(std::span<const ScoredMenu> sample, double alpha,
                      double gamma);

// Smallest alpha >= 0 (within tolerance) whose projected spend fits the
// budget, found by bisection on the monotone spend curve. alpha stays 0 when
// the unpriced spend already fits. ContractError on a negative budget.
DualState estimate_dual(std::span<const ScoredMenu> sample, Money budget,
                        double gamma, double tolerance = 1e-6);

struct Decision {
  std::int64_t user_id = 0;
  int chosen = 0;  // menu slot, 0 = null
  bool gated = false;
};

struct LedgerEntry {
  std::size_t arrival = 0;
  std::int64_t user_id = 0;
  bool gated = false;
  Money amount = 0;
  Money spent_after = 0;
};

// Append-only spend record; refuses to overdraw (InvariantBreach), so total
// spend <= budget holds at every point by construction.
class BudgetLedger {
 public:
  explicit BudgetLedger(Money budget);

  Money budget() const { return budget_; }
  Money spent() const { return spent_; }
  Money remaining() const { return budget_ - spent_; }
  const std::vector<LedgerEntry>& log() const { return log_; }

  void record(std::int64_t user_id, bool gated, Money amount);

 private:
  Money budget_ = 0;
  Money spent_ = 0;
  std::vector<LedgerEntry> log_;
};

// Optional mid-stream price update: called after every decision with
// (arrivals so far, spent, remaining); a returned value replaces alpha.
using ReestimateHook = std::function<std::optional<double>(
    std::size_t, Money, Money)>;

// One pass over the arrival stream: gate, choose at the dual price, fall
// back to the best affordable slot when the remainder cannot cover the
// preferred one. Budget exhaustion is normal operation, never an error.
std::vector<Decision> allocate_online(std::span<const ScoredMenu> stream,
                                      const DualState& dual,
                                      BudgetLedger& ledger,
                                      const ReestimateHook& hook = {});

double objective(std::span<const ScoredMenu> users,
                 std::span<const Decision> decisions);
Money total_cost(std::span<const ScoredMenu> users,
                 std::span<const Decision> decisions);

struct LpBounds {
  double fractional = 0.0;
  double integral = 0.0;
};

// Exact optimum of the LP relaxation via the classical MCKP reduction:
// per-user dominance filtering to the efficiency frontier, then greedy
// filling by incremental efficiency. Any instance size.
double lp_fractional(const AllocationInstance& instance);

// Exact integral optimum by dynamic programming; CapabilityError beyond
// 12 users or 4 positive amounts (use lp_fractional for larger instances).
double lp_integral(const AllocationInstance& instance);

LpBounds lp_oracle(const AllocationInstance& instance);

void write_decision_log(const std::string& path, const BudgetLedger& ledger);
void write_dual_state(const std::string& path, const DualState& dual);

}  // namespace coupon::mckp
