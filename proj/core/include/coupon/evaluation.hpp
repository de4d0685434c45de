#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "coupon/allocator.hpp"
#include "coupon/data.hpp"
#include "coupon/simulator.hpp"

namespace coupon::eval {

// Exact rank-based ROC AUC; ties earn half credit. Labels are 0/1.
// UndefinedMetricError when only one class is present, ContractError on
// empty or mismatched inputs.
double auc(std::span<const double> scores, std::span<const int> labels);

// Mean binary cross-entropy with scores clipped to [1e-12, 1 - 1e-12].
double logloss(std::span<const double> scores, std::span<const int> labels);

// Spend per incremental buyer: C / (N * (R - R0)), spend in currency units.
// Returns NaN when the rate gap is not positive - never a negative cost.
double increment_cost(double spend_units, double users, double rate,
                      double rate0);

// Slot of the uplift-maximizing amount, or 0 when no amount lifts the pay
// probability by at least alpha_min. Ties resolve to the smaller amount.
int uplift_index(std::span<const Money> amounts,
                 std::span<const IntentScores> scores, double alpha_min);

enum class Policy { kNon, kAll, kUplift, kMckp };
const char* policy_name(Policy p);

struct AbConfig {
  Money budget = 0;        // per spending arm
  double gamma = 0.8;      // stay-score eligibility cap (MCKP arm)
  double alpha_min = 0.02; // uplift threshold (uplift arm)
  Money all_amount = 200;  // fixed amount handed out by the All arm
  std::uint64_t outcome_seed = 1;
  double dual_tolerance = 1e-6;
};

struct ArmReport {
  Policy policy = Policy::kNon;
  std::size_t users = 0;
  std::size_t stayed = 0;
  std::size_t paid = 0;
  Money spend = 0;
  double retention = 0.0;
  double conversion = 0.0;
  double increment_cost = 0.0;  // 0 by convention for the Non arm
};

// Model interface the harness needs: per-amount score triples for one user.
using MenuScoreFn =
    std::function<std::vector<IntentScores>(const sim::SimUser&)>;

struct AbResult {
  std::vector<ArmReport> arms;  // Non, All, Uplift, MCKP order
  mckp::DualState dual;         // MCKP arm price
  mckp::BudgetLedger ledger{0}; // MCKP arm spend record
};

// Four-policy A/B over disjoint round-robin partitions with equal budgets
// for the spending arms. Outcomes come from each user's ground truth at the
// assigned amount, with per-user noise streams derived from outcome_seed.
AbResult run_ab(std::span<const sim::SimUser> users, const MenuScoreFn& scorer,
                std::span<const Money> menu, const AbConfig& cfg);

struct MonotonicityReport {
  std::size_t users = 0;
  double fraction = 0.0;          // share with a non-decreasing pay curve
  std::vector<double> mean_pp;    // mean predicted pay per menu amount
};

// Non-strict monotonicity of the predicted pay curve across the menu,
// checked with the given slack per step.
MonotonicityReport monotonicity_report(std::span<const sim::SimUser> users,
                                       const MenuScoreFn& scorer,
                                       std::span<const Money> menu,
                                       double tolerance = 1e-9);

struct SweepRow {
  Money budget = 0;
  double alpha = 0.0;
  Money spend = 0;
  std::size_t paid = 0;
  double conversion = 0.0;
  double increment_cost = 0.0;  // NaN when the rate gap is not positive
};

// MCKP policy across a budget ladder on one fixed cohort with common random
// numbers: every row reuses the same per-user outcome draws, so row
// differences reflect allocation changes only.
std::vector<SweepRow> budget_sweep(std::span<const sim::SimUser> users,
                                   const MenuScoreFn& scorer,
                                   std::span<const Money> menu,
                                   std::span<const Money> budgets,
                                   const AbConfig& cfg);

}  // namespace coupon::eval
