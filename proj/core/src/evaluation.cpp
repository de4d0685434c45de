#include "coupon/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "coupon/errors.hpp"

namespace coupon::eval {
namespace {

constexpr std::uint64_t kOutcomeStream = 0xAB;

void check_pair(std::span<const double> scores, std::span<const int> labels,
                const char* what) {
  if (scores.size() != labels.size()) {
    throw ContractError(std::string(what) + ": score/label size mismatch");
  }
  if (scores.empty()) {
    throw ContractError(std::string(what) + ": empty input");
  }
}

void check_menu(std::span<const Money> menu) {
  if (menu.empty() || menu.front() != 0) {
    throw ContractError("menu must start with the 0 amount");
  }
  for (std::size_t j = 1; j < menu.size(); ++j) {
    if (menu[j] <= menu[j - 1]) {
      throw ContractError("menu amounts must be strictly ascending");
    }
  }
}

struct Outcomes {
  std::size_t stayed = 0;
  std::size_t paid = 0;
};

std::pair<bool, bool> draw_outcome(std::uint64_t outcome_base,
                                   const sim::SimUser& user, Money amount) {
  Rng rng(Rng::mix(outcome_base, static_cast<std::uint64_t>(user.user_id)));
  return sim::Simulator::sample_labels(user.truth, amount, rng);
}

mckp::ScoredMenu scored_menu(const sim::SimUser& user,
                             const MenuScoreFn& scorer,
                             std::span<const Money> menu) {
  const std::vector<IntentScores> scores = scorer(user);
  if (scores.size() != menu.size()) {
    throw ContractError("scorer returned a menu of the wrong size");
  }
  mckp::ScoredMenu m;
  m.user_id = user.user_id;
  m.costs.assign(menu.begin(), menu.end());
  m.values.reserve(scores.size());
  m.stays.reserve(scores.size());
  for (const auto& s : scores) {
    m.values.push_back(s.p_pay);
    m.stays.push_back(s.p_stay);
  }
  return m;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  check_pair(scores, labels, "auc");
  std::size_t n_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ContractError("auc: labels must be 0/1");
    n_pos += static_cast<std::size_t>(y);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw UndefinedMetricError("auc: undefined on single-class labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  // Average tied ranks: every member of an equal-score group gets the mean
  // rank, which is exactly the half-credit-per-tie convention.
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) pos_rank_sum += mean_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double logloss(std::span<const double> scores, std::span<const int> labels) {
  check_pair(scores, labels, "logloss");
  constexpr double kLo = 1e-12;
  const double kHi = 1.0 - 1e-12;
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw ContractError("logloss: labels must be 0/1");
    }
    const double p = std::min(kHi, std::max(kLo, scores[i]));
    total += labels[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(scores.size());
}

double increment_cost(double spend_units, double users, double rate,
                      double rate0) {
  if (!(users > 0.0)) throw ContractError("increment_cost: users must be > 0");
  if (spend_units < 0.0) {
    throw ContractError("increment_cost: negative spend");
  }
  const double gap = rate - rate0;
  if (!(gap > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return spend_units / (users * gap);
}

int uplift_index(std::span<const Money> amounts,
                 std::span<const IntentScores> scores, double alpha_min) {
  check_menu(amounts);
  if (scores.size() != amounts.size()) {
    throw ContractError("uplift_index: score/menu size mismatch");
  }
  const double base = scores.front().p_pay;
  std::size_t best = 0;
  double best_uplift = 0.0;
  for (std::size_t j = 1; j < amounts.size(); ++j) {
    const double uplift = scores[j].p_pay - base;
    if (best == 0 ? uplift >= alpha_min : uplift > best_uplift) {
      best = j;
      best_uplift = uplift;
    }
  }
  return static_cast<int>(best);
}

const char* policy_name(Policy p) {
  switch (p) {
    case Policy::kNon: return "non-allocation";
    case Policy::kAll: return "all-allocation";
    case Policy::kUplift: return "uplift";
    case Policy::kMckp: return "mckp";
  }
  throw ContractError("policy_name: unknown policy");
}

AbResult run_ab(std::span<const sim::SimUser> users, const MenuScoreFn& scorer,
                std::span<const Money> menu, const AbConfig& cfg) {
  check_menu(menu);
  if (users.size() < 4) {
    throw ContractError("run_ab: need at least one user per arm");
  }
  if (cfg.budget < 0) throw ContractError("run_ab: negative budget");
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) {
    throw ContractError("run_ab: gamma must lie in [0, 1]");
  }
  const std::uint64_t outcome_base =
      Rng::mix(cfg.outcome_seed, kOutcomeStream);
  constexpr Policy kOrder[4] = {Policy::kNon, Policy::kAll, Policy::kUplift,
                                Policy::kMckp};
  std::vector<const sim::SimUser*> arm_users[4];
  for (std::size_t i = 0; i < users.size(); ++i) {
    arm_users[i % 4].push_back(&users[i]);
  }

  AbResult result;
  result.arms.resize(4);
  std::vector<Money> assigned[4];
  for (int a = 0; a < 4; ++a) {
    const auto& members = arm_users[a];
    assigned[a].assign(members.size(), 0);
    switch (kOrder[a]) {
      case Policy::kNon:
        break;
      case Policy::kAll: {
        mckp::BudgetLedger ledger(cfg.budget);
        for (std::size_t i = 0; i < members.size(); ++i) {
          const Money amount =
              ledger.remaining() >= cfg.all_amount ? cfg.all_amount : 0;
          ledger.record(members[i]->user_id, false, amount);
          assigned[a][i] = amount;
        }
        result.arms[a].spend = ledger.spent();
        break;
      }
      case Policy::kUplift: {
        mckp::BudgetLedger ledger(cfg.budget);
        for (std::size_t i = 0; i < members.size(); ++i) {
          const std::vector<IntentScores> scores = scorer(*members[i]);
          if (scores.size() != menu.size()) {
            throw ContractError("scorer returned a menu of the wrong size");
          }
          const int j = uplift_index(menu, scores, cfg.alpha_min);
          Money amount = menu[static_cast<std::size_t>(j)];
          if (amount > ledger.remaining()) amount = 0;
          ledger.record(members[i]->user_id, false, amount);
          assigned[a][i] = amount;
        }
        result.arms[a].spend = ledger.spent();
        break;
      }
      case Policy::kMckp: {
        std::vector<mckp::ScoredMenu> menus;
        menus.reserve(members.size());
        for (const auto* user : members) {
          menus.push_back(scored_menu(*user, scorer, menu));
        }
        result.dual = mckp::estimate_dual(menus, cfg.budget, cfg.gamma,
                                          cfg.dual_tolerance);
        mckp::BudgetLedger ledger(cfg.budget);
        const std::vector<mckp::Decision> decisions =
            mckp::allocate_online(menus, result.dual, ledger);
        for (std::size_t i = 0; i < members.size(); ++i) {
          assigned[a][i] =
              menu[static_cast<std::size_t>(decisions[i].chosen)];
        }
        result.arms[a].spend = ledger.spent();
        result.ledger = std::move(ledger);
        break;
      }
    }
  }

  for (int a = 0; a < 4; ++a) {
    ArmReport& arm = result.arms[a];
    arm.policy = kOrder[a];
    arm.users = arm_users[a].size();
    for (std::size_t i = 0; i < arm_users[a].size(); ++i) {
      const auto [stayed, paid] =
          draw_outcome(outcome_base, *arm_users[a][i], assigned[a][i]);
      arm.stayed += stayed ? 1 : 0;
      arm.paid += paid ? 1 : 0;
    }
    arm.retention =
        static_cast<double>(arm.stayed) / static_cast<double>(arm.users);
    arm.conversion =
        static_cast<double>(arm.paid) / static_cast<double>(arm.users);
  }
  const double rate0 = result.arms[0].conversion;
  for (int a = 1; a < 4; ++a) {
    ArmReport& arm = result.arms[a];
    arm.increment_cost =
        increment_cost(cents_to_units(arm.spend),
                       static_cast<double>(arm.users), arm.conversion, rate0);
  }
  return result;
}

MonotonicityReport monotonicity_report(std::span<const sim::SimUser> users,
                                       const MenuScoreFn& scorer,
                                       std::span<const Money> menu,
                                       double tolerance) {
  check_menu(menu);
  if (users.empty()) throw ContractError("monotonicity_report: no users");
  MonotonicityReport report;
  report.users = users.size();
  report.mean_pp.assign(menu.size(), 0.0);
  std::size_t monotone = 0;
  for (const auto& user : users) {
    const std::vector<IntentScores> scores = scorer(user);
    if (scores.size() != menu.size()) {
      throw ContractError("scorer returned a menu of the wrong size");
    }
    bool ok = true;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      report.mean_pp[j] += scores[j].p_pay;
      if (j > 0 && scores[j].p_pay < scores[j - 1].p_pay - tolerance) {
        ok = false;
      }
    }
    monotone += ok ? 1 : 0;
  }
  for (double& v : report.mean_pp) v /= static_cast<double>(users.size());
  report.fraction =
      static_cast<double>(monotone) / static_cast<double>(users.size());
  return report;
}

std::vector<SweepRow> budget_sweep(std::span<const sim::SimUser> users,
                                   const MenuScoreFn& scorer,
                                   std::span<const Money> menu,
                                   std::span<const Money> budgets,
                                   const AbConfig& cfg) {
  check_menu(menu);
  if (users.empty()) throw ContractError("budget_sweep: no users");
  if (budgets.empty()) throw ContractError("budget_sweep: no budgets");
  const std::uint64_t outcome_base =
      Rng::mix(cfg.outcome_seed, kOutcomeStream);

  std::vector<mckp::ScoredMenu> menus;
  menus.reserve(users.size());
  for (const auto& user : users) {
    menus.push_back(scored_menu(user, scorer, menu));
  }
  std::size_t paid0 = 0;
  for (const auto& user : users) {
    paid0 += draw_outcome(outcome_base, user, 0).second ? 1 : 0;
  }
  const double rate0 =
      static_cast<double>(paid0) / static_cast<double>(users.size());

  std::vector<SweepRow> rows;
  rows.reserve(budgets.size());
  for (Money budget : budgets) {
    const mckp::DualState dual =
        mckp::estimate_dual(menus, budget, cfg.gamma, cfg.dual_tolerance);
    mckp::BudgetLedger ledger(budget);
    const std::vector<mckp::Decision> decisions =
        mckp::allocate_online(menus, dual, ledger);
    SweepRow row;
    row.budget = budget;
    row.alpha = dual.alpha;
    row.spend = ledger.spent();
    for (std::size_t i = 0; i < users.size(); ++i) {
      const Money amount =
          menu[static_cast<std::size_t>(decisions[i].chosen)];
      row.paid += draw_outcome(outcome_base, users[i], amount).second ? 1 : 0;
    }
    row.conversion =
        static_cast<double>(row.paid) / static_cast<double>(users.size());
    row.increment_cost =
        increment_cost(cents_to_units(row.spend),
                       static_cast<double>(users.size()), row.conversion,
                       rate0);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace coupon::eval
