#include "coupon/allocator.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "coupon/errors.hpp"
#include "json.hpp"

namespace coupon::mckp {
namespace {

void validate_menu(const ScoredMenu& menu) {
  if (menu.costs.empty()) {
    throw ContractError("allocation: empty coupon menu");
  }
  if (menu.costs.front() != 0) {
    throw ContractError("allocation: menu must include the null amount first");
  }
  if (menu.values.size() != menu.costs.size() ||
      menu.stays.size() != menu.costs.size()) {
    throw ContractError("allocation: menu score/cost size mismatch");
  }
  for (std::size_t j = 0; j < menu.costs.size(); ++j) {
    if (j > 0 && menu.costs[j] <= menu.costs[j - 1]) {
      throw ContractError("allocation: menu costs must be strictly ascending");
    }
    if (!(menu.values[j] >= 0.0 && menu.values[j] <= 1.0) ||
        !(menu.stays[j] >= 0.0 && menu.stays[j] <= 1.0)) {
      throw ContractError("allocation: scores must lie in [0, 1]");
    }
  }
}

double reduced(const ScoredMenu& menu, std::size_t j, double alpha) {
  return menu.values[j] - alpha * cents_to_units(menu.costs[j]);
}

}  // namespace

void AllocationInstance::validate() const {
  if (budget < 0) throw ContractError("allocation: negative budget");
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ContractError("allocation: gamma must lie in [0, 1]");
  }
  for (const auto& menu : users) validate_menu(menu);
}

bool gate_eligible(const ScoredMenu& menu, double gamma) {
  validate_menu(menu);
  return menu.stays.front() <= gamma;
}

int choose(const ScoredMenu& menu, double alpha) {
  validate_menu(menu);
  std::size_t best = 0;
  double best_score = reduced(menu, 0, alpha);
  for (std::size_t j = 1; j < menu.costs.size(); ++j) {
    const double score = reduced(menu, j, alpha);
    if (score > best_score) {
      best = j;
      best_score = score;
    }
  }
  return static_cast<int>(best);
}

int choose_affordable(const ScoredMenu& menu, double alpha, Money limit) {
  validate_menu(menu);
  std::size_t best = 0;
  double best_score = reduced(menu, 0, alpha);
  for (std::size_t j = 1; j < menu.costs.size() && menu.costs[j] <= limit; ++j) {
    const double score = reduced(menu, j, alpha);
    if (score > best_score) {
      best = j;
      best_score = score;
    }
  }
  return static_cast<int>(best);
}

Money projected_spend(std::span<const ScoredMenu> sample, double alpha,
                      double gamma) {
  Money spend = 0;
  for (const auto& menu : sample) {
    if (!gate_eligible(menu, gamma)) continue;
    spend += menu.costs[static_cast<std::size_t>(choose(menu, alpha))];
  }
  return spend;
}

DualState estimate_dual(std::span<const ScoredMenu> sample, Money budget,
                        double gamma, double tolerance) {
  if (budget < 0) throw ContractError("estimate_dual: negative budget");
  if (!(tolerance > 0.0)) {
    throw ContractError("estimate_dual: tolerance must be positive");
  }
  DualState dual;
  dual.sample_size = sample.size();
  dual.scaled_budget = budget;
  dual.tolerance = tolerance;
  dual.gamma = gamma;

  if (projected_spend(sample, 0.0, gamma) > budget) {
    // Spend is non-increasing in the price, and collapses to 0 once every
    // positive amount prices below the null option; bracket then bisect.
    double lo = 0.0;
    double hi = 1.0;
    while (projected_spend(sample, hi, gamma) > budget) {
      lo = hi;
      hi *= 2.0;
    }
    while (hi - lo > tolerance) {
      const double mid = 0.5 * (lo + hi);
      if (projected_spend(sample, mid, gamma) <= budget) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    dual.alpha = hi;  // feasible end of the bracket
  }

  dual.betas.reserve(sample.size());
  for (const auto& menu : sample) {
    const std::size_t j = gate_eligible(menu, dual.gamma)
                              ? static_cast<std::size_t>(choose(menu, dual.alpha))
                              : 0;
    dual.betas.push_back(reduced(menu, j, dual.alpha));
  }
  return dual;
}

BudgetLedger::BudgetLedger(Money budget) : budget_(budget) {
  if (budget < 0) throw ContractError("budget ledger: negative budget");
}

void BudgetLedger::record(std::int64_t user_id, bool gated, Money amount) {
  if (amount < 0) throw ContractError("budget ledger: negative amount");
  if (amount > remaining()) {
    throw InvariantBreach("budget ledger: decision would overdraw the budget");
  }
  spent_ += amount;
  log_.push_back({log_.size(), user_id, gated, amount, spent_});
}

std::vector<Decision> allocate_online(std::span<const ScoredMenu> stream,
                                      const DualState& dual,
                                      BudgetLedger& ledger,
                                      const ReestimateHook& hook) {
  double alpha = dual.alpha;
  std::vector<Decision> decisions;
  decisions.reserve(stream.size());
  for (const auto& menu : stream) {
    Decision d;
    d.user_id = menu.user_id;
    if (!gate_eligible(menu, dual.gamma)) {
      d.gated = true;
    } else {
      d.chosen = choose_affordable(menu, alpha, ledger.remaining());
    }
    ledger.record(d.user_id, d.gated,
                  menu.costs[static_cast<std::size_t>(d.chosen)]);
    decisions.push_back(d);
    if (hook) {
      if (const auto updated =
              hook(decisions.size(), ledger.spent(), ledger.remaining())) {
        alpha = *updated;
      }
    }
  }
  return decisions;
}

double objective(std::span<const ScoredMenu> users,
                 std::span<const Decision> decisions) {
  if (users.size() != decisions.size()) {
    throw ContractError("objective: user/decision size mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < users.size(); ++i) {
    total += users[i].values[static_cast<std::size_t>(decisions[i].chosen)];
  }
  return total;
}

Money total_cost(std::span<const ScoredMenu> users,
                 std::span<const Decision> decisions) {
  if (users.size() != decisions.size()) {
    throw ContractError("total_cost: user/decision size mismatch");
  }
  Money total = 0;
  for (std::size_t i = 0; i < users.size(); ++i) {
    total += users[i].costs[static_cast<std::size_t>(decisions[i].chosen)];
  }
  return total;
}

void write_decision_log(const std::string& path, const BudgetLedger& ledger) {
  std::ofstream out(path);
  if (!out) throw IoError("decision log: cannot open " + path);
  out << "# schema: decisions/v1\n";
  out << "arrival,user_id,gated,amount_cents,spent_after_cents\n";
  char buf[128];
  for (const auto& entry : ledger.log()) {
    std::snprintf(buf, sizeof buf, "%zu,%lld,%d,%lld,%lld\n", entry.arrival,
                  static_cast<long long>(entry.user_id), entry.gated ? 1 : 0,
                  static_cast<long long>(entry.amount),
                  static_cast<long long>(entry.spent_after));
    out << buf;
  }
  if (!out) throw IoError("decision log: write failed for " + path);
}

void write_dual_state(const std::string& path, const DualState& dual) {
  nlohmann::json j{{"schema", "dual/v1"},
                   {"alpha", dual.alpha},
                   {"sample_size", dual.sample_size},
                   {"scaled_budget_cents", dual.scaled_budget},
                   {"tolerance", dual.tolerance},
                   {"gamma", dual.gamma}};
  std::ofstream out(path);
  if (!out) throw IoError("dual state: cannot open " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("dual state: write failed for " + path);
}

}  // namespace coupon::mckp
