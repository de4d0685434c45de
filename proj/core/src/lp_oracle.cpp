#include <algorithm>
#include <vector>

#include "coupon/allocator.hpp"
#include "coupon/errors.hpp"

namespace coupon::mckp {

double lp_fractional(const AllocationInstance& instance) {
  instance.validate();
  double base = 0.0;
  struct Increment {
    double efficiency;
    Money dc;
    double dv;
  };
  std::vector<Increment> increments;
  for (const auto& menu : instance.users) {
    base += menu.values.front();
    if (!gate_eligible(menu, instance.gamma)) continue;
    // Efficiency frontier: drop dominated slots, then keep only slots whose
    // incremental value per cent decreases (upper convex hull).
    std::vector<std::size_t> hull = {0};
    for (std::size_t j = 1; j < menu.costs.size(); ++j) {
      if (menu.values[j] <= menu.values[hull.back()]) continue;
      while (hull.size() >= 2) {
        const std::size_t a = hull[hull.size() - 2];
        const std::size_t b = hull.back();
        const double eff_ab =
            (menu.values[b] - menu.values[a]) /
            static_cast<double>(menu.costs[b] - menu.costs[a]);
        const double eff_bj =
            (menu.values[j] - menu.values[b]) /
            static_cast<double>(menu.costs[j] - menu.costs[b]);
        if (eff_bj >= eff_ab) {
          hull.pop_back();
        } else {
          break;
        }
      }
      hull.push_back(j);
    }
    for (std::size_t k = 1; k < hull.size(); ++k) {
      const Money dc = menu.costs[hull[k]] - menu.costs[hull[k - 1]];
      const double dv = menu.values[hull[k]] - menu.values[hull[k - 1]];
      increments.push_back({dv / static_cast<double>(dc), dc, dv});
    }
  }
  // Within one user the frontier efficiencies strictly decrease, so a stable
  // sort keeps every user's increments in pickup order.
  std::stable_sort(increments.begin(), increments.end(),
                   [](const Increment& a, const Increment& b) {
                     return a.efficiency > b.efficiency;
                   });
  double value = base;
  Money remaining = instance.budget;
  for (const auto& inc : increments) {
    if (remaining <= 0) break;
    if (inc.dc <= remaining) {
      value += inc.dv;
      remaining -= inc.dc;
    } else {
      value += inc.dv * static_cast<double>(remaining) /
               static_cast<double>(inc.dc);
      remaining = 0;
    }
  }
  return value;
}

double lp_integral(const AllocationInstance& instance) {
  instance.validate();
  constexpr std::size_t kMaxUsers = 12;
  constexpr std::size_t kMaxSlots = 5;  // null + 4 positive amounts
  if (instance.users.size() > kMaxUsers) {
    throw CapabilityError(
        "lp_integral: more than 12 users; use lp_fractional for the bound");
  }
  Money total_menu_cost = 0;
  for (const auto& menu : instance.users) {
    if (menu.costs.size() > kMaxSlots) {
      throw CapabilityError(
          "lp_integral: more than 4 positive amounts; use lp_fractional");
    }
    total_menu_cost += menu.costs.back();
  }
  const Money cap = std::min(instance.budget, total_menu_cost);
  const std::size_t width = static_cast<std::size_t>(cap) + 1;
  std::vector<double> dp(width, 0.0);
  std::vector<double> next(width, 0.0);
  for (const auto& menu : instance.users) {
    const bool eligible = gate_eligible(menu, instance.gamma);
    for (std::size_t b = 0; b < width; ++b) {
      double best = dp[b] + menu.values.front();
      if (eligible) {
        for (std::size_t j = 1; j < menu.costs.size(); ++j) {
          const Money c = menu.costs[j];
          if (c > static_cast<Money>(b)) break;
          best = std::max(
              best, dp[b - static_cast<std::size_t>(c)] + menu.values[j]);
        }
      }
      next[b] = best;
    }
    dp.swap(next);
  }
  return dp.back();
}

LpBounds lp_oracle(const AllocationInstance& instance) {
  return {lp_fractional(instance), lp_integral(instance)};
}

}  // namespace coupon::mckp
