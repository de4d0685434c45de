// End-to-end acceptance gate: one PASS/FAIL line per criterion, nonzero exit
// if any fails. Runs the real pipeline (no shortcuts), so expect ~20 minutes.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "coupon/allocator.hpp"
#include "coupon/cli.hpp"
#include "coupon/data.hpp"
#include "coupon/errors.hpp"
#include "coupon/evaluation.hpp"
#include "coupon/grad_check.hpp"
#include "coupon/iidn.hpp"
#include "coupon/model_io.hpp"
#include "coupon/rng.hpp"
#include "coupon/simulator.hpp"
#include "json.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace coupon;
using coupon::test::scratch_dir;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

int run(const std::vector<std::string>& args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

// -------------------------------------------------------------- criterion 1

Outcome check_gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  for (const auto variant :
       {iidn::Variant::kIidn, iidn::Variant::kSingleLstm,
        iidn::Variant::kNonAttention, iidn::Variant::kNonAuxiliary}) {
    const auto cfg = test::tiny_config(variant);
    auto params = test::grad_check_params(cfg);
    const auto batch = test::grad_check_batch(cfg);
    const auto fn = [&](nn::ParamStore& ps, nn::Gradients* grads) {
      return iidn::forward_backward(cfg, ps, batch, grads).total();
    };
    const auto report = nn::grad_check(params, fn, {1e-5, 1e-4});
    if (!report.passed) {
      return {false, fmt("variant %s worst %s rel err %.3g",
                         iidn::variant_name(variant).c_str(),
                         report.worst_param.c_str(), report.worst_error)};
    }
    detail += fmt("%s %.2g  ", iidn::variant_name(variant).c_str(),
                  report.worst_error);
  }
  const double dt = seconds_since(t0);
  if (dt >= 30.0) return {false, fmt("took %.1fs (limit 30s)", dt)};
  return {true, detail + fmt("(%.1fs)", dt)};
}

// -------------------------------------------------------------- criterion 2

FeatureTuple random_features(const iidn::IidnConfig& cfg, Rng& rng) {
  FeatureTuple f;
  const int len = 1 + static_cast<int>(rng.uniform_index(
                          static_cast<std::uint64_t>(cfg.max_seq_len)));
  for (int t = 0; t < len; ++t) {
    BehaviorEvent ev;
    ev.action = static_cast<int>(rng.uniform_index(cfg.action_vocab));
    ev.dwell_seconds = rng.uniform(0.0, 300.0);
    f.events.push_back(ev);
  }
  for (int s = 0; s < cfg.static_slots; ++s) {
    f.static_codes.push_back(
        static_cast<int>(rng.uniform_index(cfg.static_buckets)));
  }
  f.coupon_cents = cfg.coupon_amounts_cents[rng.uniform_index(
      cfg.coupon_amounts_cents.size())];
  return f;
}

Outcome check_forward_invariants() {
  struct Case {
    iidn::Variant variant;
    iidn::AttentionKind attention;
    int count;
  };
  const Case cases[] = {
      {iidn::Variant::kIidn, iidn::AttentionKind::kLinear, 3000},
      {iidn::Variant::kIidn, iidn::AttentionKind::kAdditive, 2000},
      {iidn::Variant::kSingleLstm, iidn::AttentionKind::kLinear, 2000},
      {iidn::Variant::kSingleLstm, iidn::AttentionKind::kAdditive, 1000},
      {iidn::Variant::kNonAttention, iidn::AttentionKind::kLinear, 2000},
  };
  Rng rng(20240817);
  std::size_t total = 0, attention_checked = 0;
  for (const auto& c : cases) {
    iidn::IidnConfig cfg;
    cfg.variant = c.variant;
    cfg.attention = c.attention;
    const iidn::IidnModel model(
        cfg, iidn::make_params(cfg, 1000 + static_cast<std::uint64_t>(total)));
    for (int i = 0; i < c.count; ++i, ++total) {
      const auto f = random_features(cfg, rng);
      const auto detail = model.score_detail(f);
      const auto& s = detail.scores;
      if (s.p_pay != s.p_stay * s.p_pay_given_stay) {
        return {false, fmt("forward %zu: p_pay %.17g != p_stay*p_pay|stay %.17g",
                           total, s.p_pay, s.p_stay * s.p_pay_given_stay)};
      }
      if (!(s.p_pay <= s.p_stay)) {
        return {false, fmt("forward %zu: p_pay %.17g > p_stay %.17g", total,
                           s.p_pay, s.p_stay)};
      }
      if (cfg.has_attention()) {
        double sum = 0.0;
        for (double w : detail.attention) {
          if (!(w >= 0.0)) return {false, fmt("forward %zu: negative attention weight", total)};
          sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
          return {false, fmt("forward %zu: attention sum off by %.3g", total,
                             sum - 1.0)};
        }
        ++attention_checked;
      }
    }
  }
  return {true, fmt("%zu forwards, %zu attention distributions", total,
                    attention_checked)};
}

// -------------------------------------------------------------- criterion 3

std::map<std::string, double> read_metric_aucs(const fs::path& dir) {
  std::map<std::string, double> aucs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("metrics-", 0) != 0) continue;
    std::ifstream in(entry.path());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line.rfind("variant,", 0) == 0) {
        continue;
      }
      std::istringstream row(line);
      std::string variant, auc;
      std::getline(row, variant, ',');
      std::getline(row, auc, ',');
      aucs[variant] = std::stod(auc);
    }
  }
  return aucs;
}

struct TrainedArtifacts {
  fs::path dir;
  std::map<std::string, double> aucs;
};

Outcome check_learning_margins(TrainedArtifacts& artifacts) {
  const fs::path dir = scratch_dir("acceptance_train");
  artifacts.dir = dir;
  std::string err;
  if (run({"gen", "--out", dir.string(), "--samples", "50000", "--seed", "7"},
          &err) != 0) {
    return {false, "gen failed: " + err};
  }
  {
    std::ifstream in(dir / "manifest.json");
    const auto manifest = nlohmann::json::parse(in);
    const double rate = manifest.at("positive_rate").get<double>();
    if (rate < 0.07 || rate > 0.15) {
      return {false, fmt("positive rate %.4f outside ~10%% band", rate)};
    }
  }
  std::string detail;
  for (const char* variant : {"lr-baseline", "iidn", "non-auxiliary"}) {
    const auto t0 = std::chrono::steady_clock::now();
    if (run({"train", "--out", dir.string(), "--variant", variant}, &err) != 0) {
      return {false, std::string("train ") + variant + " failed: " + err};
    }
    const double dt = seconds_since(t0);
    if (dt >= 600.0) {
      return {false, fmt("%s took %.0fs (limit 600s)", variant, dt)};
    }
    detail += fmt("%s %.0fs  ", variant, dt);
  }
  artifacts.aucs = read_metric_aucs(dir);
  const double lr = artifacts.aucs.at("lr-baseline");
  const double full = artifacts.aucs.at("iidn");
  const double ablated = artifacts.aucs.at("non-auxiliary");
  if (!(full >= lr + 0.02)) {
    return {false, fmt("iidn %.4f < lr %.4f + 0.02", full, lr)};
  }
  if (!(full >= ablated + 0.005)) {
    return {false, fmt("iidn %.4f < non-auxiliary %.4f + 0.005", full, ablated)};
  }
  return {true, detail + fmt("auc iidn %.4f lr %.4f non-aux %.4f", full, lr,
                             ablated)};
}

// -------------------------------------------------------- criteria 4 and 5

struct BudgetAudit {
  std::size_t violations = 0;
  std::size_t checks = 0;
  bool overdraw_refused = false;

  void spend_within(Money spent, Money budget) {
    ++checks;
    if (spent > budget) ++violations;
  }
  void ledger_within(const mckp::BudgetLedger& ledger) {
    spend_within(ledger.spent(), ledger.budget());
    for (const auto& entry : ledger.log()) {
      spend_within(entry.spent_after, ledger.budget());
    }
  }
};

mckp::ScoredMenu random_menu(Rng& rng, std::int64_t uid,
                             const std::vector<Money>& costs) {
  mckp::ScoredMenu menu;
  menu.user_id = uid;
  menu.costs = costs;
  double v = rng.uniform(0.02, 0.5);
  for (std::size_t j = 0; j < costs.size(); ++j) {
    if (j > 0) {
      v += rng.bernoulli(0.85) ? rng.uniform(0.0, 0.25)
                               : -rng.uniform(0.0, 0.05);
      v = std::clamp(v, 0.001, 0.999);
    }
    menu.values.push_back(v);
    menu.stays.push_back(rng.uniform(0.1, 0.95));
  }
  return menu;
}

Outcome check_allocation_bounds(BudgetAudit& audit) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(77001);
  const std::vector<std::vector<Money>> cost_sets = {
      {0, 100, 200}, {0, 100, 300}, {0, 200, 500}};
  double worst_ratio = 1.0, worst_alpha_gap = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    mckp::AllocationInstance instance;
    const auto& costs = cost_sets[rng.uniform_index(cost_sets.size())];
    const std::size_t n_users = 1 + rng.uniform_index(8);
    Money max_spend = 0;
    for (std::size_t u = 0; u < n_users; ++u) {
      instance.users.push_back(
          random_menu(rng, static_cast<std::int64_t>(u + 1), costs));
      max_spend += costs.back();
    }
    instance.gamma = rng.bernoulli(0.3) ? 0.8 : 1.0;
    instance.budget = static_cast<Money>(
        rng.uniform_index(static_cast<std::uint64_t>(max_spend) + 1));
    instance.validate();

    const auto dual = mckp::estimate_dual(instance.users, instance.budget,
                                          instance.gamma, 1e-6);
    mckp::BudgetLedger ledger(instance.budget);
    const auto decisions = mckp::allocate_online(instance.users, dual, ledger);
    audit.ledger_within(ledger);
    const double online = mckp::objective(instance.users, decisions);
    const auto bounds = mckp::lp_oracle(instance);
    if (online > bounds.integral + 1e-9 ||
        bounds.integral > bounds.fractional + 1e-9) {
      return {false, fmt("instance %d: online %.6f integral %.6f fractional %.6f "
                         "out of order",
                         inst, online, bounds.integral, bounds.fractional)};
    }
    if (bounds.fractional > 1e-15) {
      worst_ratio = std::min(worst_ratio, online / bounds.fractional);
      if (online < 0.9 * bounds.fractional - 1e-9) {
        return {false, fmt("instance %d: online %.6f < 0.9 x fractional %.6f",
                           inst, online, bounds.fractional)};
      }
    }

    // Dense-grid cross check of the bisection price.
    double alpha_cap = 0.0;
    for (const auto& user : instance.users) {
      for (std::size_t j = 1; j < user.costs.size(); ++j) {
        alpha_cap = std::max(
            alpha_cap, user.values[j] / cents_to_units(user.costs[j]));
      }
    }
    double grid_alpha = 0.0;
    for (double a = 0.0; a <= alpha_cap + 2e-4; a += 1e-4) {
      if (mckp::projected_spend(instance.users, a, instance.gamma) <=
          instance.budget) {
        grid_alpha = a;
        break;
      }
    }
    const double gap = std::abs(dual.alpha - grid_alpha);
    worst_alpha_gap = std::max(worst_alpha_gap, gap);
    if (gap > 1e-3) {
      return {false, fmt("instance %d: bisection alpha %.6f vs grid %.6f", inst,
                         dual.alpha, grid_alpha)};
    }
  }
  const double dt = seconds_since(t0);
  if (dt >= 60.0) return {false, fmt("took %.1fs (limit 60s)", dt)};
  return {true, fmt("200 instances, worst online/fractional %.4f, worst alpha "
                    "gap %.2g (%.1fs)",
                    worst_ratio, worst_alpha_gap, dt)};
}

Outcome check_budget_exactness(BudgetAudit& audit) {
  try {
    mckp::BudgetLedger ledger(100);
    ledger.record(1, false, 80);
    ledger.record(2, false, 30);
    return {false, "overdraw was accepted"};
  } catch (const InvariantBreach&) {
    audit.overdraw_refused = true;
  }
  if (audit.violations != 0) {
    return {false, fmt("%zu spend violations across %zu checks",
                       audit.violations, audit.checks)};
  }
  return {true, fmt("%zu spend checks, zero violations, overdraw refused",
                    audit.checks)};
}

// -------------------------------------------------------- criteria 6 and 7

eval::MenuScoreFn model_scorer(const AnyModel& model) {
  return [&model](const sim::SimUser& user) {
    return model.score_menu(user.features);
  };
}

Outcome check_ab_harness(const TrainedArtifacts& artifacts, BudgetAudit& audit) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto model = AnyModel::load_file((artifacts.dir / "model-iidn.bin").string());
  const sim::Simulator simulator(sim::PopulationSpec::builtin(), 7);
  const auto users = simulator.make_population(10'000'001, 100'000);
  const auto& menu = simulator.spec().menu;
  const auto scorer = model_scorer(model);

  eval::AbConfig cfg;
  cfg.budget = 2'000'000;
  cfg.outcome_seed = 99;
  const auto ab = eval::run_ab(users, scorer, menu, cfg);
  const auto& non = ab.arms[0];
  audit.ledger_within(ab.ledger);
  std::string detail;
  for (std::size_t a = 1; a < ab.arms.size(); ++a) {
    const auto& arm = ab.arms[a];
    audit.spend_within(arm.spend, cfg.budget);
    if (!(arm.conversion > non.conversion)) {
      return {false, fmt("%s conversion %.4f not above natural %.4f",
                         eval::policy_name(arm.policy), arm.conversion,
                         non.conversion)};
    }
  }
  const auto& all_arm = ab.arms[1];
  const auto& mckp_arm = ab.arms[3];
  if (std::isnan(mckp_arm.increment_cost) || std::isnan(all_arm.increment_cost)) {
    return {false, "increment cost undefined for a spending arm"};
  }
  if (!(mckp_arm.increment_cost <= all_arm.increment_cost)) {
    return {false, fmt("mckp increment cost %.2f above all-arm %.2f",
                       mckp_arm.increment_cost, all_arm.increment_cost)};
  }
  detail += fmt("conv non %.4f all %.4f uplift %.4f mckp %.4f, ic mckp %.1f <= "
                "all %.1f",
                non.conversion, all_arm.conversion, ab.arms[2].conversion,
                mckp_arm.conversion, mckp_arm.increment_cost,
                all_arm.increment_cost);

  const std::vector<Money> budgets = {0, 500'000, 1'000'000, 2'000'000,
                                      4'000'000};
  const auto rows = eval::budget_sweep(
      std::span<const sim::SimUser>(users).subspan(0, 20'000), scorer, menu,
      budgets, cfg);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    audit.spend_within(rows[k].spend, rows[k].budget);
    if (k == 0) continue;
    if (rows[k].conversion < rows[k - 1].conversion - 1e-12) {
      return {false, fmt("sweep conversion fell at budget %lld",
                         static_cast<long long>(rows[k].budget))};
    }
    if (k >= 2 && !std::isnan(rows[k].increment_cost) &&
        !std::isnan(rows[k - 1].increment_cost) &&
        rows[k].increment_cost < rows[k - 1].increment_cost - 1e-9) {
      return {false, fmt("sweep increment cost fell at budget %lld",
                         static_cast<long long>(rows[k].budget))};
    }
  }
  const double dt = seconds_since(t0);
  if (dt >= 300.0) return {false, fmt("took %.0fs (limit 300s)", dt)};
  return {true, detail + fmt(" (%.0fs)", dt)};
}

Outcome check_monotonicity(const TrainedArtifacts& artifacts) {
  const auto model = AnyModel::load_file((artifacts.dir / "model-iidn.bin").string());
  const sim::Simulator simulator(sim::PopulationSpec::builtin(), 7);
  const auto users = simulator.make_population(30'000'001, 1000);
  const auto& menu = simulator.spec().menu;

  const auto learned = eval::monotonicity_report(users, model_scorer(model), menu);
  const eval::MenuScoreFn truth_scorer = [&menu](const sim::SimUser& user) {
    std::vector<IntentScores> scores;
    for (Money amount : menu) {
      scores.push_back(IntentScores::from_factors(
          user.truth.p_stay(amount), user.truth.p_pay_given_stay(amount)));
    }
    return scores;
  };
  const auto oracle = eval::monotonicity_report(users, truth_scorer, menu);
  if (oracle.fraction != 1.0) {
    return {false, fmt("truth curves only %.4f monotone", oracle.fraction)};
  }
  if (!(learned.fraction >= 0.90)) {
    return {false, fmt("learned curves %.4f monotone (need 0.90)",
                       learned.fraction)};
  }
  return {true, fmt("learned %.3f monotone over %zu users, truth 1.000",
                    learned.fraction, learned.users)};
}

// -------------------------------------------------------------- criterion 8

double auc_pairwise(std::span<const double> scores, std::span<const int> labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

double logloss_direct(std::span<const double> scores, std::span<const int> labels) {
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(scores[i], 1e-12, 1.0 - 1e-12);
    sum += labels[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return sum / static_cast<double>(scores.size());
}

Outcome check_metric_oracles() {
  Rng rng(555);
  double worst_auc = 0.0, worst_ll = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(59);
    std::vector<double> scores;
    std::vector<int> labels;
    // Coarse score grid forces ties; both classes are guaranteed.
    for (std::size_t i = 0; i < n; ++i) {
      double s = std::round(rng.uniform() * 8.0) / 8.0;
      if (trial % 3 == 0) s = rng.uniform();
      if (trial % 7 == 0 && i % 5 == 0) s = i % 2 == 0 ? 0.0 : 1.0;
      scores.push_back(s);
      labels.push_back(i == 0 ? 1 : i == 1 ? 0 : rng.bernoulli(0.4) ? 1 : 0);
    }
    worst_auc = std::max(
        worst_auc, std::abs(eval::auc(scores, labels) - auc_pairwise(scores, labels)));
    worst_ll = std::max(worst_ll, std::abs(eval::logloss(scores, labels) -
                                           logloss_direct(scores, labels)));
    if (worst_auc > 1e-12 || worst_ll > 1e-12) {
      return {false, fmt("trial %d: auc gap %.3g logloss gap %.3g", trial,
                         worst_auc, worst_ll)};
    }
  }
  const double ic = eval::increment_cost(100.0, 100.0, 0.2, 0.1);
  if (ic != 10.0) {
    return {false, fmt("worked example: increment cost %.17g != 10", ic)};
  }
  return {true, fmt("100 trials, worst auc gap %.2g, worst logloss gap %.2g, "
                    "worked example exact",
                    worst_auc, worst_ll)};
}

// -------------------------------------------------------------- criterion 9

Outcome run_pipeline(const fs::path& dir) {
  const std::vector<std::vector<std::string>> commands = {
      {"gen", "--out", dir.string(), "--samples", "4000", "--seed", "7"},
      {"train", "--out", dir.string(), "--variant", "iidn", "--epochs", "2"},
      {"train", "--out", dir.string(), "--variant", "lr-baseline", "--epochs",
       "2"},
      {"allocate", "--out", dir.string(), "--model",
       (dir / "model-iidn.bin").string(), "--cohort", "2000", "--budget",
       "500", "--sweep", "0,250,500,1000"},
      {"report", "--out", dir.string()},
  };
  for (const auto& command : commands) {
    std::string err;
    if (run(command, &err) != 0) {
      return {false, "command " + command[0] + " failed: " + err};
    }
  }
  return {true, ""};
}

Outcome check_reproducibility() {
  const fs::path dir1 = scratch_dir("acceptance_rep1");
  const fs::path dir2 = scratch_dir("acceptance_rep2");
  for (const auto& dir : {dir1, dir2}) {
    const auto outcome = run_pipeline(dir);
    if (!outcome.ok) return outcome;
  }
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir1)) {
    names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  std::size_t compared = 0;
  for (const auto& name : names) {
    const fs::path a = dir1 / name, b = dir2 / name;
    if (!fs::exists(b)) return {false, name + " missing from second run"};
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    std::string ca((std::istreambuf_iterator<char>(fa)), {});
    std::string cb((std::istreambuf_iterator<char>(fb)), {});
    if (name == "manifest.json") {
      auto ja = nlohmann::json::parse(ca), jb = nlohmann::json::parse(cb);
      ja.erase("created_at");
      jb.erase("created_at");
      if (ja != jb) return {false, "manifest differs beyond created_at"};
    } else if (ca != cb) {
      return {false, name + " differs between identical runs"};
    }
    ++compared;
  }
  std::size_t second_count = 0;
  for ([[maybe_unused]] const auto& entry : fs::directory_iterator(dir2)) {
    ++second_count;
  }
  if (second_count != names.size()) {
    return {false, "second run produced extra artifacts"};
  }
  return {true, fmt("%zu artifacts byte-identical (manifest timestamp aside)",
                    compared)};
}

}  // namespace

int main() {
  std::vector<std::pair<int, Outcome>> results;
  BudgetAudit audit;
  TrainedArtifacts artifacts;

  results.emplace_back(1, check_gradient_fidelity());
  results.emplace_back(2, check_forward_invariants());
  results.emplace_back(8, check_metric_oracles());
  results.emplace_back(4, check_allocation_bounds(audit));
  results.emplace_back(3, check_learning_margins(artifacts));
  if (results.back().second.ok) {
    results.emplace_back(6, check_ab_harness(artifacts, audit));
    results.emplace_back(7, check_monotonicity(artifacts));
  } else {
    results.emplace_back(6, Outcome{false, "skipped: training gate failed"});
    results.emplace_back(7, Outcome{false, "skipped: training gate failed"});
  }
  results.emplace_back(9, check_reproducibility());
  results.emplace_back(5, check_budget_exactness(audit));

  std::sort(results.begin(), results.end(),
            [](const auto& l, const auto& r) { return l.first < r.first; });
  static const char* kLabels[] = {
      "",
      "gradient fidelity",
      "forward invariants",
      "learning margins",
      "allocation bounds",
      "budget exactness",
      "a/b harness",
      "score monotonicity",
      "metric oracles",
      "reproducibility",
  };
  bool all_ok = true;
  for (const auto& [id, outcome] : results) {
    all_ok = all_ok && outcome.ok;
    std::printf("%s criterion %d (%s): %s\n", outcome.ok ? "PASS" : "FAIL", id,
                kLabels[id], outcome.detail.c_str());
  }
  return all_ok ? 0 : 1;
}
