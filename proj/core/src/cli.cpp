#include "coupon/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "coupon/allocator.hpp"
#include "coupon/errors.hpp"
#include "coupon/evaluation.hpp"
#include "coupon/model_io.hpp"
#include "coupon/report.hpp"
#include "coupon/simulator.hpp"
#include "coupon/train.hpp"

namespace coupon::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::int64_t kCohortFirstId = 10'000'001;

const std::vector<std::string>& valid_variants() {
  static const std::vector<std::string> names = {
      "iidn", "single-lstm", "non-attention", "non-auxiliary", "lr-baseline"};
  return names;
}

std::string joined_variants() {
  std::string s;
  for (const auto& name : valid_variants()) {
    if (!s.empty()) s += ", ";
    s += name;
  }
  return s;
}

std::string iso_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string artifact(const RunConfig& rc, const std::string& name) {
  return (fs::path(rc.out_dir) / name).string();
}

// gen honors --population; later stages reuse the spec gen wrote so every
// stage sees the same marketplace.
sim::PopulationSpec resolve_population(const RunConfig& rc, bool prefer_saved) {
  if (!rc.population_file.empty()) {
    return sim::PopulationSpec::load_file(rc.population_file);
  }
  const std::string saved = artifact(rc, "population.json");
  if (prefer_saved && fs::exists(saved)) {
    return sim::PopulationSpec::load_file(saved);
  }
  return sim::PopulationSpec::builtin();
}

void cmd_gen(const RunConfig& rc, std::ostream& out) {
  fs::create_directories(rc.out_dir);
  const sim::PopulationSpec pop = resolve_population(rc, false);
  const sim::Simulator simulator(pop, rc.seed);
  const std::vector<LabeledSample> samples = simulator.make_dataset(rc.samples);
  write_dataset(artifact(rc, "dataset.jsonl"), samples);

  const std::vector<sim::SimUser> users =
      simulator.make_population(1, rc.samples);
  write_truth_csv(artifact(rc, "truth.csv"), users, pop.menu);
  pop.save_file(artifact(rc, "population.json"));

  std::size_t stayed = 0, paid = 0;
  for (const auto& s : samples) {
    stayed += s.stayed ? 1 : 0;
    paid += s.paid ? 1 : 0;
  }
  const double n = static_cast<double>(samples.size());
  json manifest{{"schema", "manifest/v1"},
                {"created_at", iso_now()},
                {"seed", rc.seed},
                {"samples", samples.size()},
                {"stay_rate", static_cast<double>(stayed) / n},
                {"positive_rate", static_cast<double>(paid) / n},
                {"menu_cents", pop.menu},
                {"files",
                 {{"dataset", "dataset.jsonl"},
                  {"truth", "truth.csv"},
                  {"population", "population.json"}}}};
  std::ofstream mf(artifact(rc, "manifest.json"));
  if (!mf) throw IoError("cannot open " + artifact(rc, "manifest.json"));
  mf << manifest.dump(2) << "\n";
  if (!mf) throw IoError("write failed for " + artifact(rc, "manifest.json"));

  out << "wrote " << samples.size() << " samples to "
      << artifact(rc, "dataset.jsonl") << " (stay rate "
      << static_cast<double>(stayed) / n << ", pay rate "
      << static_cast<double>(paid) / n << ")\n";
}

std::vector<report::MetricsRow> existing_metrics(const RunConfig& rc) {
  std::vector<report::MetricsRow> rows;
  for (const auto& name : valid_variants()) {
    const std::string path = artifact(rc, "metrics-" + name + ".csv");
    if (fs::exists(path)) rows.push_back(report::read_metrics_csv(path));
  }
  return rows;
}

void cmd_train(const RunConfig& rc, std::ostream& out) {
  if (std::find(valid_variants().begin(), valid_variants().end(), rc.variant) ==
      valid_variants().end()) {
    throw ContractError("unknown variant '" + rc.variant +
                        "'; valid variants: " + joined_variants());
  }
  const std::string dataset_path =
      rc.dataset_file.empty() ? artifact(rc, "dataset.jsonl") : rc.dataset_file;
  const std::vector<LabeledSample> data = read_dataset(dataset_path);
  if (data.empty()) throw ContractError(dataset_path + " holds no samples");
  const train::Split split =
      train::split_by_user(data, rc.val_fraction, rc.split_seed);
  if (split.train.empty() || split.validation.empty()) {
    throw ContractError(
        "empty train or validation side; adjust --val-fraction or add data");
  }

  train::TrainConfig tc;
  tc.epochs = rc.epochs;
  tc.batch_size = rc.batch_size;
  tc.adam.learning_rate = rc.learning_rate;
  tc.shuffle_seed = rc.shuffle_seed;

  const sim::PopulationSpec pop = resolve_population(rc, true);
  fs::create_directories(rc.out_dir);

  std::vector<train::EpochStats> curve;
  std::vector<double> val_scores;
  std::vector<int> val_labels;
  val_scores.reserve(split.validation.size());
  val_labels.reserve(split.validation.size());
  const std::string model_path = artifact(rc, "model-" + rc.variant + ".bin");

  if (rc.variant == "lr-baseline") {
    lr::LrConfig cfg;
    cfg.action_vocab = pop.action_vocab;
    cfg.static_slots = pop.static_slots;
    cfg.static_buckets = pop.static_buckets;
    cfg.coupon_amounts_cents = pop.menu;
    lr::LrModel model = lr::LrModel::init(cfg, rc.init_seed);
    curve = train::train_lr(model, data, split.train, tc);
    for (std::size_t i : split.validation) {
      val_scores.push_back(model.score(data[i].features).p_pay);
      val_labels.push_back(data[i].paid ? 1 : 0);
    }
    AnyModel(std::move(model)).save_file(model_path);
  } else {
    iidn::IidnConfig cfg;
    cfg.variant = iidn::variant_from_name(rc.variant);
    cfg.embed_dim = rc.embed_dim;
    cfg.hidden_dim = rc.hidden_dim;
    cfg.enc1_dim = 2 * rc.hidden_dim;
    cfg.enc2_dim = rc.hidden_dim;
    cfg.dec_dim = rc.hidden_dim;
    cfg.action_vocab = pop.action_vocab;
    cfg.static_slots = pop.static_slots;
    cfg.static_buckets = pop.static_buckets;
    cfg.max_seq_len = pop.max_session_len;
    // Dwell buckets are equal-mass on the dataset; a label-free statistic,
    // so computing it on the full dataset leaks nothing.
    cfg.dwell_edges = iidn::dwell_quantile_edges(data, 8);
    cfg.coupon_amounts_cents = pop.menu;
    iidn::IidnModel model = iidn::IidnModel::init(cfg, rc.init_seed);
    curve = train::train_iidn(model, data, split.train, tc);
    for (std::size_t i : split.validation) {
      val_scores.push_back(model.score(data[i].features).p_pay);
      val_labels.push_back(data[i].paid ? 1 : 0);
    }
    AnyModel(std::move(model)).save_file(model_path);
  }

  report::MetricsRow row;
  row.variant = rc.variant;
  row.val_auc = eval::auc(val_scores, val_labels);
  row.val_logloss = eval::logloss(val_scores, val_labels);
  row.val_samples = split.validation.size();
  report::write_metrics_csv(artifact(rc, "metrics-" + rc.variant + ".csv"),
                            row);
  train::write_loss_curve_csv(
      artifact(rc, "loss-curve-" + rc.variant + ".csv"), curve);

  out << "trained " << rc.variant << " on " << split.train.size()
      << " samples (" << tc.epochs << " epochs); model saved to " << model_path
      << "\n\n";
  out << report::render_model_table(existing_metrics(rc));
}

void cmd_allocate(const RunConfig& rc, std::ostream& out) {
  const std::string model_path =
      rc.model_file.empty() ? artifact(rc, "model-iidn.bin") : rc.model_file;
  if (!fs::exists(model_path)) {
    throw IoError("missing expected artifact " + model_path +
                  " (run the train subcommand first)");
  }
  const AnyModel model = AnyModel::load_file(model_path);
  const std::vector<Money>& menu = model.menu();
  const sim::PopulationSpec pop = resolve_population(rc, true);
  const std::uint64_t master_seed =
      rc.cohort_seed != 0 ? rc.cohort_seed : rc.seed;
  const sim::Simulator simulator(pop, master_seed);
  const std::vector<sim::SimUser> users =
      simulator.make_population(kCohortFirstId, rc.cohort);

  const eval::MenuScoreFn scorer = [&](const sim::SimUser& user) {
    return model.score_menu(user.features);
  };
  eval::AbConfig ab;
  ab.budget = units_to_cents(rc.budget_units);
  ab.gamma = rc.gamma;
  ab.alpha_min = rc.alpha_min;
  ab.all_amount = units_to_cents(rc.all_amount_units);
  ab.outcome_seed = Rng::mix(master_seed, 0xE0);

  fs::create_directories(rc.out_dir);
  const eval::AbResult result = eval::run_ab(users, scorer, menu, ab);
  mckp::write_dual_state(artifact(rc, "dual.json"), result.dual);
  mckp::write_decision_log(artifact(rc, "decisions.csv"), result.ledger);
  report::write_ab_csv(artifact(rc, "ab.csv"), result.arms);

  const std::size_t held_out = std::min<std::size_t>(1000, users.size());
  const eval::MonotonicityReport mono = eval::monotonicity_report(
      std::span<const sim::SimUser>(users.data(), held_out), scorer, menu);
  report::write_monotonicity_csv(artifact(rc, "monotonicity.csv"), mono, menu);

  out << report::render_policy_table(result.arms);
  if (!rc.sweep_units.empty()) {
    std::vector<Money> budgets;
    budgets.reserve(rc.sweep_units.size());
    for (double units : rc.sweep_units) budgets.push_back(units_to_cents(units));
    const std::vector<eval::SweepRow> rows =
        eval::budget_sweep(users, scorer, menu, budgets, ab);
    report::write_sweep_csv(artifact(rc, "sweep.csv"), rows);
    out << "\n" << report::render_sweep_table(rows);
  }
}

void cmd_report(const RunConfig& rc, std::ostream& out) {
  const std::vector<report::MetricsRow> metrics = existing_metrics(rc);
  if (metrics.empty()) {
    throw IoError("missing expected artifact " +
                  artifact(rc, "metrics-iidn.csv") +
                  " (run the train subcommand first)");
  }
  const std::string ab_path = artifact(rc, "ab.csv");
  if (!fs::exists(ab_path)) {
    throw IoError("missing expected artifact " + ab_path +
                  " (run the allocate subcommand first)");
  }
  const std::vector<eval::ArmReport> arms = report::read_ab_csv(ab_path);

  std::string text = report::render_model_table(metrics);
  text += "\n";
  text += report::render_policy_table(arms);
  const std::string sweep_path = artifact(rc, "sweep.csv");
  if (fs::exists(sweep_path)) {
    text += "\n";
    text += report::render_sweep_table(report::read_sweep_csv(sweep_path));
  }

  const std::string report_path = artifact(rc, "report.txt");
  std::ofstream rf(report_path);
  if (!rf) throw IoError("cannot open " + report_path);
  rf << text;
  if (!rf) throw IoError("write failed for " + report_path);
  out << text;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"two-stage coupon allocation: simulate, train, allocate, report",
               "couponctl"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "config file with [gen]/[train]/[allocate]/[report] sections");
  RunConfig rc;

  CLI::App* gen = app.add_subcommand("gen", "generate dataset + ground truth");
  gen->add_option("--out", rc.out_dir, "artifact directory");
  gen->add_option("--samples", rc.samples, "dataset size");
  gen->add_option("--seed", rc.seed, "master seed");
  gen->add_option("--population", rc.population_file,
                  "population spec json (default: built-in marketplace)");

  CLI::App* train = app.add_subcommand("train", "train a scoring model");
  train->add_option("--out", rc.out_dir, "artifact directory");
  train->add_option("--variant", rc.variant,
                    "one of: " + joined_variants());
  train->add_option("--epochs", rc.epochs, "training epochs (0 = leave init)");
  train->add_option("--batch-size", rc.batch_size, "minibatch size");
  train->add_option("--learning-rate", rc.learning_rate, "Adam step size");
  train->add_option("--val-fraction", rc.val_fraction,
                    "held-out user fraction");
  train->add_option("--split-seed", rc.split_seed, "validation split seed");
  train->add_option("--init-seed", rc.init_seed, "parameter init seed");
  train->add_option("--shuffle-seed", rc.shuffle_seed, "epoch shuffle seed");
  train->add_option("--embed-dim", rc.embed_dim, "embedding width");
  train->add_option("--hidden-dim", rc.hidden_dim, "LSTM state width");
  train->add_option("--dataset", rc.dataset_file,
                    "dataset path (default <out>/dataset.jsonl)");

  CLI::App* allocate =
      app.add_subcommand("allocate", "run the budgeted A/B harness");
  allocate->add_option("--out", rc.out_dir, "artifact directory");
  allocate->add_option("--budget", rc.budget_units,
                       "per-arm budget in currency units");
  allocate->add_option("--gamma", rc.gamma, "stay-score eligibility cap");
  allocate->add_option("--alpha-min", rc.alpha_min,
                       "uplift policy threshold");
  allocate->add_option("--all-amount", rc.all_amount_units,
                       "fixed amount for the all-allocation arm (units)");
  allocate->add_option("--cohort", rc.cohort, "A/B cohort size");
  allocate->add_option("--seed", rc.seed, "master seed (must match gen)");
  allocate->add_option("--cohort-seed", rc.cohort_seed,
                       "override cohort seed (0 = derive from --seed)");
  allocate->add_option("--model", rc.model_file,
                       "model path (default <out>/model-iidn.bin)");
  allocate->add_option("--sweep", rc.sweep_units, "budget ladder in units")
      ->delimiter(',');

  CLI::App* rep = app.add_subcommand("report", "re-render tables from artifacts");
  rep->add_option("--out", rc.out_dir, "artifact directory");

  for (CLI::App* sub : {gen, train, allocate, rep}) {
    sub->configurable();
    // Lets `couponctl gen --config f` reach the app-level config option.
    sub->fallthrough();
  }

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) cmd_gen(rc, out);
    if (train->parsed()) cmd_train(rc, out);
    if (allocate->parsed()) cmd_allocate(rc, out);
    if (rep->parsed()) cmd_report(rc, out);
    return kExitOk;
  } catch (const ContractError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const InvariantBreach& e) {
    err << "invariant breach: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace coupon::cli
