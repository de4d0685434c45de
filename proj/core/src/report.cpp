#include "coupon/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "coupon/errors.hpp"

namespace coupon::report {
namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& path) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw IoError("csv parse: bad number '" + s + "' in " + path);
  }
  return v;
}

long long parse_int(const std::string& s, const std::string& path) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') {
    throw IoError("csv parse: bad integer '" + s + "' in " + path);
  }
  return v;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

// Returns the data rows after validating the schema line and header.
std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               const std::string& schema,
                                               const std::string& header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open expected artifact " + path);
  std::string line;
  if (!std::getline(in, line) || line != "# schema: " + schema) {
    throw IoError(path + ": expected schema '" + schema + "'");
  }
  if (!std::getline(in, line) || line != header) {
    throw IoError(path + ": unexpected header");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(split_commas(line));
  }
  return rows;
}

void open_csv(std::ofstream& out, const std::string& path,
              const std::string& schema, const std::string& header) {
  out.open(path);
  if (!out) throw IoError("cannot open " + path);
  out << "# schema: " << schema << "\n" << header << "\n";
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + "  " : s + std::string(width - s.size() + 2, ' ');
}

std::string fmt_fixed(double v, int digits) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

constexpr const char* kMetricsHeader = "variant,val_auc,val_logloss,val_samples";
constexpr const char* kAbHeader =
    "policy,users,stayed,paid,spend_cents,retention,conversion,increment_cost";
constexpr const char* kSweepHeader =
    "budget_cents,alpha,spend_cents,paid,conversion,increment_cost";

}  // namespace

void write_metrics_csv(const std::string& path, const MetricsRow& row) {
  std::ofstream out;
  open_csv(out, path, "metrics/v1", kMetricsHeader);
  out << row.variant << ',' << fmt_double(row.val_auc) << ','
      << fmt_double(row.val_logloss) << ',' << row.val_samples << "\n";
  if (!out) throw IoError("write failed for " + path);
}

MetricsRow read_metrics_csv(const std::string& path) {
  const auto rows = read_csv(path, "metrics/v1", kMetricsHeader);
  if (rows.size() != 1 || rows[0].size() != 4) {
    throw IoError(path + ": expected exactly one metrics row");
  }
  MetricsRow row;
  row.variant = rows[0][0];
  row.val_auc = parse_double(rows[0][1], path);
  row.val_logloss = parse_double(rows[0][2], path);
  row.val_samples = static_cast<std::size_t>(parse_int(rows[0][3], path));
  return row;
}

void write_ab_csv(const std::string& path,
                  std::span<const eval::ArmReport> arms) {
  std::ofstream out;
  open_csv(out, path, "ab/v1", kAbHeader);
  for (const auto& arm : arms) {
    out << eval::policy_name(arm.policy) << ',' << arm.users << ','
        << arm.stayed << ',' << arm.paid << ',' << arm.spend << ','
        << fmt_double(arm.retention) << ',' << fmt_double(arm.conversion)
        << ',' << fmt_double(arm.increment_cost) << "\n";
  }
  if (!out) throw IoError("write failed for " + path);
}

std::vector<eval::ArmReport> read_ab_csv(const std::string& path) {
  const auto rows = read_csv(path, "ab/v1", kAbHeader);
  std::vector<eval::ArmReport> arms;
  for (const auto& fields : rows) {
    if (fields.size() != 8) throw IoError(path + ": malformed row");
    eval::ArmReport arm;
    bool known = false;
    for (eval::Policy p : {eval::Policy::kNon, eval::Policy::kAll,
                           eval::Policy::kUplift, eval::Policy::kMckp}) {
      if (fields[0] == eval::policy_name(p)) {
        arm.policy = p;
        known = true;
      }
    }
    if (!known) throw IoError(path + ": unknown policy '" + fields[0] + "'");
    arm.users = static_cast<std::size_t>(parse_int(fields[1], path));
    arm.stayed = static_cast<std::size_t>(parse_int(fields[2], path));
    arm.paid = static_cast<std::size_t>(parse_int(fields[3], path));
    arm.spend = parse_int(fields[4], path);
    arm.retention = parse_double(fields[5], path);
    arm.conversion = parse_double(fields[6], path);
    arm.increment_cost = parse_double(fields[7], path);
    arms.push_back(arm);
  }
  return arms;
}

void write_sweep_csv(const std::string& path,
                     std::span<const eval::SweepRow> rows) {
  std::ofstream out;
  open_csv(out, path, "sweep/v1", kSweepHeader);
  for (const auto& row : rows) {
    out << row.budget << ',' << fmt_double(row.alpha) << ',' << row.spend
        << ',' << row.paid << ',' << fmt_double(row.conversion) << ','
        << fmt_double(row.increment_cost) << "\n";
  }
  if (!out) throw IoError("write failed for " + path);
}

std::vector<eval::SweepRow> read_sweep_csv(const std::string& path) {
  const auto raw = read_csv(path, "sweep/v1", kSweepHeader);
  std::vector<eval::SweepRow> rows;
  for (const auto& fields : raw) {
    if (fields.size() != 6) throw IoError(path + ": malformed row");
    eval::SweepRow row;
    row.budget = parse_int(fields[0], path);
    row.alpha = parse_double(fields[1], path);
    row.spend = parse_int(fields[2], path);
    row.paid = static_cast<std::size_t>(parse_int(fields[3], path));
    row.conversion = parse_double(fields[4], path);
    row.increment_cost = parse_double(fields[5], path);
    rows.push_back(row);
  }
  return rows;
}

void write_monotonicity_csv(const std::string& path,
                            const eval::MonotonicityReport& report,
                            std::span<const Money> menu) {
  if (menu.size() != report.mean_pp.size()) {
    throw ContractError("monotonicity csv: menu/curve size mismatch");
  }
  std::ofstream out;
  open_csv(out, path, "monotonicity/v1", "amount_cents,mean_p_pay");
  for (std::size_t j = 0; j < menu.size(); ++j) {
    out << menu[j] << ',' << fmt_double(report.mean_pp[j]) << "\n";
  }
  out << "# users=" << report.users << " monotone_fraction="
      << fmt_double(report.fraction) << "\n";
  if (!out) throw IoError("write failed for " + path);
}

std::string render_model_table(std::span<const MetricsRow> rows) {
  std::ostringstream out;
  out << pad("model", 16) << pad("val AUC", 10) << pad("val Logloss", 12)
      << "samples\n";
  for (const auto& row : rows) {
    out << pad(row.variant, 16) << pad(fmt_fixed(row.val_auc, 4), 10)
        << pad(fmt_fixed(row.val_logloss, 4), 12) << row.val_samples << "\n";
  }
  return out.str();
}

std::string render_policy_table(std::span<const eval::ArmReport> arms) {
  std::ostringstream out;
  out << pad("policy", 16) << pad("users", 8) << pad("retention", 10)
      << pad("conversion", 11) << pad("spend", 12) << "cost/incr buyer\n";
  for (const auto& arm : arms) {
    out << pad(eval::policy_name(arm.policy), 16)
        << pad(std::to_string(arm.users), 8)
        << pad(fmt_fixed(arm.retention, 4), 10)
        << pad(fmt_fixed(arm.conversion, 4), 11)
        << pad(fmt_fixed(cents_to_units(arm.spend), 2), 12)
        << fmt_fixed(arm.increment_cost, 2) << "\n";
  }
  return out.str();
}

std::string render_sweep_table(std::span<const eval::SweepRow> rows) {
  std::ostringstream out;
  out << pad("budget", 12) << pad("alpha", 10) << pad("spend", 12)
      << pad("conversion", 11) << "cost/incr buyer\n";
  for (const auto& row : rows) {
    out << pad(fmt_fixed(cents_to_units(row.budget), 2), 12)
        << pad(fmt_fixed(row.alpha, 4), 10)
        << pad(fmt_fixed(cents_to_units(row.spend), 2), 12)
        << pad(fmt_fixed(row.conversion, 4), 11)
        << fmt_fixed(row.increment_cost, 2) << "\n";
  }
  return out.str();
}

}  // namespace coupon::report
