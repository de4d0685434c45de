#pragma once

#include <span>
#include <string>
#include <vector>

#include "coupon/evaluation.hpp"

namespace coupon::report {

// All CSV artifacts open with "# schema: <name>/v1"; readers reject
// anything else. Floats are written with %.17g so a parse-write cycle is
// byte-stable.

struct MetricsRow {
  std::string variant;
  double val_auc = 0.0;
  double val_logloss = 0.0;
  std::size_t val_samples = 0;
};

void write_metrics_csv(const std::string& path, const MetricsRow& row);
MetricsRow read_metrics_csv(const std::string& path);

void write_ab_csv(const std::string& path,
                  std::span<const eval::ArmReport> arms);
std::vector<eval::ArmReport> read_ab_csv(const std::string& path);

void write_sweep_csv(const std::string& path,
                     std::span<const eval::SweepRow> rows);
std::vector<eval::SweepRow> read_sweep_csv(const std::string& path);

void write_monotonicity_csv(const std::string& path,
                            const eval::MonotonicityReport& report,
                            std::span<const Money> menu);

// Fixed-width text tables; pure functions of their inputs, so re-rendering
// the same artifacts reproduces identical bytes. NaN renders as "n/a".
std::string render_model_table(std::span<const MetricsRow> rows);
std::string render_policy_table(std::span<const eval::ArmReport> arms);
std::string render_sweep_table(std::span<const eval::SweepRow> rows);

}  // namespace coupon::report
