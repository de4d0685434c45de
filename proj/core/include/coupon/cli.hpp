#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "coupon/data.hpp"

namespace coupon::cli {

// Exit codes: usage/config problems, I/O failures and runtime breaches get
// distinct values so scripts can react without parsing messages.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitFailure = 4;

// Everything the four subcommands can configure, resolved from defaults,
// then the optional config file, then command-line flags (flags win).
struct RunConfig {
  std::string out_dir = "out";

  // gen
  std::uint64_t seed = 7;
  std::size_t samples = 50000;
  std::string population_file;

  // train
  std::string variant = "iidn";
  int epochs = 16;
  int batch_size = 128;
  double learning_rate = 0.01;
  double val_fraction = 0.2;
  std::uint64_t split_seed = 101;
  std::uint64_t init_seed = 11;
  std::uint64_t shuffle_seed = 1;
  int embed_dim = 32;
  int hidden_dim = 16;
  std::string dataset_file;  // default <out>/dataset.jsonl

  // allocate
  double budget_units = 25000.0;
  double gamma = 0.8;
  double alpha_min = 0.02;
  double all_amount_units = 2.0;
  std::size_t cohort = 100000;
  std::uint64_t cohort_seed = 0;  // 0 = derive from the gen seed
  std::string model_file;  // default <out>/model-iidn.bin
  std::vector<double> sweep_units;
};

// Runs one invocation; args exclude the program name. Normal output goes to
// `out`, diagnostics to `err`; never throws.
int run_cli(std::vector<std::string> args, std::ostream& out,
            std::ostream& err);

}  // namespace coupon::cli
