// Named trainable parameters with their Adam moments, plus the optimizer
// step and a bit-exact binary serialization.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "coupon/matrix.hpp"
#include "coupon/rng.hpp"

namespace coupon::nn {

struct AdamConfig {
  double learning_rate = 0.01;
  double epsilon = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;

  // ContractError unless lr > 0, eps > 0, 0 <= beta1 < 1, 0 <= beta2 < 1.
  void validate() const;
};

// Gradient accumulator keyed like a ParamStore. Entries are created lazily
// and accumulate across samples.
class Gradients {
 public:
  static Gradients zeros_like(const class ParamStore& store);

  // Create-or-get; ShapeError if an existing entry has a different shape.
  Matrix& accum(const std::string& name, std::size_t rows, std::size_t cols);
  const Matrix& get(const std::string& name) const;
  bool has(const std::string& name) const;
  std::size_t size() const { return entries_.size(); }
  const std::vector<std::string>& names() const { return order_; }
  void scale(double factor);
  void clear();

 private:
  std::unordered_map<std::string, Matrix> entries_;
  std::vector<std::string> order_;
};

class ParamStore {
 public:
  // Registers a parameter with zero moments. ContractError on duplicates.
  Matrix& add(std::string name, Matrix value);

  Matrix& get(const std::string& name);
  const Matrix& get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return slots_.size(); }

  std::uint64_t step() const { return step_; }
  const Matrix& first_moment(const std::string& name) const;
  const Matrix& second_moment(const std::string& name) const;

  // Fills a parameter with U[-1/sqrt(fan_in), +1/sqrt(fan_in)] draws.
  static void init_uniform(Matrix& m, std::size_t fan_in, Rng& rng);

  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;
  static ParamStore load(std::istream& in);
  static ParamStore load_file(const std::string& path);

  friend void adam_step(ParamStore&, const Gradients&, const AdamConfig&);

 private:
  struct Slot {
    std::string name;
    Matrix value;
    Matrix m;  // first moment
    Matrix v;  // second moment
  };

  Slot& slot(const std::string& name);
  const Slot& slot(const std::string& name) const;

  std::vector<Slot> slots_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t step_ = 0;
};

// One bias-corrected Adam update. Gradients must be keyed exactly like the
// store (ContractError otherwise); increments the step counter by 1.
void adam_step(ParamStore& store, const Gradients& grads,
               const AdamConfig& cfg);

// Rescales the gradients in place so their global L2 norm is at most
// max_norm; returns the pre-clip norm. ContractError unless max_norm > 0.
double clip_gradient_norm(Gradients& grads, double max_norm);

}  // namespace coupon::nn
