#include "coupon/param_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "coupon/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "serialized parameter files assume a little-endian host");
static_assert(std::numeric_limits<double>::is_iec559);

namespace coupon::nn {

namespace {

constexpr char kMagic[4] = {'N', 'N', 'P', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("parameter stream truncated");
  return value;
}

void write_doubles(std::ostream& out, std::span<const double> values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

void read_doubles(std::istream& in, std::span<double> values) {
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) throw IoError("parameter stream truncated");
}

}  // namespace

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ContractError("Adam: learning rate must be positive");
  if (!(epsilon > 0.0)) throw ContractError("Adam: epsilon must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ContractError("Adam: beta1 must be in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ContractError("Adam: beta2 must be in [0,1)");
}

Gradients Gradients::zeros_like(const ParamStore& store) {
  Gradients g;
  for (const auto& name : store.names()) {
    const Matrix& p = store.get(name);
    g.accum(name, p.rows(), p.cols());
  }
  return g;
}

Matrix& Gradients::accum(const std::string& name, std::size_t rows,
                         std::size_t cols) {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    order_.push_back(name);
    return entries_.emplace(name, Matrix(rows, cols)).first->second;
  }
  if (it->second.rows() != rows || it->second.cols() != cols) {
    throw ShapeError("Gradients: shape mismatch for " + name);
  }
  return it->second;
}

const Matrix& Gradients::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("Gradients: missing " + name);
  return it->second;
}

bool Gradients::has(const std::string& name) const {
  return entries_.contains(name);
}

void Gradients::scale(double factor) {
  for (auto& [_, m] : entries_) {
    for (double& v : m.values()) v *= factor;
  }
}

void Gradients::clear() {
  entries_.clear();
  order_.clear();
}

Matrix& ParamStore::add(std::string name, Matrix value) {
  if (index_.contains(name)) {
    throw ContractError("ParamStore: duplicate parameter " + name);
  }
  index_.emplace(name, slots_.size());
  order_.push_back(name);
  Slot s;
  s.name = name;
  s.m = Matrix(value.rows(), value.cols());
  s.v = Matrix(value.rows(), value.cols());
  s.value = std::move(value);
  slots_.push_back(std::move(s));
  return slots_.back().value;
}

ParamStore::Slot& ParamStore::slot(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("ParamStore: unknown parameter " + name);
  return slots_[it->second];
}

const ParamStore::Slot& ParamStore::slot(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("ParamStore: unknown parameter " + name);
  return slots_[it->second];
}

Matrix& ParamStore::get(const std::string& name) { return slot(name).value; }
const Matrix& ParamStore::get(const std::string& name) const {
  return slot(name).value;
}
bool ParamStore::has(const std::string& name) const {
  return index_.contains(name);
}
const Matrix& ParamStore::first_moment(const std::string& name) const {
  return slot(name).m;
}
const Matrix& ParamStore::second_moment(const std::string& name) const {
  return slot(name).v;
}

void ParamStore::init_uniform(Matrix& m, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
}

void adam_step(ParamStore& store, const Gradients& grads,
               const AdamConfig& cfg) {
  cfg.validate();
  if (grads.size() != store.size()) {
    throw ContractError("adam_step: gradient count " +
                        std::to_string(grads.size()) +
                        " does not match parameter count " +
                        std::to_string(store.size()));
  }
  for (const auto& name : store.names()) {
    if (!grads.has(name)) {
      throw ContractError("adam_step: missing gradient for " + name);
    }
  }

  store.step_ += 1;
  const double t = static_cast<double>(store.step_);
  const double corr1 = 1.0 - std::pow(cfg.beta1, t);
  const double corr2 = 1.0 - std::pow(cfg.beta2, t);

  for (auto& s : store.slots_) {
    const Matrix& g = grads.get(s.name);
    if (!g.same_shape(s.value)) {
      throw ShapeError("adam_step: gradient shape mismatch for " + s.name);
    }
    auto val = s.value.values();
    auto m = s.m.values();
    auto v = s.v.values();
    const auto gv = g.values();
    for (std::size_t i = 0; i < val.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gv[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gv[i] * gv[i];
      const double m_hat = m[i] / corr1;
      const double v_hat = v[i] / corr2;
      val[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
    check_finite(s.value, "parameter " + s.name + " after adam_step");
  }
}

double clip_gradient_norm(Gradients& grads, double max_norm) {
  if (!(max_norm > 0.0)) {
    throw ContractError("clip_gradient_norm: max_norm must be > 0");
  }
  double sq = 0.0;
  for (const auto& name : grads.names()) {
    for (double g : grads.get(name).values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

void ParamStore::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, step_);
  write_pod(out, static_cast<std::uint32_t>(slots_.size()));
  for (const auto& s : slots_) {
    write_pod(out, static_cast<std::uint32_t>(s.name.size()));
    out.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
    write_pod(out, static_cast<std::uint64_t>(s.value.rows()));
    write_pod(out, static_cast<std::uint64_t>(s.value.cols()));
    write_doubles(out, s.value.values());
    write_doubles(out, s.m.values());
    write_doubles(out, s.v.values());
  }
  if (!out) throw IoError("failed writing parameter stream");
}

ParamStore ParamStore::load(std::istream& in) {
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a parameter file (bad magic)");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) {
    throw IoError("unsupported parameter file version " + std::to_string(version));
  }
  ParamStore store;
  store.step_ = read_pod<std::uint64_t>(in);
  const auto count = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw IoError("parameter stream truncated");
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    Matrix value(rows, cols);
    read_doubles(in, value.values());
    Matrix& stored = store.add(name, std::move(value));
    (void)stored;
    Slot& s = store.slots_.back();
    read_doubles(in, s.m.values());
    read_doubles(in, s.v.values());
  }
  return store;
}

void ParamStore::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  save(out);
}

ParamStore ParamStore::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  return load(in);
}

}  // namespace coupon::nn
