#include "coupon/lr_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coupon/errors.hpp"

namespace coupon::lr {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double bce(double p, bool y) { return y ? -std::log(p) : -std::log1p(-p); }

struct Heads {
  const nn::Matrix* ws;
  const nn::Matrix* bs;
  const nn::Matrix* wp;
  const nn::Matrix* bp;
};

Heads bind(const nn::ParamStore& params) {
  return {&params.get("lr.w_s"), &params.get("lr.b_s"), &params.get("lr.w_p"),
          &params.get("lr.b_p")};
}

std::pair<double, double> run(const Heads& h, std::span<const double> x) {
  const double zs = dot(h.ws->row(0), x) + h.bs->at(0, 0);
  const double zp = dot(h.wp->row(0), x) + h.bp->at(0, 0);
  return {nn::sigmoid(zs), nn::sigmoid(zp)};
}

}  // namespace

int LrConfig::feature_dim() const {
  return action_vocab + 2 + static_slots * static_buckets + 1;
}

void LrConfig::validate() const {
  if (action_vocab <= 0 || static_slots <= 0 || static_buckets <= 0) {
    throw ConfigError("lr config: dimensions must be positive");
  }
  if (coupon_amounts_cents.empty()) {
    throw ConfigError("lr config: coupon menu must not be empty");
  }
  for (std::size_t j = 0; j < coupon_amounts_cents.size(); ++j) {
    if (coupon_amounts_cents[j] < 0) {
      throw ConfigError("lr config: coupon amounts must be non-negative");
    }
    if (j > 0 && coupon_amounts_cents[j] <= coupon_amounts_cents[j - 1]) {
      throw ConfigError("lr config: coupon amounts must be strictly ascending");
    }
  }
}

void featurize(const LrConfig& cfg, const FeatureTuple& sample,
               std::span<double> out) {
  const std::size_t dim = static_cast<std::size_t>(cfg.feature_dim());
  if (out.size() != dim) throw ShapeError("lr featurize: bad output size");
  std::fill(out.begin(), out.end(), 0.0);

  const auto& events = sample.events;
  const double len = static_cast<double>(events.size());
  double dwell_sum = 0.0;
  for (const auto& ev : events) {
    if (ev.action >= 0 && ev.action < cfg.action_vocab) {
      out[static_cast<std::size_t>(ev.action)] += 1.0;
    }
    dwell_sum += ev.dwell_seconds;
  }
  if (!events.empty()) {
    for (int a = 0; a < cfg.action_vocab; ++a) out[a] /= len;
  }
  std::size_t pos = static_cast<std::size_t>(cfg.action_vocab);
  out[pos++] = events.empty() ? 0.0 : dwell_sum / (len * 10.0);
  out[pos++] = std::log1p(len) / std::log1p(100.0);

  if (sample.static_codes.size() != static_cast<std::size_t>(cfg.static_slots)) {
    throw ContractError("lr featurize: static code count mismatch");
  }
  for (int s = 0; s < cfg.static_slots; ++s) {
    const int code = sample.static_codes[static_cast<std::size_t>(s)];
    if (code >= 0 && code < cfg.static_buckets) {
      out[pos + static_cast<std::size_t>(s * cfg.static_buckets + code)] = 1.0;
    }
  }
  pos += static_cast<std::size_t>(cfg.static_slots * cfg.static_buckets);
  out[pos] = cents_to_units(sample.coupon_cents) / 5.0;
}

nn::ParamStore make_params(const LrConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t dim = static_cast<std::size_t>(cfg.feature_dim());
  nn::ParamStore store;
  Rng rng(seed);
  for (const char* name : {"lr.w_s", "lr.w_p"}) {
    auto& w = store.add(name, nn::Matrix(1, dim));
    nn::ParamStore::init_uniform(w, dim, rng);
  }
  store.add("lr.b_s", nn::Matrix(1, 1));
  store.add("lr.b_p", nn::Matrix(1, 1));
  return store;
}

BatchLoss forward_backward(const LrConfig& cfg, const nn::ParamStore& params,
                           std::span<const LabeledSample> samples,
                           std::span<const std::size_t> index,
                           nn::Gradients* grads) {
  cfg.validate();
  if (index.empty()) throw ContractError("lr forward_backward: empty batch");
  const std::size_t dim = static_cast<std::size_t>(cfg.feature_dim());
  const Heads h = bind(params);
  const double scale = 1.0 / static_cast<double>(index.size());

  nn::Matrix* gws = nullptr;
  nn::Matrix* gbs = nullptr;
  nn::Matrix* gwp = nullptr;
  nn::Matrix* gbp = nullptr;
  if (grads != nullptr) {
    gws = &grads->accum("lr.w_s", 1, dim);
    gbs = &grads->accum("lr.b_s", 1, 1);
    gwp = &grads->accum("lr.w_p", 1, dim);
    gbp = &grads->accum("lr.b_p", 1, 1);
  }

  std::vector<double> x(dim);
  BatchLoss loss;
  for (std::size_t k : index) {
    if (k >= samples.size()) throw ContractError("lr forward_backward: index out of range");
    const LabeledSample& s = samples[k];
    featurize(cfg, s.features, x);
    const auto [ps, pp] = run(h, x);
    loss.stay += bce(ps, s.stayed);
    loss.pay += bce(pp, s.paid);
    if (grads != nullptr) {
      const double dzs = scale * (ps - (s.stayed ? 1.0 : 0.0));
      const double dzp = scale * (pp - (s.paid ? 1.0 : 0.0));
      auto ws_row = gws->row(0);
      auto wp_row = gwp->row(0);
      for (std::size_t i = 0; i < dim; ++i) {
        ws_row[i] += dzs * x[i];
        wp_row[i] += dzp * x[i];
      }
      gbs->at(0, 0) += dzs;
      gbp->at(0, 0) += dzp;
    }
  }
  loss.stay *= scale;
  loss.pay *= scale;
  return loss;
}

BatchLoss forward_backward(const LrConfig& cfg, const nn::ParamStore& params,
                           std::span<const LabeledSample> samples,
                           nn::Gradients* grads) {
  std::vector<std::size_t> index(samples.size());
  std::iota(index.begin(), index.end(), std::size_t{0});
  return forward_backward(cfg, params, samples, index, grads);
}

LrModel LrModel::init(const LrConfig& cfg, std::uint64_t seed) {
  return LrModel(cfg, make_params(cfg, seed));
}

LrModel::LrModel(LrConfig cfg, nn::ParamStore params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
}

IntentScores LrModel::score(const FeatureTuple& sample) const {
  std::vector<double> x(static_cast<std::size_t>(cfg_.feature_dim()));
  featurize(cfg_, sample, x);
  const auto [ps, pp] = run(bind(params_), x);
  return IntentScores::from_marginals(ps, pp);
}

std::vector<IntentScores> LrModel::score_menu(const FeatureTuple& sample) const {
  std::vector<double> x(static_cast<std::size_t>(cfg_.feature_dim()));
  featurize(cfg_, sample, x);
  const Heads h = bind(params_);
  std::vector<IntentScores> out;
  out.reserve(cfg_.coupon_amounts_cents.size());
  for (Money amount : cfg_.coupon_amounts_cents) {
    x.back() = cents_to_units(amount) / 5.0;
    const auto [ps, pp] = run(h, x);
    out.push_back(IntentScores::from_marginals(ps, pp));
  }
  return out;
}

}  // namespace coupon::lr
