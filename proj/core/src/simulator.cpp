#include "coupon/simulator.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "coupon/errors.hpp"
#include "json.hpp"

namespace coupon::sim {
namespace {

using nlohmann::json;

// Child-stream tags; each user draws from independent streams so regenerating
// features never perturbs labels and vice versa.
constexpr std::uint64_t kUserStream = 0xA1;
constexpr std::uint64_t kLabelStream = 0xA2;
constexpr std::uint64_t kExposureStream = 0xA3;

constexpr int kIntentActions = 4;  // actions [vocab-4, vocab) are intent-like

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

int bucket(double x01, int buckets) {
  const int b = static_cast<int>(std::floor(x01 * buckets));
  return std::min(buckets - 1, std::max(0, b));
}

void check_prob_range(const std::string& name, double lo, double hi) {
  if (!(lo > 0.0 && hi < 1.0 && lo <= hi)) {
    throw ConfigError("population spec: " + name +
                      " range must satisfy 0 < lo <= hi < 1");
  }
}

void check_sens_range(const std::string& name, double lo, double hi) {
  if (!(lo >= 0.0 && lo <= hi)) {
    throw ConfigError("population spec: " + name +
                      " range must satisfy 0 <= lo <= hi");
  }
}

json segment_to_json(const SegmentSpec& s) {
  return json{{"name", s.name},
              {"weight", s.weight},
              {"stay_base", {s.stay_base_lo, s.stay_base_hi}},
              {"buy_base", {s.buy_base_lo, s.buy_base_hi}},
              {"stay_sens", {s.stay_sens_lo, s.stay_sens_hi}},
              {"buy_sens", {s.buy_sens_lo, s.buy_sens_hi}},
              {"intent_rate", s.intent_rate}};
}

SegmentSpec segment_from_json(const json& j) {
  SegmentSpec s;
  s.name = j.at("name").get<std::string>();
  s.weight = j.at("weight").get<double>();
  const auto range = [&](const char* key, double& lo, double& hi) {
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.size() != 2) {
      throw ConfigError(std::string("population spec: ") + key +
                        " must be a [lo, hi] pair");
    }
    lo = arr[0].get<double>();
    hi = arr[1].get<double>();
  };
  range("stay_base", s.stay_base_lo, s.stay_base_hi);
  range("buy_base", s.buy_base_lo, s.buy_base_hi);
  range("stay_sens", s.stay_sens_lo, s.stay_sens_hi);
  range("buy_sens", s.buy_sens_lo, s.buy_sens_hi);
  s.intent_rate = j.at("intent_rate").get<double>();
  return s;
}

}  // namespace

PopulationSpec PopulationSpec::builtin() {
  PopulationSpec spec;
  spec.segments = {
      // Loyal users who pay anyway: coupons are nearly pure waste here, which
      // is what the p_stay gate is for.
      // Loyal users who pay anyway: coupons are nearly pure waste here, which
      // is what the p_stay gate is for.
      {"insensitive-loyal", 0.25, 0.76, 0.98, 0.14, 0.40, 0.00, 0.02, 0.00,
       0.05, 0.24},
      // The allocator's target: low base propensity, strong response.
      {"sensitive-leaver", 0.25, 0.15, 0.55, 0.05, 0.28, 0.04, 0.12, 0.25,
       0.45, 0.22},
      {"never-buyer", 0.30, 0.20, 0.70, 0.004, 0.03, 0.00, 0.04, 0.00, 0.08,
       0.12},
      {"average", 0.20, 0.40, 0.80, 0.06, 0.26, 0.02, 0.06, 0.08, 0.18, 0.18},
  };
  return spec;
}

void PopulationSpec::validate() const {
  if (action_vocab < kIntentActions + 2) {
    throw ConfigError("population spec: action_vocab too small");
  }
  if (static_slots <= 0 || static_buckets <= 0) {
    throw ConfigError("population spec: static dimensions must be positive");
  }
  if (max_session_len < 1 || mean_session_len < 1.0) {
    throw ConfigError("population spec: session length bounds must be >= 1");
  }
  if (menu.empty() || menu.front() != 0) {
    throw ConfigError("population spec: menu must start with the 0 amount");
  }
  for (std::size_t j = 1; j < menu.size(); ++j) {
    if (menu[j] <= menu[j - 1]) {
      throw ConfigError("population spec: menu must be strictly ascending");
    }
  }
  if (segments.empty()) {
    throw ConfigError("population spec: at least one segment required");
  }
  double total = 0.0;
  for (const auto& s : segments) {
    if (!(s.weight > 0.0)) {
      throw ConfigError("population spec: segment weights must be positive");
    }
    check_prob_range(s.name + ".stay_base", s.stay_base_lo, s.stay_base_hi);
    check_prob_range(s.name + ".buy_base", s.buy_base_lo, s.buy_base_hi);
    check_sens_range(s.name + ".stay_sens", s.stay_sens_lo, s.stay_sens_hi);
    check_sens_range(s.name + ".buy_sens", s.buy_sens_lo, s.buy_sens_hi);
    if (!(s.intent_rate > 0.0 && s.intent_rate < 0.5)) {
      throw ConfigError("population spec: intent_rate must be in (0, 0.5)");
    }
    total += s.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("population spec: segment weights must sum to 1");
  }
}

std::string PopulationSpec::to_json() const {
  json j{{"schema", "population/v1"},
         {"action_vocab", action_vocab},
         {"static_slots", static_slots},
         {"static_buckets", static_buckets},
         {"max_session_len", max_session_len},
         {"mean_session_len", mean_session_len},
         {"menu_cents", menu},
         {"segments", json::array()}};
  for (const auto& s : segments) j["segments"].push_back(segment_to_json(s));
  return j.dump(2) + "\n";
}

PopulationSpec PopulationSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("population spec: bad json: ") + e.what());
  }
  if (j.value("schema", "") != "population/v1") {
    throw ConfigError("population spec: unknown schema");
  }
  PopulationSpec spec;
  spec.action_vocab = j.at("action_vocab").get<int>();
  spec.static_slots = j.at("static_slots").get<int>();
  spec.static_buckets = j.at("static_buckets").get<int>();
  spec.max_session_len = j.at("max_session_len").get<int>();
  spec.mean_session_len = j.at("mean_session_len").get<double>();
  spec.menu = j.at("menu_cents").get<std::vector<Money>>();
  for (const auto& s : j.at("segments")) {
    spec.segments.push_back(segment_from_json(s));
  }
  spec.validate();
  return spec;
}

PopulationSpec PopulationSpec::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("population spec: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json(text);
}

void PopulationSpec::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("population spec: cannot open " + path);
  out << to_json();
  if (!out) throw IoError("population spec: write failed for " + path);
}

double UserTruth::p_stay(Money amount_cents) const {
  return sigmoid(stay_logit0 + stay_sens * cents_to_units(amount_cents));
}

double UserTruth::p_pay_given_stay(Money amount_cents) const {
  return sigmoid(buy_logit0 + buy_sens * cents_to_units(amount_cents));
}

Simulator::Simulator(PopulationSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), seed_(seed) {
  spec_.validate();
}

SimUser Simulator::make_user(std::int64_t user_id) const {
  Rng rng(Rng::mix(Rng::mix(seed_, kUserStream),
                   static_cast<std::uint64_t>(user_id)));

  std::vector<double> weights;
  weights.reserve(spec_.segments.size());
  for (const auto& s : spec_.segments) weights.push_back(s.weight);
  const std::size_t seg_idx = rng.categorical(weights);
  const SegmentSpec& seg = spec_.segments[seg_idx];

  SimUser user;
  user.user_id = user_id;
  user.truth.segment = static_cast<int>(seg_idx);
  user.truth.stay_logit0 =
      logit(rng.uniform(seg.stay_base_lo, seg.stay_base_hi));
  user.truth.buy_logit0 = logit(rng.uniform(seg.buy_base_lo, seg.buy_base_hi));
  user.truth.stay_sens = rng.uniform(seg.stay_sens_lo, seg.stay_sens_hi);
  user.truth.buy_sens = rng.uniform(seg.buy_sens_lo, seg.buy_sens_hi);

  // Session. Event-type counts depend only on segment-level rates, while the
  // user's own latents are written into *where* things happen: likely payers
  // place intent events late and shift from early-stage to late-stage intent
  // actions as the session progresses, likely leavers bounce near the end,
  // and per-event dwell drifts up over the session for engaged users. Every
  // ramp is symmetric around the session midpoint, so expected counts and
  // mean dwell stay flat and only order-aware readers can recover the drift.
  const int len = std::max(
      1, std::min(spec_.max_session_len,
                  1 + static_cast<int>(std::floor(rng.exponential(
                          spec_.mean_session_len - 1.0)))));
  const double ramp = std::tanh(1.5 * (user.truth.buy_logit0 + 2.0));
  const double p_stay0 = sigmoid(user.truth.stay_logit0);
  const double leave_bias = 0.35 * (1.0 - p_stay0);
  const double leave_ramp = std::tanh(3.0 * (0.5 - p_stay0));
  const int intent_base = spec_.action_vocab - kIntentActions;
  user.features.events.reserve(static_cast<std::size_t>(len));
  for (int t = 0; t < len; ++t) {
    const double phase = (2.0 * (t + 0.5) / len) - 1.0;  // -1 .. +1
    const double p_intent =
        std::min(0.98, std::max(0.01, seg.intent_rate * (1.0 + ramp * phase)));
    BehaviorEvent ev;
    if (rng.bernoulli(p_intent)) {
      const double p_late = 0.5 * (1.0 + 0.9 * ramp * phase);
      const int stage = rng.bernoulli(p_late) ? kIntentActions / 2 : 0;
      ev.action = intent_base + stage +
                  static_cast<int>(rng.uniform_index(kIntentActions / 2));
      ev.dwell_seconds = rng.exponential(8.0);
    } else if (rng.bernoulli(std::min(
                   0.9, std::max(0.0, leave_bias * (1.0 + leave_ramp * phase))))) {
      ev.action = 0;  // bounce-style exit view
      ev.dwell_seconds = rng.exponential(1.5);
    } else {
      ev.action = 1 + static_cast<int>(
                          rng.uniform_index(static_cast<std::uint64_t>(
                              intent_base - 1)));
      ev.dwell_seconds = rng.exponential(4.0);
    }
    ev.dwell_seconds *= 1.0 + 0.8 * ramp * phase;
    ev.dwell_seconds = std::min(std::max(ev.dwell_seconds, 0.0), 300.0);
    user.features.events.push_back(ev);
  }

  // Static portrait: a few noisily bucketed latents, a noisy segment code, a
  // band of pure-noise slots, and constant filler beyond that. The portrait
  // codes are deliberately blurry: the sharp copy of each latent lives in the
  // session ramps above, not here.
  const int S = spec_.static_slots;
  const int B = spec_.static_buckets;
  user.features.static_codes.resize(static_cast<std::size_t>(S));
  const auto noisy = [&](double x01, double sigma) {
    return bucket(clamp01(x01 + sigma * rng.normal()), B);
  };
  for (int s = 0; s < S; ++s) {
    int code = 0;
    switch (s) {
      case 0: code = noisy(p_stay0, 0.25); break;
      case 1: code = noisy(sigmoid(user.truth.buy_logit0) * 2.5, 0.30); break;
      case 2: code = noisy(user.truth.buy_sens / 0.5, 0.15); break;
      case 3: code = noisy(user.truth.stay_sens / 0.2, 0.15); break;
      case 4:
        code = rng.bernoulli(0.3)
                   ? static_cast<int>(rng.uniform_index(spec_.segments.size()))
                   : static_cast<int>(seg_idx);
        break;
      default:
        code = s < 25 ? static_cast<int>(rng.uniform_index(
                            static_cast<std::uint64_t>(B)))
                      : (s * 7 + 3) % B;
        break;
    }
    user.features.static_codes[static_cast<std::size_t>(s)] = code;
  }
  user.features.coupon_cents = 0;
  return user;
}

std::vector<SimUser> Simulator::make_population(std::int64_t first_id,
                                                std::size_t count) const {
  std::vector<SimUser> users;
  users.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    users.push_back(make_user(first_id + static_cast<std::int64_t>(i)));
  }
  return users;
}

std::pair<bool, bool> Simulator::sample_labels(const UserTruth& truth,
                                               Money amount_cents, Rng& rng) {
  const double u_stay = rng.uniform();
  const double u_pay = rng.uniform();
  const bool stayed = u_stay < truth.p_stay(amount_cents);
  const bool paid = stayed && u_pay < truth.p_pay_given_stay(amount_cents);
  return {stayed, paid};
}

std::vector<LabeledSample> Simulator::make_dataset(std::size_t n,
                                                   std::int64_t first_id) const {
  if (n == 0) throw ContractError("make_dataset: n must be positive");
  std::vector<LabeledSample> samples;
  samples.reserve(n);
  const std::uint64_t label_base = Rng::mix(seed_, kLabelStream);
  const std::uint64_t exposure_base = Rng::mix(seed_, kExposureStream);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t uid = first_id + static_cast<std::int64_t>(i);
    SimUser user = make_user(uid);
    Rng exposure(Rng::mix(exposure_base, static_cast<std::uint64_t>(uid)));
    const Money amount =
        spec_.menu[exposure.uniform_index(spec_.menu.size())];
    Rng labels(Rng::mix(label_base, static_cast<std::uint64_t>(uid)));
    const auto [stayed, paid] = sample_labels(user.truth, amount, labels);
    LabeledSample sample;
    sample.user_id = uid;
    sample.features = std::move(user.features);
    sample.features.coupon_cents = amount;
    sample.stayed = stayed;
    sample.paid = paid;
    validate_sample(sample);
    samples.push_back(std::move(sample));
  }
  return samples;
}

void write_truth_csv(const std::string& path, std::span<const SimUser> users,
                     std::span<const Money> menu) {
  std::ofstream out(path);
  if (!out) throw IoError("truth csv: cannot open " + path);
  out << "# schema: truth/v1\n";
  out << "user_id,amount_cents,p_stay,p_pay_given_stay,p_pay\n";
  char buf[160];
  for (const auto& user : users) {
    for (Money amount : menu) {
      std::snprintf(buf, sizeof buf, "%lld,%lld,%.17g,%.17g,%.17g\n",
                    static_cast<long long>(user.user_id),
                    static_cast<long long>(amount), user.truth.p_stay(amount),
                    user.truth.p_pay_given_stay(amount),
                    user.truth.p_pay(amount));
      out << buf;
    }
  }
  if (!out) throw IoError("truth csv: write failed for " + path);
}

}  // namespace coupon::sim
