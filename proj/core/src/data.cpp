#include "coupon/data.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "coupon/rng.hpp"

namespace coupon {

using nlohmann::json;

std::string format_money(Money cents) {
  const bool neg = cents < 0;
  Money abs = neg ? -cents : cents;
  std::string s = std::to_string(abs / 100);
  const Money frac = abs % 100;
  if (frac != 0) {
    s += '.';
    s += static_cast<char>('0' + frac / 10);
    if (frac % 10 != 0) s += static_cast<char>('0' + frac % 10);
  }
  return neg ? "-" + s : s;
}

void validate_sample(const LabeledSample& sample) {
  if (sample.paid && !sample.stayed) {
    throw ContractError("sample " + std::to_string(sample.user_id) +
                        ": paid implies stayed");
  }
  if (sample.features.events.empty()) {
    throw ContractError("sample " + std::to_string(sample.user_id) +
                        ": behavior sequence must be non-empty");
  }
  for (const auto& e : sample.features.events) {
    if (!(e.dwell_seconds >= 0.0) || !std::isfinite(e.dwell_seconds)) {
      throw ContractError("sample " + std::to_string(sample.user_id) +
                          ": dwell must be finite and >= 0");
    }
  }
  if (sample.features.coupon_cents < 0) {
    throw ContractError("sample " + std::to_string(sample.user_id) +
                        ": coupon amount must be >= 0");
  }
}

void write_dataset(const std::string& path,
                   const std::vector<LabeledSample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << json{{"schema", "dataset/v1"}}.dump() << '\n';
  for (const auto& s : samples) {
    json events = json::array();
    for (const auto& e : s.features.events) {
      events.push_back(json::array({e.action, e.dwell_seconds}));
    }
    json rec{{"user", s.user_id},
             {"events", std::move(events)},
             {"static", s.features.static_codes},
             {"coupon_cents", s.features.coupon_cents},
             {"y_s", s.stayed ? 1 : 0},
             {"y_p", s.paid ? 1 : 0}};
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("failed writing dataset: " + path);
}

std::vector<LabeledSample> read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<LabeledSample> samples;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!saw_header) {
      if (rec.value("schema", "") != "dataset/v1") {
        throw IoError(path + ": expected a dataset/v1 schema line");
      }
      saw_header = true;
      continue;
    }
    LabeledSample s;
    s.user_id = rec.at("user").get<std::int64_t>();
    for (const auto& ev : rec.at("events")) {
      s.features.events.push_back(
          {ev.at(0).get<int>(), ev.at(1).get<double>()});
    }
    s.features.static_codes = rec.at("static").get<std::vector<int>>();
    s.features.coupon_cents = rec.at("coupon_cents").get<Money>();
    s.stayed = rec.at("y_s").get<int>() != 0;
    s.paid = rec.at("y_p").get<int>() != 0;
    try {
      validate_sample(s);
    } catch (const ContractError& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

bool in_validation_split(std::int64_t user_id, std::uint64_t seed,
                        double validation_fraction) {
  const std::uint64_t h = Rng::mix(seed, static_cast<std::uint64_t>(user_id));
  return (static_cast<double>(h >> 11) * 0x1.0p-53) < validation_fraction;
}

}  // namespace coupon
