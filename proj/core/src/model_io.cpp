#include "coupon/model_io.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "coupon/errors.hpp"
#include "json.hpp"

namespace coupon {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'C', 'A', 'M', 'D'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw IoError("model load: truncated header");
  return v;
}

json menu_to_json(const std::vector<Money>& menu) {
  json arr = json::array();
  for (Money m : menu) arr.push_back(m);
  return arr;
}

std::vector<Money> menu_from_json(const json& arr) {
  std::vector<Money> menu;
  for (const auto& v : arr) menu.push_back(v.get<Money>());
  return menu;
}

json iidn_config_json(const iidn::IidnConfig& cfg) {
  return json{{"variant", iidn::variant_name(cfg.variant)},
              {"attention", iidn::attention_name(cfg.attention)},
              {"embed_dim", cfg.embed_dim},
              {"hidden_dim", cfg.hidden_dim},
              {"enc1_dim", cfg.enc1_dim},
              {"enc2_dim", cfg.enc2_dim},
              {"dec_dim", cfg.dec_dim},
              {"action_vocab", cfg.action_vocab},
              {"static_slots", cfg.static_slots},
              {"static_buckets", cfg.static_buckets},
              {"max_seq_len", cfg.max_seq_len},
              {"dwell_edges", cfg.dwell_edges},
              {"coupon_amounts_cents", menu_to_json(cfg.coupon_amounts_cents)}};
}

iidn::IidnConfig iidn_config_from(const json& j) {
  iidn::IidnConfig cfg;
  cfg.variant = iidn::variant_from_name(j.at("variant").get<std::string>());
  cfg.attention = iidn::attention_from_name(j.at("attention").get<std::string>());
  cfg.embed_dim = j.at("embed_dim").get<int>();
  cfg.hidden_dim = j.at("hidden_dim").get<int>();
  cfg.enc1_dim = j.at("enc1_dim").get<int>();
  cfg.enc2_dim = j.at("enc2_dim").get<int>();
  cfg.dec_dim = j.at("dec_dim").get<int>();
  cfg.action_vocab = j.at("action_vocab").get<int>();
  cfg.static_slots = j.at("static_slots").get<int>();
  cfg.static_buckets = j.at("static_buckets").get<int>();
  cfg.max_seq_len = j.at("max_seq_len").get<int>();
  cfg.dwell_edges = j.at("dwell_edges").get<std::vector<double>>();
  cfg.coupon_amounts_cents = menu_from_json(j.at("coupon_amounts_cents"));
  cfg.validate();
  return cfg;
}

json lr_config_json(const lr::LrConfig& cfg) {
  return json{{"action_vocab", cfg.action_vocab},
              {"static_slots", cfg.static_slots},
              {"static_buckets", cfg.static_buckets},
              {"coupon_amounts_cents", menu_to_json(cfg.coupon_amounts_cents)}};
}

lr::LrConfig lr_config_from(const json& j) {
  lr::LrConfig cfg;
  cfg.action_vocab = j.at("action_vocab").get<int>();
  cfg.static_slots = j.at("static_slots").get<int>();
  cfg.static_buckets = j.at("static_buckets").get<int>();
  cfg.coupon_amounts_cents = menu_from_json(j.at("coupon_amounts_cents"));
  cfg.validate();
  return cfg;
}

}  // namespace

AnyModel::AnyModel(iidn::IidnModel model)
    : model_(std::move(model)), kind_("iidn") {}

AnyModel::AnyModel(lr::LrModel model)
    : model_(std::move(model)), kind_("lr-baseline") {}

const std::vector<Money>& AnyModel::menu() const {
  if (const auto* m = std::get_if<iidn::IidnModel>(&model_)) {
    return m->config().coupon_amounts_cents;
  }
  return std::get<lr::LrModel>(model_).config().coupon_amounts_cents;
}

IntentScores AnyModel::score(const FeatureTuple& sample) const {
  if (const auto* m = std::get_if<iidn::IidnModel>(&model_)) return m->score(sample);
  return std::get<lr::LrModel>(model_).score(sample);
}

std::vector<IntentScores> AnyModel::score_menu(const FeatureTuple& sample) const {
  if (const auto* m = std::get_if<iidn::IidnModel>(&model_)) return m->score_menu(sample);
  return std::get<lr::LrModel>(model_).score_menu(sample);
}

const iidn::IidnModel* AnyModel::as_iidn() const {
  return std::get_if<iidn::IidnModel>(&model_);
}

const lr::LrModel* AnyModel::as_lr() const {
  return std::get_if<lr::LrModel>(&model_);
}

void AnyModel::save(std::ostream& out) const {
  json header{{"schema", "model/v1"}, {"kind", kind_}};
  if (const auto* m = std::get_if<iidn::IidnModel>(&model_)) {
    header["config"] = iidn_config_json(m->config());
  } else {
    header["config"] = lr_config_json(std::get<lr::LrModel>(model_).config());
  }
  const std::string text = header.dump();
  out.write(kMagic, sizeof kMagic);
  write_u32(out, kFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (const auto* m = std::get_if<iidn::IidnModel>(&model_)) {
    m->params().save(out);
  } else {
    std::get<lr::LrModel>(model_).params().save(out);
  }
  if (!out) throw IoError("model save: write failed");
}

void AnyModel::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("model save: cannot open " + path);
  save(out);
}

AnyModel AnyModel::load(std::istream& in) {
  char magic[4] = {};
  in.read(magic, sizeof magic);
  if (!in || std::string_view(magic, 4) != std::string_view(kMagic, 4)) {
    throw IoError("model load: bad magic");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kFormatVersion) {
    throw IoError("model load: unsupported format version " +
                  std::to_string(version));
  }
  const std::uint32_t len = read_u32(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("model load: truncated config");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("model load: bad config json: ") + e.what());
  }
  if (header.value("schema", "") != "model/v1") {
    throw IoError("model load: unknown schema");
  }
  const std::string kind = header.at("kind").get<std::string>();
  nn::ParamStore params = nn::ParamStore::load(in);
  if (kind == "iidn") {
    return AnyModel(iidn::IidnModel(iidn_config_from(header.at("config")),
                                    std::move(params)));
  }
  if (kind == "lr-baseline") {
    return AnyModel(lr::LrModel(lr_config_from(header.at("config")),
                                std::move(params)));
  }
  throw IoError("model load: unknown model kind '" + kind + "'");
}

AnyModel AnyModel::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("model load: cannot open " + path);
  return load(in);
}

std::string iidn_config_to_json(const iidn::IidnConfig& cfg) {
  return iidn_config_json(cfg).dump(2);
}

iidn::IidnConfig iidn_config_from_json(const std::string& text) {
  try {
    return iidn_config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw IoError(std::string("iidn config: bad json: ") + e.what());
  }
}

std::string lr_config_to_json(const lr::LrConfig& cfg) {
  return lr_config_json(cfg).dump(2);
}

lr::LrConfig lr_config_from_json(const std::string& text) {
  try {
    return lr_config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw IoError(std::string("lr config: bad json: ") + e.what());
  }
}

}  // namespace coupon
