#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "coupon/iidn.hpp"
#include "coupon/lr_baseline.hpp"

namespace coupon {

// A trained scorer of either kind behind one interface, with a versioned
// on-disk format: magic + format version + JSON config + parameter blob.
class AnyModel {
 public:
  explicit AnyModel(iidn::IidnModel model);
  explicit AnyModel(lr::LrModel model);

  // "iidn" (all network variants) or "lr-baseline".
  const std::string& kind() const { return kind_; }
  const std::vector<Money>& menu() const;

  IntentScores score(const FeatureTuple& sample) const;
  std::vector<IntentScores> score_menu(const FeatureTuple& sample) const;

  const iidn::IidnModel* as_iidn() const;
  const lr::LrModel* as_lr() const;

  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;
  static AnyModel load(std::istream& in);
  static AnyModel load_file(const std::string& path);

 private:
  std::variant<iidn::IidnModel, lr::LrModel> model_;
  std::string kind_;
};

// Config serialization shared by the model container and the CLI.
std::string iidn_config_to_json(const iidn::IidnConfig& cfg);
iidn::IidnConfig iidn_config_from_json(const std::string& text);
std::string lr_config_to_json(const lr::LrConfig& cfg);
lr::LrConfig lr_config_from_json(const std::string& text);

}  // namespace coupon
