#pragma once

#include <CLI11.hpp>

#include <string>
#include <vector>

#include "json.hpp"

namespace pmugbp::cli {

/// CLI11 configuration in JSON: top-level keys set global flags, nested
/// objects set the options of the subcommand of the same name.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    return collect(app, default_also).dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError("config", std::string("invalid JSON: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

  static nlohmann::json collect(const CLI::App* app, bool default_also) {
    nlohmann::json j = nlohmann::json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
      const std::string& name = opt->get_lnames().front();
      if (name == "help" || name == "config") continue;
      std::vector<std::string> values = opt->reduced_results();
      if (values.empty()) {
        if (!default_also || opt->get_default_str().empty()) continue;
        values = {opt->get_default_str()};
      }
      if (opt->get_expected_max() > 1) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& v : values) arr.push_back(scalar(v));
        j[name] = arr;
      } else {
        j[name] = scalar(values.front());
      }
    }
    for (const CLI::App* sub : app->get_subcommands()) j[sub->get_name()] = collect(sub, default_also);
    return j;
  }

 private:
  static nlohmann::json scalar(const std::string& text) {
    if (text == "true") return true;
    if (text == "false") return false;
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used == text.size()) {
        const bool integral = text.find_first_of(".eE") == std::string::npos;
        return integral ? nlohmann::json(std::stoll(text)) : nlohmann::json(v);
      }
    } catch (const std::exception&) {
    }
    return text;
  }

  static std::string text_of(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const nlohmann::json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    if (!j.is_object()) throw CLI::ConversionError("config", "expected a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto next = parents;
        next.push_back(key);
        flatten(value, next, items);
        continue;
      }
      if (value.is_null()) continue;
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(text_of(v));
      } else {
        item.inputs.push_back(text_of(value));
      }
      items.push_back(std::move(item));
    }
  }
};

}  // namespace pmugbp::cli
