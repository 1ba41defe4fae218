#pragma once

#include <string>

#include "json.hpp"

#include "glip/harness.hpp"

namespace glip {

// Config-file front end: strict schema (unknown keys rejected), optional
// operator/prior/noise overrides layered onto the scenario defaults.
struct CliConfig {
  ScenarioConfig scenario;
  nlohmann::json overrides = nlohmann::json::object();
  bool seed_from_config = false;

  static CliConfig parse(const nlohmann::json& j);
  static CliConfig load(const std::string& path);
  nlohmann::json normalized() const;
};

}  // namespace glip
