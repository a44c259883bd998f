#pragma once

// Versioned JSON model files. Every floating-point payload is written as a
// decimal string with 17 significant digits so a load reproduces the exact
// doubles that were saved.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "radwatch/detectors.hpp"
#include "radwatch/telemetry.hpp"

namespace radwatch {

inline constexpr int kModelFormatVersion = 1;

struct ModelBundle {
  DetectorModel model;
  std::optional<Scaler> scaler;          // applied to raw features before scoring
  std::vector<std::string> feature_names;
};

std::string encode_number(double v);
double decode_number(const nlohmann::json& j);

nlohmann::ordered_json model_to_json(const ModelBundle& bundle);
ModelBundle model_from_json(const nlohmann::json& j);

std::string serialize_model(const ModelBundle& bundle);
ModelBundle parse_model(const std::string& text);

}  // namespace radwatch
