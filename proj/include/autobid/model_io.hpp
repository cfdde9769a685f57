#pragma once

#include <string>

#include "autobid/checkpoint.hpp"
#include "autobid/model.hpp"
#include "autobid/normalize.hpp"

namespace autobid::model {

// Parameters plus everything needed to run them: model config, normalization
// stats, and free-form metadata (campaign, training provenance, fingerprints).
struct ModelBundle {
  nn::ParamStore params;
  ModelConfig config;
  data::NormStats stats;
  nlohmann::json meta;  // extra sections beyond "model" / "norm_stats"
};

void save_model(const std::string& path, const ModelBundle& bundle);
ModelBundle load_model(const std::string& path);

}  // namespace autobid::model
