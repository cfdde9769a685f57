#include "autobid/model_io.hpp"

#include "autobid/errors.hpp"

namespace autobid::model {

void save_model(const std::string& path, const ModelBundle& bundle) {
  nlohmann::json meta = bundle.meta.is_object() ? bundle.meta : nlohmann::json::object();
  meta["model"] = bundle.config;
  meta["norm_stats"] = bundle.stats;
  nn::save_checkpoint(path, bundle.params, meta);
}

ModelBundle load_model(const std::string& path) {
  auto loaded = nn::load_checkpoint(path);
  ModelBundle bundle;
  bundle.params = std::move(loaded.params);
  if (!loaded.meta.contains("model") || !loaded.meta.contains("norm_stats"))
    throw FormatError(detail::msg("'", path, "' has no model/norm_stats metadata sections"));
  bundle.config = loaded.meta.at("model").get<ModelConfig>();
  bundle.stats = loaded.meta.at("norm_stats").get<data::NormStats>();
  bundle.meta = std::move(loaded.meta);
  return bundle;
}

}  // namespace autobid::model
