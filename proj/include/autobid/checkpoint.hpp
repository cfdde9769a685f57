#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "autobid/param_store.hpp"

namespace autobid::nn {

// Checkpoint container: a JSON manifest listing (name, shape, dtype) per
// parameter in store order, followed by raw little-endian f64 sections in the
// same order (values, then optimizer moments). `meta` rides along in the
// manifest and is returned verbatim on load; round-trips are bit-exact.
void save_checkpoint(const std::string& path, const ParamStore& params,
                     const nlohmann::json& meta);

struct LoadedCheckpoint {
  ParamStore params;
  nlohmann::json meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace autobid::nn
