#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "autobid/trajectory.hpp"

namespace autobid::data {

// Line-delimited dataset format. One `E` header line per episode carrying
// campaign constants and terminal penalty statistics, followed by one `S`
// line per step. All floats printed with 17 significant digits so the
// round-trip is lossless.
void write_dataset(const std::string& path, const Dataset& dataset);
Dataset read_dataset(const std::string& path);

struct SplitManifest {
  std::vector<int64_t> train_ids;
  std::vector<int64_t> val_ids;
};

void write_split_manifest(const std::string& path, const SplitManifest& split);
SplitManifest read_split_manifest(const std::string& path);

// Deterministic shuffle-split by episode id.
SplitManifest make_split(const Dataset& dataset, double train_fraction, uint64_t seed);

}  // namespace autobid::data
