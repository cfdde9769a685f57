#include "autobid/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "autobid/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace autobid::nn {

namespace {

constexpr const char* kMagic = "AUTOBID-CKPT v1\n";

void write_doubles(std::ofstream& out, const double* data, size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
}

void read_doubles(std::ifstream& in, double* data, size_t count, const std::string& what) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw FormatError(detail::msg("checkpoint truncated while reading ", what));
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params, const nlohmann::json& meta) {
  nlohmann::json manifest;
  manifest["params"] = nlohmann::json::array();
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& e : params.entries()) {
    manifest["params"].push_back({{"name", e.name}, {"shape", e.tensor.shape()}, {"dtype", "f64"}});
    steps.push_back(e.steps);
  }
  manifest["optimizer"] = {{"steps", steps}, {"moments", true}};
  manifest["meta"] = meta;

  const std::string manifest_str = manifest.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(detail::msg("cannot open '", path, "' for writing"));
  out << kMagic << manifest_str.size() << "\n" << manifest_str;
  for (const auto& e : params.entries()) write_doubles(out, e.tensor.values().data(), e.tensor.values().size());
  for (const auto& e : params.entries()) {
    write_doubles(out, e.m.data(), e.m.size());
    write_doubles(out, e.v.data(), e.v.size());
  }
  out.flush();
  if (!out) throw IoError(detail::msg("failed writing checkpoint '", path, "'"));
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(detail::msg("cannot open checkpoint '", path, "'"));

  std::string magic(std::strlen(kMagic), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kMagic) throw FormatError(detail::msg("'", path, "' is not a checkpoint file"));

  std::string len_line;
  if (!std::getline(in, len_line)) throw FormatError("checkpoint missing manifest length");
  size_t manifest_len = 0;
  try {
    manifest_len = std::stoul(len_line);
  } catch (const std::exception&) {
    throw FormatError(detail::msg("bad manifest length '", len_line, "'"));
  }
  std::string manifest_str(manifest_len, '\0');
  in.read(manifest_str.data(), static_cast<std::streamsize>(manifest_len));
  if (!in) throw FormatError("checkpoint truncated inside manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_str);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(detail::msg("checkpoint manifest is not valid JSON: ", e.what()));
  }

  LoadedCheckpoint result;
  for (const auto& p : manifest.at("params")) {
    const std::string name = p.at("name").get<std::string>();
    if (p.at("dtype").get<std::string>() != "f64")
      throw FormatError(detail::msg("parameter '", name, "' has unsupported dtype"));
    Shape shape = p.at("shape").get<Shape>();
    std::vector<double> values(static_cast<size_t>(numel(shape)));
    read_doubles(in, values.data(), values.size(), name);
    result.params.create(name, std::move(shape), std::move(values));
  }
  const auto& opt = manifest.at("optimizer");
  if (opt.at("moments").get<bool>()) {
    for (auto& e : result.params.entries_mut()) {
      read_doubles(in, e.m.data(), e.m.size(), e.name + ".m");
      read_doubles(in, e.v.data(), e.v.size(), e.name + ".v");
    }
  }
  const auto& steps = opt.at("steps");
  auto& entries = result.params.entries_mut();
  if (steps.size() != entries.size()) throw FormatError("checkpoint step counters do not match parameters");
  for (size_t i = 0; i < entries.size(); ++i) entries[i].steps = steps[static_cast<int>(i)].get<int64_t>();

  result.meta = manifest.value("meta", nlohmann::json::object());
  return result;
}

}  // namespace autobid::nn
