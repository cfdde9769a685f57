#include "autobid/dataset_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "autobid/errors.hpp"
#include "autobid/rng.hpp"

namespace autobid::data {

namespace {

constexpr const char* kHeaderLine = "# autobid dataset v1";

std::string fmt_f64(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct LineReader {
  std::ifstream in;
  int line_no = 0;

  explicit LineReader(const std::string& path) : in(path) {}

  bool next(std::string& line) {
    if (!std::getline(in, line)) return false;
    ++line_no;
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(detail::msg("line ", line_no, ": ", what));
  }
};

double parse_f64(LineReader& r, std::istringstream& is, const char* field) {
  double v = 0.0;
  if (!(is >> v)) r.fail(detail::msg("cannot parse field '", field, "'"));
  return v;
}

int64_t parse_i64(LineReader& r, std::istringstream& is, const char* field) {
  int64_t v = 0;
  if (!(is >> v)) r.fail(detail::msg("cannot parse field '", field, "'"));
  return v;
}

// Parses "key=value", checking the key.
std::string expect_kv(LineReader& r, std::istringstream& is, const char* key) {
  std::string token;
  if (!(is >> token)) r.fail(detail::msg("missing field '", key, "'"));
  const auto eq = token.find('=');
  if (eq == std::string::npos || token.substr(0, eq) != key)
    r.fail(detail::msg("expected '", key, "=...', got '", token, "'"));
  return token.substr(eq + 1);
}

double kv_f64(LineReader& r, std::istringstream& is, const char* key) {
  const std::string v = expect_kv(r, is, key);
  try {
    size_t used = 0;
    const double parsed = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    r.fail(detail::msg("bad numeric value for '", key, "': '", v, "'"));
  }
}

}  // namespace

void write_dataset(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(detail::msg("cannot open '", path, "' for writing"));
  out << kHeaderLine << "\n";
  for (const auto& traj : dataset.trajectories) {
    out << "E " << traj.episode_id << " B=" << fmt_f64(traj.campaign.budget)
        << " C=" << fmt_f64(traj.campaign.cpa_threshold) << " T=" << traj.campaign.horizon
        << " seed=" << traj.campaign.seed << " cpa_T=" << fmt_f64(traj.terminal.cpa)
        << " bc_T=" << fmt_f64(traj.terminal.bc) << " p_total=" << fmt_f64(traj.terminal.p_total)
        << " mode=" << loss::to_string(traj.terminal.mode) << "\n";
    for (int t = 0; t < traj.length(); ++t) {
      const auto ts = static_cast<size_t>(t);
      out << "S " << traj.episode_id << " " << t;
      for (int f = 0; f < env::kStateDim; ++f)
        out << " " << fmt_f64(traj.states[ts][static_cast<size_t>(f)]);
      out << " " << fmt_f64(traj.actions[ts]) << " " << fmt_f64(traj.rewards[ts]) << " "
          << fmt_f64(traj.cum_cost[ts]) << " " << fmt_f64(traj.cum_value[ts]) << "\n";
    }
  }
  out.flush();
  if (!out) throw IoError(detail::msg("failed writing dataset '", path, "'"));
}

Dataset read_dataset(const std::string& path) {
  LineReader reader(path);
  if (!reader.in) throw IoError(detail::msg("cannot open dataset '", path, "'"));

  std::string line;
  if (!reader.next(line) || line != kHeaderLine)
    throw FormatError(detail::msg("'", path, "': missing dataset header line"));

  Dataset dataset;
  Trajectory* current = nullptr;

  auto finish_episode = [&](Trajectory* traj) {
    if (!traj) return;
    if (traj->length() != traj->campaign.horizon)
      throw FormatError(detail::msg("episode ", traj->episode_id, ": expected ",
                                    traj->campaign.horizon, " steps, got ", traj->length()));
    traj->rtg = compute_rtg(traj->rewards);
  };

  while (reader.next(line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag == "E") {
      finish_episode(current);
      Trajectory traj;
      traj.episode_id = parse_i64(reader, is, "episode_id");
      traj.campaign.budget = kv_f64(reader, is, "B");
      traj.campaign.cpa_threshold = kv_f64(reader, is, "C");
      traj.campaign.horizon = static_cast<int>(std::stoll(expect_kv(reader, is, "T")));
      traj.campaign.seed = std::stoull(expect_kv(reader, is, "seed"));
      traj.terminal.cpa = kv_f64(reader, is, "cpa_T");
      traj.terminal.bc = kv_f64(reader, is, "bc_T");
      traj.terminal.p_total = kv_f64(reader, is, "p_total");
      traj.terminal.mode = loss::penalty_mode_from_string(expect_kv(reader, is, "mode"));
      dataset.trajectories.push_back(std::move(traj));
      current = &dataset.trajectories.back();
    } else if (tag == "S") {
      if (!current) throw FormatError(detail::msg("line ", reader.line_no, ": step before any episode header"));
      const int64_t id = parse_i64(reader, is, "episode_id");
      if (id != current->episode_id)
        reader.fail(detail::msg("step for episode ", id, " inside episode ", current->episode_id));
      const int64_t t = parse_i64(reader, is, "t");
      if (t != current->length())
        reader.fail(detail::msg("expected step ", current->length(), ", got ", t));
      std::array<double, env::kStateDim> s{};
      for (int f = 0; f < env::kStateDim; ++f) s[static_cast<size_t>(f)] = parse_f64(reader, is, "s");
      current->states.push_back(s);
      current->actions.push_back(parse_f64(reader, is, "a"));
      current->rewards.push_back(parse_f64(reader, is, "rw"));
      current->cum_cost.push_back(parse_f64(reader, is, "cum_cost"));
      current->cum_value.push_back(parse_f64(reader, is, "cum_value"));
      std::string extra;
      if (is >> extra) reader.fail(detail::msg("unexpected trailing field '", extra, "'"));
    } else {
      reader.fail(detail::msg("unknown record tag '", tag, "'"));
    }
  }
  finish_episode(current);
  return dataset;
}

void write_split_manifest(const std::string& path, const SplitManifest& split) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(detail::msg("cannot open '", path, "' for writing"));
  out << "# autobid split v1\n";
  for (int64_t id : split.train_ids) out << "train " << id << "\n";
  for (int64_t id : split.val_ids) out << "val " << id << "\n";
  out.flush();
  if (!out) throw IoError(detail::msg("failed writing split manifest '", path, "'"));
}

SplitManifest read_split_manifest(const std::string& path) {
  LineReader reader(path);
  if (!reader.in) throw IoError(detail::msg("cannot open split manifest '", path, "'"));
  std::string line;
  if (!reader.next(line) || line != "# autobid split v1")
    throw FormatError(detail::msg("'", path, "': missing split manifest header"));
  SplitManifest split;
  while (reader.next(line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string which;
    is >> which;
    const int64_t id = parse_i64(reader, is, "episode_id");
    if (which == "train")
      split.train_ids.push_back(id);
    else if (which == "val")
      split.val_ids.push_back(id);
    else
      reader.fail(detail::msg("unknown split '", which, "'"));
  }
  return split;
}

SplitManifest make_split(const Dataset& dataset, double train_fraction, uint64_t seed) {
  if (train_fraction <= 0.0 || train_fraction > 1.0)
    throw ConfigError(detail::msg("train_fraction must be in (0,1], got ", train_fraction));
  std::vector<int64_t> ids;
  ids.reserve(dataset.trajectories.size());
  for (const auto& traj : dataset.trajectories) ids.push_back(traj.episode_id);

  Rng rng(derive_seed(seed, 0x53504cull));
  const auto perm = rng.permutation(static_cast<int>(ids.size()));
  auto n_train = static_cast<size_t>(train_fraction * static_cast<double>(ids.size()));
  n_train = std::max<size_t>(1, std::min(n_train, ids.size()));

  SplitManifest split;
  for (size_t i = 0; i < ids.size(); ++i) {
    const int64_t id = ids[static_cast<size_t>(perm[i])];
    if (i < n_train)
      split.train_ids.push_back(id);
    else
      split.val_ids.push_back(id);
  }
  return split;
}

}  // namespace autobid::data
