#include "velcd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "velcd/error.hpp"
#include "velcd/format.hpp"

namespace velcd {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::EmptyResult: return "EmptyResult";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingMeta: return "MissingMeta";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::AllPointsIdentical: return "AllPointsIdentical";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NonInvertibleMechanism: return "NonInvertibleMechanism";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::StepLimitExceeded: return "StepLimitExceeded";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::IntegrationFailure: return "IntegrationFailure";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ExcessiveFailures: return "ExcessiveFailures";
  }
  return "Unknown";
}

const char* to_string(Direction d) noexcept {
  return d == Direction::XtoY ? "XtoY" : "YtoX";
}

std::optional<Direction> parse_direction(std::string_view s) {
  if (s == "XtoY") return Direction::XtoY;
  if (s == "YtoX") return Direction::YtoX;
  return std::nullopt;
}

void validate(const DataPair& pair) {
  require(pair.xs.size() == pair.ys.size(),
          "dataset '" + pair.id + "': xs and ys differ in length");
  require(pair.xs.size() >= 2, "dataset '" + pair.id + "': need n >= 2");
  for (std::size_t i = 0; i < pair.xs.size(); ++i) {
    require(std::isfinite(pair.xs[i]) && std::isfinite(pair.ys[i]),
            "dataset '" + pair.id + "': non-finite entry at row " +
                std::to_string(i));
  }
  require(pair.weight >= 0.0, "dataset '" + pair.id + "': negative weight");
}

DataPair swapped(const DataPair& pair) {
  DataPair out = pair;
  std::swap(out.xs, out.ys);
  if (out.truth) out.truth = flip(*out.truth);
  return out;
}

namespace {

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
  const double n = static_cast<double>(v.size());
  mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double e : v) ss += (e - mean) * (e - mean);
  sd = std::sqrt(ss / n);
}

}  // namespace

Standardized standardize(const DataPair& pair) {
  validate(pair);
  Standardized out{pair, {}};
  mean_sd(pair.xs, out.affine.mean_x, out.affine.sd_x);
  mean_sd(pair.ys, out.affine.mean_y, out.affine.sd_y);
  // Relative check: a column whose spread is at rounding level is constant.
  auto degenerate = [](double mean, double sd) {
    return !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
  };
  if (degenerate(out.affine.mean_x, out.affine.sd_x))
    fail(ErrorCode::DegenerateVariance, "X: dataset '" + pair.id + "' has constant x");
  if (degenerate(out.affine.mean_y, out.affine.sd_y))
    fail(ErrorCode::DegenerateVariance, "Y: dataset '" + pair.id + "' has constant y");
  for (double& x : out.pair.xs) x = (x - out.affine.mean_x) / out.affine.sd_x;
  for (double& y : out.pair.ys) y = (y - out.affine.mean_y) / out.affine.sd_y;
  return out;
}

DataPair unstandardize(const DataPair& pair, const Affine& a) {
  DataPair out = pair;
  for (double& x : out.xs) x = x * a.sd_x + a.mean_x;
  for (double& y : out.ys) y = y * a.sd_y + a.mean_y;
  return out;
}

std::vector<bool> trim_mask(const DataPair& pair, double fraction) {
  require(fraction >= 0.0 && fraction < 0.5,
          "trim fraction must lie in [0, 0.5)");
  const std::size_t n = pair.size();
  std::vector<bool> keep(n, true);
  const auto per_tail =
      static_cast<std::size_t>(std::ceil(fraction / 2.0 * static_cast<double>(n) - 1e-9));
  if (per_tail == 0) return keep;

  std::vector<std::size_t> order(n);
  for (const auto* col : {&pair.xs, &pair.ys}) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [col](std::size_t a, std::size_t b) { return (*col)[a] < (*col)[b]; });
    for (std::size_t r = 0; r < std::min(per_tail, n); ++r) {
      keep[order[r]] = false;
      keep[order[n - 1 - r]] = false;
    }
  }
  return keep;
}

DataPair trim_marginal_extremes(const DataPair& pair, double fraction) {
  const auto keep = trim_mask(pair, fraction);
  DataPair out = pair;
  out.xs.clear();
  out.ys.clear();
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (!keep[i]) continue;
    out.xs.push_back(pair.xs[i]);
    out.ys.push_back(pair.ys[i]);
  }
  if (out.xs.size() < 2)
    fail(ErrorCode::EmptyResult, "trimming dataset '" + pair.id + "' left " +
                                     std::to_string(out.xs.size()) + " points");
  return out;
}

DataPair subsample(const DataPair& pair, std::size_t m, std::uint64_t seed) {
  require(m >= 2, "subsample size must be >= 2");
  const std::size_t n = pair.size();
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx;
  if (n >= m) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates, then restore the original order.
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    idx.reserve(m);
    for (std::size_t i = 0; i < m; ++i) idx.push_back(pick(rng));
  }
  DataPair out = pair;
  out.xs.resize(m);
  out.ys.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    out.xs[i] = pair.xs[idx[i]];
    out.ys[i] = pair.ys[idx[i]];
  }
  return out;
}

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

}  // namespace

void write_pair(const DataPair& pair, const std::filesystem::path& csv_path) {
  std::ofstream out(csv_path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + csv_path.string());
  out << "x,y\n";
  for (std::size_t i = 0; i < pair.size(); ++i)
    out << fmt17(pair.xs[i]) << ',' << fmt17(pair.ys[i]) << '\n';

  nlohmann::ordered_json meta;
  meta["id"] = pair.id;
  meta["truth"] = pair.truth ? nlohmann::ordered_json(to_string(*pair.truth))
                             : nlohmann::ordered_json(nullptr);
  meta["weight"] = pair.weight;
  meta["seed"] = pair.seed ? nlohmann::ordered_json(*pair.seed)
                           : nlohmann::ordered_json(nullptr);
  std::ofstream side(sidecar_path(csv_path));
  if (!side) fail(ErrorCode::IoError, "cannot write sidecar for " + csv_path.string());
  side << meta.dump(2) << '\n';
}

DataPair read_pair(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + csv_path.string());
  DataPair pair;
  pair.id = csv_path.stem().string();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.find_first_of("xX") != std::string::npos &&
        line.find_first_of("0123456789") == std::string::npos)
      continue;  // header
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double x = 0, y = 0;
    std::string extra;
    if (!(row >> x >> y) || (row >> extra))
      fail(ErrorCode::ParseError, csv_path.string() + ":" + std::to_string(lineno) +
                                      ": expected two numeric columns");
    pair.xs.push_back(x);
    pair.ys.push_back(y);
  }

  const auto side = sidecar_path(csv_path);
  if (std::filesystem::exists(side)) {
    std::ifstream sin(side);
    nlohmann::json meta;
    try {
      sin >> meta;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ParseError, side.string() + ": " + e.what());
    }
    if (meta.contains("id") && meta["id"].is_string()) pair.id = meta["id"];
    if (meta.contains("truth") && meta["truth"].is_string())
      pair.truth = parse_direction(meta["truth"].get<std::string>());
    if (meta.contains("weight") && meta["weight"].is_number()) pair.weight = meta["weight"];
    if (meta.contains("seed") && meta["seed"].is_number_unsigned())
      pair.seed = meta["seed"].get<std::uint64_t>();
  }
  return pair;
}

}  // namespace velcd
