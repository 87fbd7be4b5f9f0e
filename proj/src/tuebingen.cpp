#include <algorithm>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "velcd/dataset.hpp"
#include "velcd/error.hpp"

namespace velcd {

const std::vector<int>& tuebingen_standard_exclusions() {
  // binary variables, then multivariate "pairs"
  static const std::vector<int> ids{47, 70, 107, 52, 53, 54, 55, 71, 105};
  return ids;
}

const std::vector<int>& tuebingen_discrete_exclusions() {
  static const std::vector<int> ids{5,  6,  7,  8,  9,  10, 11, 13, 14,
                                    15, 16, 26, 27, 28, 29, 32, 33, 34,
                                    35, 36, 37, 85, 94, 95, 99};
  return ids;
}

namespace {

struct MetaRow {
  int id;
  int cause_start, cause_end, effect_start, effect_end;
  double weight;
};

bool parse_double(const std::string& tok, double& out) {
  char* end = nullptr;
  out = std::strtod(tok.c_str(), &end);
  return end != tok.c_str() && *end == '\0';
}

std::vector<MetaRow> read_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingMeta, "no pairmeta.txt in " + path.parent_path().string());
  std::vector<MetaRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    MetaRow r{};
    double vals[6];
    bool ok = tok.size() == 6;
    for (std::size_t k = 0; ok && k < 6; ++k) ok = parse_double(tok[k], vals[k]);
    if (!ok)
      fail(ErrorCode::ParseError,
           path.string() + ":" + std::to_string(lineno) + ": malformed meta row");
    r.id = static_cast<int>(vals[0]);
    r.cause_start = static_cast<int>(vals[1]);
    r.cause_end = static_cast<int>(vals[2]);
    r.effect_start = static_cast<int>(vals[3]);
    r.effect_end = static_cast<int>(vals[4]);
    r.weight = vals[5];
    rows.push_back(r);
  }
  return rows;
}

std::vector<std::vector<double>> read_columns(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::vector<double> row;
    for (std::string t; ss >> t;) {
      double v = 0;
      if (!parse_double(t, v))
        fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) +
                                        ": non-numeric token '" + t + "'");
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size())
      fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) +
                                      ": inconsistent column count");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::vector<DataPair> load_tuebingen(const std::filesystem::path& dir,
                                     TuebingenFilter filter) {
  const auto meta = read_meta(dir / "pairmeta.txt");
  std::vector<int> excluded = tuebingen_standard_exclusions();
  if (filter == TuebingenFilter::ContinuousOnly) {
    const auto& d = tuebingen_discrete_exclusions();
    excluded.insert(excluded.end(), d.begin(), d.end());
  }

  std::vector<DataPair> out;
  for (const auto& m : meta) {
    if (std::find(excluded.begin(), excluded.end(), m.id) != excluded.end()) continue;
    if (m.cause_start != m.cause_end || m.effect_start != m.effect_end) continue;

    char name[32];
    std::snprintf(name, sizeof name, "pair%04d.txt", m.id);
    const auto rows = read_columns(dir / name);
    const int cause = m.cause_start - 1;
    const int effect = m.effect_start - 1;
    const int width = rows.empty() ? 0 : static_cast<int>(rows.front().size());
    if (cause < 0 || effect < 0 || cause >= width || effect >= width || cause == effect)
      fail(ErrorCode::ParseError, (dir / name).string() + ": meta columns out of range");

    DataPair p;
    p.id = std::string(name).substr(0, 8);
    p.weight = m.weight;
    p.truth = cause < effect ? Direction::XtoY : Direction::YtoX;
    const int cx = std::min(cause, effect);
    const int cy = std::max(cause, effect);
    p.xs.reserve(rows.size());
    p.ys.reserve(rows.size());
    for (const auto& r : rows) {
      p.xs.push_back(r[cx]);
      p.ys.push_back(r[cy]);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace velcd
