#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace velcd {

enum class Direction { XtoY, YtoX };

const char* to_string(Direction d) noexcept;
std::optional<Direction> parse_direction(std::string_view s);
inline Direction flip(Direction d) {
  return d == Direction::XtoY ? Direction::YtoX : Direction::XtoY;
}

// n paired observations of a candidate cause-effect pair.
struct DataPair {
  std::vector<double> xs;
  std::vector<double> ys;
  std::optional<Direction> truth;
  double weight = 1.0;
  std::string id;
  std::optional<std::uint64_t> seed;

  std::size_t size() const { return xs.size(); }
};

// Throws InvalidArgument unless sizes match, n >= 2, and every entry is finite.
void validate(const DataPair& pair);

// Exchange the roles of the two columns; the truth label is flipped with them.
DataPair swapped(const DataPair& pair);

struct Affine {
  double mean_x = 0.0;
  double sd_x = 1.0;
  double mean_y = 0.0;
  double sd_y = 1.0;
};

struct Standardized {
  DataPair pair;
  Affine affine;
};

/// Zero mean, unit (population) standard deviation per coordinate.
/// Throws DegenerateVariance naming the constant coordinate.
Standardized standardize(const DataPair& pair);
DataPair unstandardize(const DataPair& pair, const Affine& affine);

struct PreprocessConfig {
  bool standardize = true;
  double trim_fraction = 0.0;
  std::optional<std::size_t> subsample_to;
  std::uint64_t rng_seed = 0;
};

/// Keep-mask for trimming: a point is dropped when its x rank or its y rank
/// falls among the ceil(fraction/2 * n) smallest or largest of that
/// marginal. Ties are ordered by original index.
std::vector<bool> trim_mask(const DataPair& pair, double fraction);

/// Applies trim_mask. Survivors keep their order. Throws EmptyResult when
/// fewer than two points survive.
DataPair trim_marginal_extremes(const DataPair& pair, double fraction);

/// m draws: without replacement when n >= m (indices kept in original
/// order), with replacement otherwise. Deterministic in seed.
DataPair subsample(const DataPair& pair, std::size_t m, std::uint64_t seed);

enum class TuebingenFilter { Standard, ContinuousOnly };

const std::vector<int>& tuebingen_standard_exclusions();
const std::vector<int>& tuebingen_discrete_exclusions();

/// Loads pairNNNN.txt files listed in pairmeta.txt. The lower-numbered of the
/// cause/effect columns becomes x; the truth label records which one is the
/// cause.
std::vector<DataPair> load_tuebingen(const std::filesystem::path& dir,
                                     TuebingenFilter filter);

// CSV with header "x,y" and a sidecar <stem>.json holding id/truth/weight/seed.
void write_pair(const DataPair& pair, const std::filesystem::path& csv_path);
DataPair read_pair(const std::filesystem::path& csv_path);

}  // namespace velcd
