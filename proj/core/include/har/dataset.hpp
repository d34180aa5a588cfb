#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "har/errors.hpp"

namespace har {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Row-aligned view of one split of the UCI HAR dataset: 561 engineered
// features per 2.56 s window, the activity performed (1..6) and the subject
// wearing the device (1..30). Row order is exactly the file order.
struct HarDataset {
  Matrix features;                         // rows x 561
  std::vector<int> activity_labels;        // 1..6
  std::vector<int> subject_ids;            // 1..30
  std::vector<std::string> feature_names;  // size == features.cols()

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index cols() const { return features.cols(); }

  // Throws ValidationError on shape mismatch, out-of-range labels or
  // non-finite feature values.
  void validate() const;

  // New dataset holding the given rows, in the given order.
  HarDataset subset(const std::vector<int>& row_indices) const;
};

inline constexpr int kNumActivities = 6;
inline constexpr int kNumSubjects = 30;

// Label names from the distribution's activity_labels.txt, index 1..6.
const std::array<std::string, 6>& activity_names();
inline constexpr std::array<int, 3> kDynamicActivities = {1, 2, 3};
inline constexpr std::array<int, 3> kStationaryActivities = {4, 5, 6};

enum class Sensor { acc, gyro, both };

std::string to_string(Sensor s);
Sensor sensor_from_string(const std::string& s);

// Column partition by originating sensor, derived from feature names.
// Rule: a name containing "Gyro" is a gyroscope column; otherwise a name
// containing "Acc" is an accelerometer column; everything else is "neither"
// (the gravity-angle features). Names containing both tokens are recorded in
// dual_token_columns and counted as gyroscope columns by that precedence.
struct FeatureGroups {
  std::vector<int> acc_columns;
  std::vector<int> gyro_columns;
  std::vector<int> neither_columns;
  std::vector<int> dual_token_columns;

  // Columns knocked out when the given sensor drops: acc and gyro map to
  // their own groups, both to the union. "Neither" columns are never masked.
  std::vector<int> columns_for(Sensor s) const;

  // The official 561-name list must produce 345/213/3; anything else means
  // the name list is not the expected one.
  void require_official_counts() const;
};

FeatureGroups derive_feature_groups(const std::vector<std::string>& names);

enum class Stratify { none, subject };

struct SplitConfig {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  Stratify stratify_by = Stratify::none;

  void validate() const;  // throws ConfigError
};

// Reads features.txt, X/y/subject for both predefined splits. Throws
// LoadError for missing files, ParseError (with file and line) for anything
// that does not scan as 561 finite reals or an integer label.
std::pair<HarDataset, HarDataset> load_uci_har(const std::filesystem::path& root);

// Concatenates a then b (order preserved) and re-partitions rows with a
// seeded shuffle. round(N * test_fraction) rows form the test split; each
// split keeps its rows in original merged order. Stratify::subject applies
// the same rule per subject (test counts proportional within one row).
std::pair<HarDataset, HarDataset> merge_and_split(const HarDataset& a,
                                                  const HarDataset& b,
                                                  const SplitConfig& config);

// Per-column affine map to zero mean / unit variance, fitted on training
// rows only. Population variance; constant columns pass through unscaled.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
};

// FNV-1a over the in-memory feature/label bytes; identifies the exact data a
// report was produced from.
std::string dataset_checksum(const HarDataset& train, const HarDataset& test);

}  // namespace har
