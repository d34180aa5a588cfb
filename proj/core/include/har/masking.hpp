#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "har/dataset.hpp"

namespace har {

// UCI HAR feature rows summarize sliding windows: 2.56 s of 50 Hz samples,
// advanced by 1.28 s (50% overlap). Window i covers [i*stride, i*stride+span].
struct WindowTiming {
  double window_span_s = 2.56;
  double stride_s = 1.28;
  double sample_rate_hz = 50.0;

  void validate() const;  // span > stride > 0, positive rate
};

// One kind of outage: `count` dropouts of `duration_s` seconds for `sensor`.
struct OutageEvent {
  Sensor sensor = Sensor::both;
  double duration_s = 0.0;
  int count = 0;
};

// A named set of outage events, optionally calibrated so that the fraction of
// rows with at least one blanked cell hits target_row_fraction.
struct OutageScenario {
  std::string name;         // short id, e.g. "S3"
  std::string description;  // e.g. "5s ACC"
  std::vector<OutageEvent> events;
  std::optional<double> target_row_fraction;

  void validate() const;  // throws ValidationError

  // The six built-in scenarios S1..S6 (dropouts from 1 to 10 seconds over
  // accelerometer, gyroscope or both, with row-fraction targets derived from
  // the published missing-cell percentages).
  static const std::vector<OutageScenario>& builtins();
  // Lookup by id ("S1".."S6", case-insensitive); throws ConfigError listing
  // valid names.
  static OutageScenario builtin(const std::string& id);
};

// JSON form: {"name", "description"?, "events":[{"sensor","duration_s","count"}],
// "target_row_fraction"?}. A file may hold one scenario or an array of them.
OutageScenario scenario_from_json_text(const std::string& text);
std::string scenario_to_json_text(const OutageScenario& sc);
std::vector<OutageScenario> load_scenarios_file(const std::filesystem::path& path);

// A contiguous run of rows (sequence-local, half-open) blanked for one sensor.
struct PlannedInterval {
  int sequence = 0;
  int row_begin = 0;
  int row_end = 0;
  Sensor sensor = Sensor::both;
};

// Rows of one (subject, activity) sequence, in dataset row order.
struct SequenceInfo {
  int subject = 0;
  int activity = 0;
  std::vector<int> rows;  // global row indices
};

struct SequenceStats {
  int sequence = 0;
  int length = 0;
  int masked_rows = 0;
  double quota = 0.0;  // calibrated row budget for this sequence
  bool best_effort = false;
};

struct MaskPlan {
  std::string scenario_name;
  std::uint64_t seed = 0;
  Eigen::Index dataset_rows = 0;
  Eigen::Index dataset_cols = 0;
  std::vector<SequenceInfo> sequences;
  std::vector<PlannedInterval> intervals;
  std::vector<SequenceStats> stats;
  std::optional<double> target_row_fraction;
  double achieved_row_fraction = 0.0;
  std::vector<std::string> warnings;

  // Global row flags implied by the intervals (true = row has an outage).
  std::vector<char> row_flags() const;
};

using BoolMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// A dataset plus knowledge of which cells are blanked. Feature values under
// the mask keep their original numbers; consumers must not read them.
struct MaskedDataset {
  HarDataset base;
  BoolMask missing;
  std::vector<PlannedInterval> provenance;
  std::string scenario_name;
  double masked_row_fraction = 0.0;

  // A dataset with no outages at all.
  static MaskedDataset clean(const HarDataset& d);
};

// Row indices of windows overlapping [start, start+duration): exactly the i
// with i*stride < start+duration and i*stride+span > start, clipped to
// [0, seq_len). Returns a half-open range; throws ConfigError when empty.
std::pair<int, int> windows_overlapping(double outage_start_s, double duration_s,
                                        const WindowTiming& timing, int seq_len);

// Places every event's intervals at seeded uniform admissible starts, one
// pass per (subject, activity) sequence in row order. With a target row
// fraction set, placement per sequence is re-drawn and adjusted (clustering,
// partial overlap, extra or fewer intervals) until the global fraction of
// rows with >=1 masked cell lands within +-1 percentage point of target;
// otherwise throws CalibrationError. Sequences too short for an event get a
// best-effort placement and a warning in the plan.
MaskPlan plan_outages(const OutageScenario& scenario, const HarDataset& dataset,
                      const WindowTiming& timing, std::uint64_t seed);

// Blank cells (row, col) with row in a planned interval and col in the
// interval sensor's column group. `dataset` must be the one the plan was
// built from (dimension-checked).
MaskedDataset apply_mask(const MaskPlan& plan, const HarDataset& dataset,
                         const FeatureGroups& groups);

// Fraction of blanked cells over all N*561 cells.
double missing_cell_fraction(const MaskedDataset& masked);

// Fraction of rows with at least one blanked cell.
double masked_row_fraction(const MaskedDataset& masked);

// Masked cells become 0.0; everything else is untouched.
HarDataset zero_fill(const MaskedDataset& masked);

}  // namespace har
