#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "har/dataset.hpp"
#include "har/imputation.hpp"
#include "har/masking.hpp"
#include "har/training.hpp"

namespace har {

enum class Task { activity, subject };
enum class Method { none, simple, knn, simple_pca, knn_pca };
enum class MaskTarget { train, test, both };

std::string to_string(Task t);
std::string to_string(Method m);
std::string to_string(MaskTarget t);
Task task_from_string(const std::string& s);
Method method_from_string(const std::string& s);
MaskTarget mask_target_from_string(const std::string& s);

// Everything the pipeline needs beyond the per-cell seeds. One snapshot is
// recorded verbatim in every report.
struct PipelineConfig {
  // subject-task resplit
  double subject_test_fraction = 0.2;
  Stratify stratify = Stratify::none;
  // masking: outages hit the held-out split only, mirroring sensors failing
  // in deployment while the model was trained on intact data.
  MaskTarget mask_target = MaskTarget::test;
  WindowTiming timing{};
  // imputation
  SimpleStatistic simple_statistic = SimpleStatistic::mean;
  int knn_k = 5;
  // pca
  int pca_components = 175;
  // optional per-column standardization (fitted on training rows)
  bool standardize = false;
  // training
  TrainConfig train{};
  NetworkConfig net{};
};

struct CellSeeds {
  std::uint64_t split = 0;
  std::uint64_t mask = 0;
  std::uint64_t init = 0;
  std::uint64_t train = 0;
};

struct ExperimentSpec {
  Task task = Task::activity;
  std::optional<OutageScenario> scenario;  // nullopt = clean baseline
  Method method = Method::none;
  CellSeeds seeds;
  PipelineConfig config;

  std::string scenario_name() const;  // "clean" or the scenario's name
  std::string cell_key() const;       // "activity/S6/knn"
  void validate() const;
};

struct ReportRow {
  std::string task;
  std::string scenario;
  std::string method;
  double accuracy = 0.0;
  double missing_cell_fraction = 0.0;
  double masked_row_fraction = 0.0;
  std::int64_t knn_fallback_cells = 0;
  CellSeeds seeds;
  double runtime_s = 0.0;
  bool failed = false;
  std::string error;
};

struct ExperimentReport {
  std::string version = "1";
  std::string dataset_checksum;
  PipelineConfig config;
  std::uint64_t master_seed = 0;
  std::vector<ReportRow> rows;
  std::map<int, double> per_activity_subject_accuracy;  // activity id -> accuracy
  std::vector<std::string> notes;

  const ReportRow* find(const std::string& task, const std::string& scenario,
                        const std::string& method) const;
};

// Extra outputs of a single cell, for callers that want more than the row.
struct CellExtras {
  std::map<int, double> per_activity;  // subject task only
  TrainHistory history;
};

// One pipeline cell: task split -> mask -> fill/impute -> (standardize) ->
// (PCA) -> train -> evaluate. Stage failures rethrow as har::Error tagged
// with the cell key and stage name. The reported missing fractions cover the
// split(s) the protocol masks.
ReportRow run_experiment(const ExperimentSpec& spec, const HarDataset& train_raw,
                         const HarDataset& test_raw, const FeatureGroups& groups,
                         CellExtras* extras = nullptr);

struct GridRequest {
  std::vector<Task> tasks = {Task::activity, Task::subject};
  // "clean" plus built-in scenario ids; defaults to the full paper grid.
  std::vector<std::string> scenarios = {"clean", "S1", "S2", "S3", "S4", "S5", "S6"};
  // Methods applied to outage scenarios (clean always runs method none).
  std::vector<std::string> method_names = {"none", "simple", "knn", "simple_pca", "knn_pca"};
  std::uint64_t master_seed = 0;
  PipelineConfig config;
  int jobs = 1;
  bool echo_progress = false;  // one line per finished cell on stderr
};

// Runs every cell (clean baselines once per task), seeds derived per cell
// from the master seed. Cell failures are recorded on the row and the grid
// continues.
ExperimentReport run_grid(const GridRequest& request, const HarDataset& train_raw,
                          const HarDataset& test_raw, const FeatureGroups& groups);

// Seed derivation used by run_grid, exposed so single cells can be
// reproduced: role is one of "split", "mask", "init", "train".
CellSeeds derive_cell_seeds(std::uint64_t master_seed, Task task,
                            const std::string& scenario_name, const std::string& method_name);

// --- reporting ---------------------------------------------------------

std::string report_to_json_text(const ExperimentReport& report);
ExperimentReport report_from_json_text(const std::string& text);
void save_report(const ExperimentReport& report, const std::filesystem::path& path);
ExperimentReport load_report(const std::filesystem::path& path);

// table1.csv/table2.csv (scenario rows x method columns), fig2.csv
// (per-activity subject accuracy), fig3.csv/fig4.csv (long form with a
// baseline row). Returns the files written.
std::vector<std::filesystem::path> emit_report_csv(const ExperimentReport& report,
                                                   const std::filesystem::path& out_dir);

}  // namespace har
