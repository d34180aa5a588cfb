#include "har/experiments.hpp"

#include <atomic>
#include <chrono>
#include <iostream>
#include <mutex>
#include <thread>

#include "har/pca.hpp"
#include "har/rng.hpp"

namespace har {

std::string to_string(Task t) { return t == Task::activity ? "activity" : "subject"; }

std::string to_string(Method m) {
  switch (m) {
    case Method::none: return "none";
    case Method::simple: return "simple";
    case Method::knn: return "knn";
    case Method::simple_pca: return "simple_pca";
    case Method::knn_pca: return "knn_pca";
  }
  return "?";
}

std::string to_string(MaskTarget t) {
  switch (t) {
    case MaskTarget::train: return "train";
    case MaskTarget::test: return "test";
    case MaskTarget::both: return "both";
  }
  return "?";
}

Task task_from_string(const std::string& s) {
  if (s == "activity") return Task::activity;
  if (s == "subject") return Task::subject;
  throw ConfigError("unknown task '" + s + "' (expected activity or subject)");
}

Method method_from_string(const std::string& s) {
  if (s == "none") return Method::none;
  if (s == "simple") return Method::simple;
  if (s == "knn") return Method::knn;
  if (s == "simple_pca") return Method::simple_pca;
  if (s == "knn_pca") return Method::knn_pca;
  throw ConfigError("unknown method '" + s +
                    "' (expected none, simple, knn, simple_pca or knn_pca)");
}

MaskTarget mask_target_from_string(const std::string& s) {
  if (s == "train") return MaskTarget::train;
  if (s == "test") return MaskTarget::test;
  if (s == "both") return MaskTarget::both;
  throw ConfigError("unknown mask target '" + s + "' (expected train, test or both)");
}

std::string ExperimentSpec::scenario_name() const {
  return scenario ? scenario->name : "clean";
}

std::string ExperimentSpec::cell_key() const {
  return to_string(task) + "/" + scenario_name() + "/" + to_string(method);
}

void ExperimentSpec::validate() const {
  if (!scenario && method != Method::none) {
    throw ConfigError("cell " + cell_key() + ": the clean baseline runs method none only");
  }
  if (scenario) scenario->validate();
}

const ReportRow* ExperimentReport::find(const std::string& task, const std::string& scenario,
                                        const std::string& method) const {
  for (const auto& row : rows) {
    if (row.task == task && row.scenario == scenario && row.method == method) return &row;
  }
  return nullptr;
}

namespace {

// Runs `fn` and rewraps any library error with the cell and stage identity.
template <typename Fn>
auto stage(const ExperimentSpec& spec, const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error("[" + spec.cell_key() + " @ " + name + "] " + e.what());
  }
}

bool uses_knn(Method m) { return m == Method::knn || m == Method::knn_pca; }
bool uses_pca(Method m) { return m == Method::simple_pca || m == Method::knn_pca; }

}  // namespace

ReportRow run_experiment(const ExperimentSpec& spec, const HarDataset& train_raw,
                         const HarDataset& test_raw, const FeatureGroups& groups,
                         CellExtras* extras) {
  const auto t0 = std::chrono::steady_clock::now();
  spec.validate();
  const PipelineConfig& cfg = spec.config;

  ReportRow row;
  row.task = to_string(spec.task);
  row.scenario = spec.scenario_name();
  row.method = to_string(spec.method);
  row.seeds = spec.seeds;

  // 1. Task-specific split.
  HarDataset train_split, test_split;
  if (spec.task == Task::activity) {
    train_split = train_raw;
    test_split = test_raw;
  } else {
    std::tie(train_split, test_split) = stage(spec, "split", [&] {
      SplitConfig sc;
      sc.test_fraction = cfg.subject_test_fraction;
      sc.seed = spec.seeds.split;
      sc.stratify_by = cfg.stratify;
      return merge_and_split(train_raw, test_raw, sc);
    });
  }

  // 2. Outage simulation on the targeted split(s).
  MaskedDataset masked_train = MaskedDataset::clean(train_split);
  MaskedDataset masked_test = MaskedDataset::clean(test_split);
  if (spec.scenario) {
    stage(spec, "mask", [&] {
      if (cfg.mask_target != MaskTarget::test) {
        const MaskPlan plan = plan_outages(*spec.scenario, train_split, cfg.timing,
                                           derive_seed(spec.seeds.mask, "train"));
        masked_train = apply_mask(plan, train_split, groups);
      }
      if (cfg.mask_target != MaskTarget::train) {
        const MaskPlan plan = plan_outages(*spec.scenario, test_split, cfg.timing,
                                           derive_seed(spec.seeds.mask, "test"));
        masked_test = apply_mask(plan, test_split, groups);
      }
      return 0;
    });
    // Fractions over the masked split(s) only.
    double cells = 0.0, cell_total = 0.0, rows_hit = 0.0, row_total = 0.0;
    auto tally = [&](const MaskedDataset& m) {
      cells += static_cast<double>(m.missing.count());
      cell_total += static_cast<double>(m.missing.size());
      rows_hit += m.masked_row_fraction * static_cast<double>(m.base.rows());
      row_total += static_cast<double>(m.base.rows());
    };
    if (cfg.mask_target != MaskTarget::test) tally(masked_train);
    if (cfg.mask_target != MaskTarget::train) tally(masked_test);
    row.missing_cell_fraction = cells / cell_total;
    row.masked_row_fraction = rows_hit / row_total;
  }

  // 3. Repair (or plain zero-fill for method none).
  HarDataset x_train, x_test;
  if (spec.method == Method::none) {
    x_train = zero_fill(masked_train);
    x_test = zero_fill(masked_test);
  } else {
    ImputerModel imputer = stage(spec, "fit-imputer", [&] {
      return uses_knn(spec.method) ? fit_knn(masked_train, cfg.knn_k)
                                   : fit_simple(masked_train, cfg.simple_statistic);
    });
    ImputeStats stats_train, stats_test;
    x_train = stage(spec, "impute", [&] { return impute(imputer, masked_train, &stats_train); });
    x_test = stage(spec, "impute", [&] { return impute(imputer, masked_test, &stats_test); });
    row.knn_fallback_cells = stats_train.fallback_cells + stats_test.fallback_cells;
  }

  // 4. Optional standardization (training statistics only).
  if (cfg.standardize) {
    const Standardizer std_fit = Standardizer::fit(x_train.features);
    x_train.features = std_fit.apply(x_train.features);
    x_test.features = std_fit.apply(x_test.features);
  }

  // 5. Optional PCA projection (fitted on the repaired training matrix).
  Matrix feat_train = x_train.features;
  Matrix feat_test = x_test.features;
  if (uses_pca(spec.method)) {
    const PcaModel pca = stage(spec, "pca", [&] {
      return fit_pca(x_train.features, cfg.pca_components);
    });
    feat_train = transform(pca, x_train.features);
    feat_test = transform(pca, x_test.features);
  }

  // 6. Train and evaluate.
  LabeledData data;
  data.features = std::move(feat_train);
  if (spec.task == Task::activity) {
    data.labels = to_dense_labels(x_train.activity_labels);
    data.num_classes = kNumActivities;
  } else {
    data.labels = to_dense_labels(x_train.subject_ids);
    data.num_classes = kNumSubjects;
  }
  TrainConfig tc = cfg.train;
  tc.seed = spec.seeds.train;
  auto [model, history] = stage(spec, "train", [&] {
    return train(data, spec.seeds.init, tc, cfg.net);
  });

  const std::vector<int> test_labels = to_dense_labels(
      spec.task == Task::activity ? x_test.activity_labels : x_test.subject_ids);
  row.accuracy = stage(spec, "evaluate", [&] {
    return evaluate_accuracy(model, feat_test, test_labels);
  });

  if (extras) {
    if (spec.task == Task::subject) {
      extras->per_activity = per_activity_subject_accuracy(
          model, feat_test, test_labels, x_test.activity_labels, &history.warnings);
    }
    extras->history = std::move(history);
  }
  row.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

CellSeeds derive_cell_seeds(std::uint64_t master_seed, Task task,
                            const std::string& scenario_name, const std::string& method_name) {
  const std::string task_name = to_string(task);
  const std::string cell = task_name + "/" + scenario_name + "/" + method_name;
  CellSeeds seeds;
  // One resplit per task and one outage draw per (task, scenario), so cells
  // that differ only in repair method see identical damage.
  seeds.split = derive_seed(master_seed, "split/" + task_name);
  seeds.mask = derive_seed(master_seed, "mask/" + task_name + "/" + scenario_name);
  seeds.init = derive_seed(master_seed, "init/" + cell);
  seeds.train = derive_seed(master_seed, "train/" + cell);
  return seeds;
}

ExperimentReport run_grid(const GridRequest& request, const HarDataset& train_raw,
                          const HarDataset& test_raw, const FeatureGroups& groups) {
  if (request.tasks.empty() || request.scenarios.empty() || request.method_names.empty()) {
    throw ConfigError("run_grid: tasks, scenarios and methods must be nonempty");
  }

  std::vector<ExperimentSpec> specs;
  for (const Task task : request.tasks) {
    for (const std::string& scenario_name : request.scenarios) {
      if (scenario_name == "clean") {
        ExperimentSpec spec;
        spec.task = task;
        spec.method = Method::none;
        spec.seeds = derive_cell_seeds(request.master_seed, task, "clean", "none");
        spec.config = request.config;
        specs.push_back(std::move(spec));
        continue;
      }
      const OutageScenario scenario = OutageScenario::builtin(scenario_name);
      for (const std::string& method_name : request.method_names) {
        ExperimentSpec spec;
        spec.task = task;
        spec.scenario = scenario;
        spec.method = method_from_string(method_name);
        spec.seeds = derive_cell_seeds(request.master_seed, task, scenario.name, method_name);
        spec.config = request.config;
        specs.push_back(std::move(spec));
      }
    }
  }

  ExperimentReport report;
  report.dataset_checksum = dataset_checksum(train_raw, test_raw);
  report.config = request.config;
  report.master_seed = request.master_seed;
  report.rows.resize(specs.size());

  std::mutex report_mutex;
  std::atomic<std::size_t> next{0};
  const int jobs = std::max(1, request.jobs);

  auto worker = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= specs.size()) return;
      const ExperimentSpec& spec = specs[idx];
      ReportRow row;
      CellExtras extras;
      try {
        row = run_experiment(spec, train_raw, test_raw, groups, &extras);
      } catch (const std::exception& e) {
        row.task = to_string(spec.task);
        row.scenario = spec.scenario_name();
        row.method = to_string(spec.method);
        row.seeds = spec.seeds;
        row.failed = true;
        row.error = e.what();
      }
      {
        std::lock_guard<std::mutex> lock(report_mutex);
        if (spec.task == Task::subject && !spec.scenario && !row.failed) {
          report.per_activity_subject_accuracy = extras.per_activity;
        }
        for (const std::string& w : extras.history.warnings) {
          report.notes.push_back("[" + spec.cell_key() + "] " + w);
        }
        if (request.echo_progress) {
          std::cerr << "[grid] " << spec.cell_key() << ": "
                    << (row.failed ? ("FAILED " + row.error)
                                   : "accuracy " + std::to_string(row.accuracy))
                    << " (" << row.runtime_s << "s)\n";
        }
        report.rows[idx] = std::move(row);
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return report;
}

}  // namespace har
