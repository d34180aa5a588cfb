#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "har/experiments.hpp"

namespace har {

namespace {

using nlohmann::json;

json config_to_json(const PipelineConfig& c) {
  return json{
      {"subject_test_fraction", c.subject_test_fraction},
      {"stratify", c.stratify == Stratify::subject ? "subject" : "none"},
      {"mask_target", to_string(c.mask_target)},
      {"timing",
       {{"window_span_s", c.timing.window_span_s},
        {"stride_s", c.timing.stride_s},
        {"sample_rate_hz", c.timing.sample_rate_hz}}},
      {"simple_statistic", to_string(c.simple_statistic)},
      {"knn_k", c.knn_k},
      {"pca_components", c.pca_components},
      {"standardize", c.standardize},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"epsilon", c.train.epsilon},
        {"val_fraction", c.train.val_fraction},
        {"shuffle_each_epoch", c.train.shuffle_each_epoch}}},
      {"network",
       {{"hidden", c.net.hidden},
        {"dense", c.net.dense},
        {"dropout_p", c.net.dropout_p},
        {"timesteps", c.net.timesteps}}},
      {"label_mapping", "activities 1..6 -> 0..5, subjects 1..30 -> 0..29"},
      {"feature_group_rule",
       "name contains 'Gyro' -> gyro; else contains 'Acc' -> acc; else neither; "
       "dual-token names counted under gyro, masked under both sensors"},
  };
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  c.subject_test_fraction = j.at("subject_test_fraction").get<double>();
  c.stratify = j.at("stratify").get<std::string>() == "subject" ? Stratify::subject
                                                                : Stratify::none;
  c.mask_target = mask_target_from_string(j.at("mask_target").get<std::string>());
  c.timing.window_span_s = j.at("timing").at("window_span_s").get<double>();
  c.timing.stride_s = j.at("timing").at("stride_s").get<double>();
  c.timing.sample_rate_hz = j.at("timing").at("sample_rate_hz").get<double>();
  c.simple_statistic = statistic_from_string(j.at("simple_statistic").get<std::string>());
  c.knn_k = j.at("knn_k").get<int>();
  c.pca_components = j.at("pca_components").get<int>();
  c.standardize = j.at("standardize").get<bool>();
  const json& t = j.at("train");
  c.train.epochs = t.at("epochs").get<int>();
  c.train.batch_size = t.at("batch_size").get<int>();
  c.train.learning_rate = t.at("learning_rate").get<double>();
  c.train.beta1 = t.at("beta1").get<double>();
  c.train.beta2 = t.at("beta2").get<double>();
  c.train.epsilon = t.at("epsilon").get<double>();
  c.train.val_fraction = t.at("val_fraction").get<double>();
  c.train.shuffle_each_epoch = t.at("shuffle_each_epoch").get<bool>();
  const json& n = j.at("network");
  c.net.hidden = n.at("hidden").get<Eigen::Index>();
  c.net.dense = n.at("dense").get<Eigen::Index>();
  c.net.dropout_p = n.at("dropout_p").get<double>();
  c.net.timesteps = n.at("timesteps").get<int>();
  return c;
}

json row_to_json(const ReportRow& r) {
  json j = {{"task", r.task},
            {"scenario", r.scenario},
            {"method", r.method},
            {"accuracy", r.accuracy},
            {"missing_cell_fraction", r.missing_cell_fraction},
            {"masked_row_fraction", r.masked_row_fraction},
            {"knn_fallback_cells", r.knn_fallback_cells},
            {"seeds",
             {{"split", r.seeds.split},
              {"mask", r.seeds.mask},
              {"init", r.seeds.init},
              {"train", r.seeds.train}}},
            {"runtime_s", r.runtime_s}};
  if (r.failed) {
    j["failed"] = true;
    j["error"] = r.error;
  }
  return j;
}

ReportRow row_from_json(const json& j) {
  ReportRow r;
  r.task = j.at("task").get<std::string>();
  r.scenario = j.at("scenario").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.accuracy = j.at("accuracy").get<double>();
  r.missing_cell_fraction = j.at("missing_cell_fraction").get<double>();
  r.masked_row_fraction = j.at("masked_row_fraction").get<double>();
  r.knn_fallback_cells = j.value("knn_fallback_cells", std::int64_t{0});
  const json& s = j.at("seeds");
  r.seeds.split = s.at("split").get<std::uint64_t>();
  r.seeds.mask = s.at("mask").get<std::uint64_t>();
  r.seeds.init = s.at("init").get<std::uint64_t>();
  r.seeds.train = s.at("train").get<std::uint64_t>();
  r.runtime_s = j.at("runtime_s").get<double>();
  r.failed = j.value("failed", false);
  r.error = j.value("error", "");
  return r;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  out << text;
  if (!out) throw LoadError("short write on " + path.string());
}

std::string csv_number(double v) {
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

// One paper-style table: scenario rows, method columns.
std::string table_csv(const ExperimentReport& report, const std::string& task) {
  std::ostringstream out;
  out << "scenario,description,missing,si,knn,si_pca,knn_pca\n";
  static const char* kMethodColumns[] = {"none", "simple", "knn", "simple_pca", "knn_pca"};
  for (const auto& sc : OutageScenario::builtins()) {
    bool any = false;
    std::string line = sc.name + "," + sc.description;
    for (const char* method : kMethodColumns) {
      const ReportRow* row = report.find(task, sc.name, method);
      line += ",";
      if (row && !row->failed) {
        line += csv_number(row->accuracy);
        any = true;
      }
    }
    if (any) out << line << "\n";
  }
  return out.str();
}

std::string fig_csv(const ExperimentReport& report, const std::string& task) {
  std::ostringstream out;
  out << "scenario,method,accuracy\n";
  if (const ReportRow* base = report.find(task, "clean", "none"); base && !base->failed) {
    out << "clean,baseline," << csv_number(base->accuracy) << "\n";
  }
  for (const auto& row : report.rows) {
    if (row.task != task || row.scenario == "clean" || row.failed) continue;
    out << row.scenario << "," << row.method << "," << csv_number(row.accuracy) << "\n";
  }
  return out.str();
}

}  // namespace

std::string report_to_json_text(const ExperimentReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) rows.push_back(row_to_json(r));
  json per_activity = json::object();
  for (const auto& [activity, acc] : report.per_activity_subject_accuracy) {
    per_activity[activity_names()[static_cast<std::size_t>(activity - 1)]] = acc;
  }
  json j = {{"version", report.version},
            {"dataset_checksum", report.dataset_checksum},
            {"config", config_to_json(report.config)},
            {"master_seed", report.master_seed},
            {"rows", std::move(rows)},
            {"per_activity_subject_accuracy", std::move(per_activity)},
            {"notes", report.notes}};
  return j.dump(2);
}

ExperimentReport report_from_json_text(const std::string& text) {
  try {
    const json j = json::parse(text);
    ExperimentReport report;
    report.version = j.at("version").get<std::string>();
    report.dataset_checksum = j.at("dataset_checksum").get<std::string>();
    report.config = config_from_json(j.at("config"));
    report.master_seed = j.value("master_seed", std::uint64_t{0});
    for (const auto& r : j.at("rows")) report.rows.push_back(row_from_json(r));
    const auto& names = activity_names();
    for (const auto& [name, acc] : j.at("per_activity_subject_accuracy").items()) {
      for (std::size_t a = 0; a < names.size(); ++a) {
        if (names[a] == name) {
          report.per_activity_subject_accuracy[static_cast<int>(a) + 1] = acc.get<double>();
        }
      }
    }
    if (j.contains("notes")) {
      for (const auto& n : j.at("notes")) report.notes.push_back(n.get<std::string>());
    }
    return report;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report JSON: ") + e.what());
  }
}

void save_report(const ExperimentReport& report, const std::filesystem::path& path) {
  write_text(path, report_to_json_text(report));
}

ExperimentReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return report_from_json_text(text);
}

std::vector<std::filesystem::path> emit_report_csv(const ExperimentReport& report,
                                                   const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;

  auto emit = [&](const char* name, const std::string& text) {
    const auto path = out_dir / name;
    write_text(path, text);
    written.push_back(path);
  };

  emit("table1.csv", table_csv(report, "activity"));
  emit("table2.csv", table_csv(report, "subject"));

  std::ostringstream fig2;
  fig2 << "activity,accuracy\n";
  for (const auto& [activity, acc] : report.per_activity_subject_accuracy) {
    fig2 << activity_names()[static_cast<std::size_t>(activity - 1)] << ","
         << csv_number(acc) << "\n";
  }
  emit("fig2.csv", fig2.str());

  emit("fig3.csv", fig_csv(report, "activity"));
  emit("fig4.csv", fig_csv(report, "subject"));
  return written;
}

}  // namespace har
