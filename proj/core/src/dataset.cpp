#include "har/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "har/rng.hpp"

namespace har {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw LoadError("cannot open " + path.string());
  const auto size = in.tellg();
  std::string text(static_cast<std::size_t>(size), '\0');
  in.seekg(0);
  in.read(text.data(), size);
  if (!in) throw LoadError("short read on " + path.string());
  return text;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

// Splits into non-empty lines, keeping 1-based line numbers for messages.
std::vector<std::pair<std::string_view, int>> lines_of(std::string_view text) {
  std::vector<std::pair<std::string_view, int>> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, end - pos);
    while (!line.empty() && is_space(line.back())) line.remove_suffix(1);
    while (!line.empty() && is_space(line.front())) line.remove_prefix(1);
    if (!line.empty()) out.emplace_back(line, line_no);
    pos = end + 1;
  }
  return out;
}

double parse_double(std::string_view token, const fs::path& path, int line_no) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad real value '" +
                     std::string(token) + "'");
  }
  return value;
}

int parse_int(std::string_view token, const fs::path& path, int line_no) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad integer '" +
                     std::string(token) + "'");
  }
  return value;
}

template <typename Fn>
void for_each_token(std::string_view line, Fn&& fn) {
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && is_space(line[pos])) ++pos;
    std::size_t end = pos;
    while (end < line.size() && !is_space(line[end])) ++end;
    if (end > pos) fn(line.substr(pos, end - pos));
    pos = end;
  }
}

Matrix parse_feature_matrix(const fs::path& path, Eigen::Index expect_cols) {
  const std::string text = read_file(path);
  const auto lines = lines_of(text);
  Matrix out(static_cast<Eigen::Index>(lines.size()), expect_cols);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const auto [line, line_no] = lines[static_cast<std::size_t>(r)];
    Eigen::Index c = 0;
    for_each_token(line, [&](std::string_view token) {
      if (c < expect_cols) out(r, c) = parse_double(token, path, line_no);
      ++c;
    });
    if (c != expect_cols) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(expect_cols) + " fields, found " + std::to_string(c));
    }
  }
  return out;
}

std::vector<int> parse_label_column(const fs::path& path) {
  const std::string text = read_file(path);
  const auto lines = lines_of(text);
  std::vector<int> out;
  out.reserve(lines.size());
  for (const auto& [line, line_no] : lines) {
    int fields = 0;
    for_each_token(line, [&](std::string_view token) {
      if (fields == 0) out.push_back(parse_int(token, path, line_no));
      ++fields;
    });
    if (fields != 1) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected a single label, found " + std::to_string(fields) + " fields");
    }
  }
  return out;
}

std::vector<std::string> parse_feature_names(const fs::path& path) {
  const std::string text = read_file(path);
  const auto lines = lines_of(text);
  std::vector<std::string> names;
  names.reserve(lines.size());
  int expect_id = 1;
  for (const auto& [line, line_no] : lines) {
    const std::size_t space = line.find(' ');
    if (space == std::string_view::npos) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected '<index> <name>'");
    }
    const int id = parse_int(line.substr(0, space), path, line_no);
    if (id != expect_id) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": feature index " +
                       std::to_string(id) + " out of order (expected " +
                       std::to_string(expect_id) + ")");
    }
    ++expect_id;
    std::string_view name = line.substr(space + 1);
    while (!name.empty() && is_space(name.front())) name.remove_prefix(1);
    names.emplace_back(name);
  }
  return names;
}

HarDataset load_split(const fs::path& root, const std::string& split,
                      const std::vector<std::string>& names) {
  const fs::path dir = root / split;
  HarDataset d;
  d.feature_names = names;
  d.features = parse_feature_matrix(dir / ("X_" + split + ".txt"),
                                    static_cast<Eigen::Index>(names.size()));
  d.activity_labels = parse_label_column(dir / ("y_" + split + ".txt"));
  d.subject_ids = parse_label_column(dir / ("subject_" + split + ".txt"));
  d.validate();
  return d;
}

HarDataset concat(const HarDataset& a, const HarDataset& b) {
  if (a.cols() != b.cols() || a.feature_names != b.feature_names) {
    throw ValidationError("cannot merge splits with different feature columns");
  }
  HarDataset out;
  out.feature_names = a.feature_names;
  out.features.resize(a.rows() + b.rows(), a.cols());
  out.features.topRows(a.rows()) = a.features;
  out.features.bottomRows(b.rows()) = b.features;
  out.activity_labels = a.activity_labels;
  out.activity_labels.insert(out.activity_labels.end(), b.activity_labels.begin(),
                             b.activity_labels.end());
  out.subject_ids = a.subject_ids;
  out.subject_ids.insert(out.subject_ids.end(), b.subject_ids.begin(), b.subject_ids.end());
  return out;
}

}  // namespace

void HarDataset::validate() const {
  const auto n = rows();
  if (static_cast<Eigen::Index>(activity_labels.size()) != n ||
      static_cast<Eigen::Index>(subject_ids.size()) != n) {
    throw ValidationError("row count mismatch between features (" + std::to_string(n) +
                          "), activity labels (" + std::to_string(activity_labels.size()) +
                          ") and subject ids (" + std::to_string(subject_ids.size()) + ")");
  }
  if (static_cast<Eigen::Index>(feature_names.size()) != cols()) {
    throw ValidationError("feature name count " + std::to_string(feature_names.size()) +
                          " does not match " + std::to_string(cols()) + " columns");
  }
  if (!features.allFinite()) {
    throw ValidationError("feature matrix contains non-finite values");
  }
  for (std::size_t i = 0; i < activity_labels.size(); ++i) {
    if (activity_labels[i] < 1 || activity_labels[i] > kNumActivities) {
      throw ValidationError("activity label " + std::to_string(activity_labels[i]) +
                            " out of range at row " + std::to_string(i));
    }
    if (subject_ids[i] < 1 || subject_ids[i] > kNumSubjects) {
      throw ValidationError("subject id " + std::to_string(subject_ids[i]) +
                            " out of range at row " + std::to_string(i));
    }
  }
}

HarDataset HarDataset::subset(const std::vector<int>& row_indices) const {
  HarDataset out;
  out.feature_names = feature_names;
  out.features.resize(static_cast<Eigen::Index>(row_indices.size()), cols());
  out.activity_labels.reserve(row_indices.size());
  out.subject_ids.reserve(row_indices.size());
  for (std::size_t i = 0; i < row_indices.size(); ++i) {
    const int r = row_indices[i];
    if (r < 0 || r >= rows()) {
      throw ValidationError("subset row " + std::to_string(r) + " out of range");
    }
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(r);
    out.activity_labels.push_back(activity_labels[static_cast<std::size_t>(r)]);
    out.subject_ids.push_back(subject_ids[static_cast<std::size_t>(r)]);
  }
  return out;
}

const std::array<std::string, 6>& activity_names() {
  static const std::array<std::string, 6> names = {
      "WALKING",  "WALKING_UPSTAIRS", "WALKING_DOWNSTAIRS",
      "SITTING",  "STANDING",         "LAYING"};
  return names;
}

std::string to_string(Sensor s) {
  switch (s) {
    case Sensor::acc: return "acc";
    case Sensor::gyro: return "gyro";
    case Sensor::both: return "both";
  }
  return "?";
}

Sensor sensor_from_string(const std::string& s) {
  if (s == "acc") return Sensor::acc;
  if (s == "gyro") return Sensor::gyro;
  if (s == "both") return Sensor::both;
  throw ConfigError("unknown sensor '" + s + "' (expected acc, gyro or both)");
}

std::vector<int> FeatureGroups::columns_for(Sensor s) const {
  // Dual-token columns are counted once (under gyro) but reference both
  // sensors, so an outage of either sensor blanks them.
  auto merged = [](const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
  };
  switch (s) {
    case Sensor::acc: return merged(acc_columns, dual_token_columns);
    case Sensor::gyro: return gyro_columns;
    case Sensor::both: return merged(acc_columns, gyro_columns);
  }
  return {};
}

void FeatureGroups::require_official_counts() const {
  if (acc_columns.size() == 345 && gyro_columns.size() == 213 && neither_columns.size() == 3) {
    return;
  }
  std::ostringstream msg;
  msg << "feature grouping does not match the official 561-feature list: got "
      << acc_columns.size() << " accelerometer / " << gyro_columns.size() << " gyroscope / "
      << neither_columns.size() << " neither (want 345/213/3)";
  throw CalibrationError(msg.str());
}

FeatureGroups derive_feature_groups(const std::vector<std::string>& names) {
  FeatureGroups g;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const int col = static_cast<int>(i);
    const bool has_gyro = names[i].find("Gyro") != std::string::npos;
    const bool has_acc = names[i].find("Acc") != std::string::npos;
    if (has_gyro && has_acc) g.dual_token_columns.push_back(col);
    if (has_gyro) {
      g.gyro_columns.push_back(col);
    } else if (has_acc) {
      g.acc_columns.push_back(col);
    } else {
      g.neither_columns.push_back(col);
    }
  }
  return g;
}

void SplitConfig::validate() const {
  if (!(test_fraction > 0.0) || !(test_fraction < 1.0)) {
    throw ConfigError("test_fraction must be in (0, 1), got " + std::to_string(test_fraction));
  }
}

std::pair<HarDataset, HarDataset> load_uci_har(const fs::path& root) {
  if (!fs::exists(root)) throw LoadError("dataset directory not found: " + root.string());
  const auto names = parse_feature_names(root / "features.txt");
  HarDataset train = load_split(root, "train", names);
  HarDataset test = load_split(root, "test", names);
  return {std::move(train), std::move(test)};
}

std::pair<HarDataset, HarDataset> merge_and_split(const HarDataset& a, const HarDataset& b,
                                                  const SplitConfig& config) {
  config.validate();
  a.validate();
  b.validate();
  const HarDataset merged = concat(a, b);
  const int n = static_cast<int>(merged.rows());
  Rng rng(config.seed);

  std::map<int, std::vector<int>> by_subject;
  for (int r = 0; r < n; ++r) {
    by_subject[merged.subject_ids[static_cast<std::size_t>(r)]].push_back(r);
  }

  // Every subject present in the merged set must land in both outputs;
  // redraw a bounded number of times before giving up.
  constexpr int kMaxRedraws = 100;
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    std::vector<char> in_test(static_cast<std::size_t>(n), 0);
    if (config.stratify_by == Stratify::none) {
      const int n_test = static_cast<int>(std::llround(n * config.test_fraction));
      std::vector<int> order = rng.permutation(n);
      for (int i = 0; i < n_test; ++i) in_test[static_cast<std::size_t>(order[i])] = 1;
    } else {
      for (auto& [subject, rows] : by_subject) {
        std::vector<int> order = rows;
        rng.shuffle(order.begin(), order.end());
        const int n_test = static_cast<int>(
            std::llround(static_cast<double>(order.size()) * config.test_fraction));
        for (int i = 0; i < n_test; ++i) in_test[static_cast<std::size_t>(order[i])] = 1;
      }
    }

    bool covered = true;
    for (const auto& [subject, rows] : by_subject) {
      int test_count = 0;
      for (const int r : rows) test_count += in_test[static_cast<std::size_t>(r)];
      if (test_count == 0 || test_count == static_cast<int>(rows.size())) {
        covered = false;
        break;
      }
    }
    if (!covered) continue;

    std::vector<int> train_rows, test_rows;
    for (int r = 0; r < n; ++r) {
      (in_test[static_cast<std::size_t>(r)] ? test_rows : train_rows).push_back(r);
    }
    return {merged.subset(train_rows), merged.subset(test_rows)};
  }
  throw SplitError("could not produce a split with every subject in both outputs after " +
                   std::to_string(kMaxRedraws) + " redraws");
}

Standardizer Standardizer::fit(const Matrix& x) {
  if (x.rows() < 1) throw ConfigError("cannot fit a standardizer on an empty matrix");
  Standardizer s;
  s.mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - s.mean.transpose();
  Vector var = centered.array().square().colwise().mean();
  s.scale = var.array().sqrt();
  for (Eigen::Index c = 0; c < s.scale.size(); ++c) {
    if (s.scale(c) < 1e-12) s.scale(c) = 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  if (x.cols() != mean.size()) {
    throw ConfigError("standardizer fitted on " + std::to_string(mean.size()) +
                      " columns applied to " + std::to_string(x.cols()));
  }
  Matrix out = x.rowwise() - mean.transpose();
  out.array().rowwise() /= scale.transpose().array();
  return out;
}

namespace {
void fnv_bytes(std::uint64_t& h, const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
}
void fnv_dataset(std::uint64_t& h, const HarDataset& d) {
  const std::int64_t dims[2] = {d.rows(), d.cols()};
  fnv_bytes(h, dims, sizeof(dims));
  fnv_bytes(h, d.features.data(), sizeof(double) * static_cast<std::size_t>(d.features.size()));
  fnv_bytes(h, d.activity_labels.data(), sizeof(int) * d.activity_labels.size());
  fnv_bytes(h, d.subject_ids.data(), sizeof(int) * d.subject_ids.size());
}
}  // namespace

std::string dataset_checksum(const HarDataset& train, const HarDataset& test) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  fnv_dataset(h, train);
  fnv_dataset(h, test);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace har
