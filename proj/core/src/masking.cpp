#include "har/masking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "har/rng.hpp"

namespace har {

namespace {

using nlohmann::json;

struct Unit {
  double duration = 0.0;
  Sensor sensor = Sensor::both;
};

struct PlacedUnit {
  double start = 0.0;
  double duration = 0.0;
  Sensor sensor = Sensor::both;
};

bool time_overlaps(const std::vector<PlacedUnit>& placed, double start, double duration) {
  for (const auto& p : placed) {
    if (start < p.start + p.duration && p.start < start + duration) return true;
  }
  return false;
}

int mark_coverage(const std::vector<PlacedUnit>& units, const WindowTiming& timing, int len,
                  std::vector<char>& covered) {
  std::fill(covered.begin(), covered.end(), 0);
  for (const auto& u : units) {
    const auto [b, e] = windows_overlapping(u.start, u.duration, timing, len);
    std::fill(covered.begin() + b, covered.begin() + e, 1);
  }
  return static_cast<int>(std::count(covered.begin(), covered.end(), 1));
}

struct SeqPlacement {
  std::vector<PlacedUnit> units;
  int covered = 0;
  bool best_effort = false;
};

// One draw of an "arrangement": pick m of the units, group them into k
// back-to-back clusters, drop the clusters at random non-overlapping starts.
// Clustering shrinks row coverage (adjacent windows are shared), spreading
// grows it, so the search spans the reachable coverage range.
bool draw_arrangement(const std::vector<Unit>& units, int m, double seq_span,
                      const WindowTiming& timing, int len, Rng& rng,
                      std::vector<PlacedUnit>& out) {
  out.clear();
  std::vector<int> order(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order.begin(), order.end());
  order.resize(static_cast<std::size_t>(m));

  const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
  // Ordered partition of the m units into k non-empty clusters.
  std::vector<std::vector<Unit>> clusters(static_cast<std::size_t>(k));
  for (int i = 0; i < m; ++i) {
    const int c = i < k ? i : static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    clusters[static_cast<std::size_t>(c)].push_back(units[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  }

  std::vector<PlacedUnit> placed_blocks;
  for (const auto& cluster : clusters) {
    double block_dur = 0.0;
    for (const auto& u : cluster) block_dur += u.duration;
    if (block_dur > seq_span) return false;
    bool ok = false;
    for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
      const double s = rng.uniform(0.0, seq_span - block_dur);
      if (time_overlaps(placed_blocks, s, block_dur)) continue;
      placed_blocks.push_back({s, block_dur, Sensor::both});
      double at = s;
      for (const auto& u : cluster) {
        out.push_back({at, u.duration, u.sensor});
        at += u.duration;
      }
      ok = true;
    }
    if (!ok) return false;
  }
  (void)len;
  (void)timing;
  return true;
}

SeqPlacement place_uncalibrated(const std::vector<Unit>& units, double seq_span,
                                const WindowTiming& timing, int len, Rng& rng) {
  SeqPlacement out;
  for (int attempt = 0; attempt < 200; ++attempt) {
    std::vector<PlacedUnit> cand;
    bool ok = true;
    for (const auto& u : units) {
      if (u.duration > seq_span) {
        ok = false;
        break;
      }
      bool placed = false;
      for (int trial = 0; trial < 100 && !placed; ++trial) {
        const double s = rng.uniform(0.0, seq_span - u.duration);
        if (time_overlaps(cand, s, u.duration)) continue;
        cand.push_back({s, u.duration, u.sensor});
        placed = true;
      }
      if (!placed) {
        ok = false;
        break;
      }
    }
    if (ok) {
      out.units = std::move(cand);
      std::vector<char> covered(static_cast<std::size_t>(len), 0);
      out.covered = mark_coverage(out.units, timing, len, covered);
      return out;
    }
  }
  // Crowded or short sequence: pack what fits back-to-back from t=0.
  out.best_effort = true;
  double at = 0.0;
  for (const auto& u : units) {
    double d = u.duration;
    if (at >= seq_span) break;
    if (at + d > seq_span) d = seq_span - at;
    out.units.push_back({at, d, u.sensor});
    at += d;
  }
  std::vector<char> covered(static_cast<std::size_t>(len), 0);
  out.covered = out.units.empty() ? 0 : mark_coverage(out.units, timing, len, covered);
  return out;
}

SeqPlacement place_calibrated(const std::vector<Unit>& units, double seq_span,
                              const WindowTiming& timing, int len, long quota, Rng& rng) {
  SeqPlacement best;
  best.covered = -1;
  if (quota <= 0 || units.empty()) {
    best.covered = 0;
    return best;
  }

  std::vector<char> covered(static_cast<std::size_t>(len), 0);
  const int n_units = static_cast<int>(units.size());
  std::vector<PlacedUnit> cand;

  auto better = [&](int cov) {
    if (best.covered < 0) return true;
    const long db = std::labs(best.covered - quota);
    const long dc = std::labs(cov - quota);
    if (dc != db) return dc < db;
    return cov < best.covered;  // prefer undershoot: extension can top it up
  };

  for (int m = n_units; m >= 1; --m) {
    for (int attempt = 0; attempt < 48; ++attempt) {
      if (!draw_arrangement(units, m, seq_span, timing, len, rng, cand)) continue;
      const int cov = mark_coverage(cand, timing, len, covered);
      if (better(cov)) {
        best.units = cand;
        best.covered = cov;
      }
      if (best.covered == quota) return best;
    }
    // Only shed units while every arrangement overshoots the quota.
    if (best.covered >= 0 && best.covered <= quota) break;
  }
  if (best.covered < 0) {
    best.covered = 0;
    best.best_effort = true;
    return best;
  }

  if (best.covered < quota) {
    // Top up with extra intervals; partial overlap against already-covered
    // rows lets the marginal gain hit the remaining need exactly.
    mark_coverage(best.units, timing, len, covered);
    int cycle = 0;
    int guard = 0;
    while (best.covered < quota && guard++ < 400) {
      const long need = quota - best.covered;
      const Unit u = units[static_cast<std::size_t>(cycle++ % n_units)];
      const double d = std::min(u.duration, seq_span);

      bool have_pick = false;
      PlacedUnit pick{};
      long pick_gain = 0;
      bool pick_exact = false;
      long best_low = 0, best_high = std::numeric_limits<long>::max();
      for (int trial = 0; trial < 96 && !pick_exact; ++trial) {
        const double s = rng.uniform(0.0, seq_span - d);
        if (time_overlaps(best.units, s, d)) continue;
        const auto [b, e] = windows_overlapping(s, d, timing, len);
        long gain = 0;
        for (int i = b; i < e; ++i) gain += covered[static_cast<std::size_t>(i)] ? 0 : 1;
        if (gain == need) {
          pick = {s, d, u.sensor};
          pick_gain = gain;
          have_pick = pick_exact = true;
        } else if (gain > 0 && gain < need && gain > best_low) {
          pick = {s, d, u.sensor};
          pick_gain = best_low = gain;
          have_pick = true;
        } else if (gain > need && gain < best_high && best_low == 0 && !have_pick) {
          pick = {s, d, u.sensor};
          pick_gain = best_high = gain;
          have_pick = true;
        }
      }
      if (!have_pick) {
        best.best_effort = true;
        break;
      }
      best.units.push_back(pick);
      const auto [b, e] = windows_overlapping(pick.start, pick.duration, timing, len);
      for (int i = b; i < e; ++i) covered[static_cast<std::size_t>(i)] = 1;
      best.covered += static_cast<int>(pick_gain);
      if (pick_gain > need) break;  // minimal available overshoot; debt absorbs it
    }
  }
  return best;
}

Sensor sensor_from_json(const json& j) {
  if (!j.is_string()) throw ParseError("scenario event sensor must be a string");
  return sensor_from_string(j.get<std::string>());
}

OutageScenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("scenario must be a JSON object");
  OutageScenario sc;
  if (!j.contains("name") || !j["name"].is_string()) {
    throw ParseError("scenario requires a string 'name'");
  }
  sc.name = j["name"].get<std::string>();
  if (j.contains("description")) sc.description = j["description"].get<std::string>();
  if (!j.contains("events") || !j["events"].is_array()) {
    throw ParseError("scenario '" + sc.name + "' requires an 'events' array");
  }
  for (const auto& e : j["events"]) {
    OutageEvent ev;
    ev.sensor = sensor_from_json(e.at("sensor"));
    ev.duration_s = e.at("duration_s").get<double>();
    ev.count = e.at("count").get<int>();
    sc.events.push_back(ev);
  }
  if (j.contains("target_row_fraction") && !j["target_row_fraction"].is_null()) {
    sc.target_row_fraction = j["target_row_fraction"].get<double>();
  }
  sc.validate();
  return sc;
}

json scenario_to_json(const OutageScenario& sc) {
  json events = json::array();
  for (const auto& e : sc.events) {
    events.push_back({{"sensor", to_string(e.sensor)},
                      {"duration_s", e.duration_s},
                      {"count", e.count}});
  }
  json j = {{"name", sc.name}, {"events", std::move(events)}};
  if (!sc.description.empty()) j["description"] = sc.description;
  if (sc.target_row_fraction) j["target_row_fraction"] = *sc.target_row_fraction;
  return j;
}

}  // namespace

void WindowTiming::validate() const {
  if (!(window_span_s > stride_s) || !(stride_s > 0.0)) {
    throw ValidationError("window timing requires span > stride > 0");
  }
  if (!(sample_rate_hz > 0.0)) throw ValidationError("sample rate must be positive");
}

void OutageScenario::validate() const {
  if (name.empty()) throw ValidationError("scenario name must not be empty");
  if (events.empty()) throw ValidationError("scenario '" + name + "' has no events");
  for (const auto& e : events) {
    if (!(e.duration_s > 0.0) || !std::isfinite(e.duration_s)) {
      throw ValidationError("scenario '" + name + "' has an event with non-positive duration");
    }
    if (e.count < 1) {
      throw ValidationError("scenario '" + name + "' has an event with count < 1");
    }
  }
  if (target_row_fraction &&
      (!(*target_row_fraction > 0.0) || !(*target_row_fraction < 1.0))) {
    throw ValidationError("scenario '" + name + "' target_row_fraction must be in (0,1)");
  }
}

const std::vector<OutageScenario>& OutageScenario::builtins() {
  // Row-fraction targets invert the published missing-cell percentages
  // through the sensor column counts (345 acc / 213 gyro / 558 both of 561).
  static const std::vector<OutageScenario> list = {
      {"S1", "1s ACC+Gyro x5", {{Sensor::both, 1.0, 5}}, 0.1207 * 561.0 / 558.0},
      {"S2", "2.5s ACC+Gyro x2", {{Sensor::both, 2.5, 2}}, 0.1206 * 561.0 / 558.0},
      {"S3", "5s ACC", {{Sensor::acc, 5.0, 1}}, 0.1491 * 561.0 / 345.0},
      {"S4", "5s Gyro", {{Sensor::gyro, 5.0, 1}}, 0.0922 * 561.0 / 213.0},
      {"S5", "10s ACC", {{Sensor::acc, 10.0, 1}}, 0.1491 * 561.0 / 345.0},
      {"S6", "10s Gyro", {{Sensor::gyro, 10.0, 1}}, 0.0922 * 561.0 / 213.0},
  };
  return list;
}

OutageScenario OutageScenario::builtin(const std::string& id) {
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  const std::string want = lower(id);
  for (const auto& sc : builtins()) {
    if (lower(sc.name) == want || lower(sc.description) == want) return sc;
  }
  std::string names;
  for (const auto& sc : builtins()) names += (names.empty() ? "" : ", ") + sc.name;
  throw ConfigError("unknown scenario '" + id + "' (built-ins: " + names + ")");
}

OutageScenario scenario_from_json_text(const std::string& text) {
  try {
    return scenario_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario JSON: ") + e.what());
  }
}

std::string scenario_to_json_text(const OutageScenario& sc) {
  return scenario_to_json(sc).dump(2);
}

std::vector<OutageScenario> load_scenarios_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open scenario file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  std::vector<OutageScenario> out;
  try {
    if (j.is_array()) {
      for (const auto& item : j) out.push_back(scenario_from_json(item));
    } else {
      out.push_back(scenario_from_json(j));
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (out.empty()) throw ParseError(path.string() + ": no scenarios defined");
  return out;
}

std::vector<char> MaskPlan::row_flags() const {
  std::vector<char> flags(static_cast<std::size_t>(dataset_rows), 0);
  for (const auto& itv : intervals) {
    const auto& rows = sequences[static_cast<std::size_t>(itv.sequence)].rows;
    for (int i = itv.row_begin; i < itv.row_end; ++i) {
      flags[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])] = 1;
    }
  }
  return flags;
}

MaskedDataset MaskedDataset::clean(const HarDataset& d) {
  MaskedDataset out;
  out.base = d;
  out.missing = BoolMask::Constant(d.rows(), d.cols(), false);
  out.scenario_name = "clean";
  out.masked_row_fraction = 0.0;
  return out;
}

std::pair<int, int> windows_overlapping(double outage_start_s, double duration_s,
                                        const WindowTiming& timing, int seq_len) {
  if (seq_len <= 0) throw ConfigError("windows_overlapping: empty sequence");
  if (!(duration_s > 0.0)) throw ConfigError("windows_overlapping: duration must be positive");
  // Strict inequalities: i*stride < start+duration and i*stride+span > start.
  int first = static_cast<int>(
                  std::floor((outage_start_s - timing.window_span_s) / timing.stride_s)) +
              1;
  int last = static_cast<int>(std::ceil((outage_start_s + duration_s) / timing.stride_s)) - 1;
  first = std::max(first, 0);
  last = std::min(last, seq_len - 1);
  if (first > last) {
    throw ConfigError("outage at t=" + std::to_string(outage_start_s) +
                      "s overlaps no windows of a " + std::to_string(seq_len) +
                      "-row sequence");
  }
  return {first, last + 1};
}

MaskPlan plan_outages(const OutageScenario& scenario, const HarDataset& dataset,
                      const WindowTiming& timing, std::uint64_t seed) {
  timing.validate();
  scenario.validate();
  if (dataset.rows() == 0) throw ValidationError("cannot plan outages on an empty dataset");

  MaskPlan plan;
  plan.scenario_name = scenario.name;
  plan.seed = seed;
  plan.dataset_rows = dataset.rows();
  plan.dataset_cols = dataset.cols();
  plan.target_row_fraction = scenario.target_row_fraction;

  std::map<std::pair<int, int>, int> seq_of_key;
  for (int r = 0; r < dataset.rows(); ++r) {
    const std::pair<int, int> key{dataset.subject_ids[static_cast<std::size_t>(r)],
                                  dataset.activity_labels[static_cast<std::size_t>(r)]};
    auto it = seq_of_key.find(key);
    if (it == seq_of_key.end()) {
      it = seq_of_key.emplace(key, static_cast<int>(plan.sequences.size())).first;
      plan.sequences.push_back({key.first, key.second, {}});
    }
    plan.sequences[static_cast<std::size_t>(it->second)].rows.push_back(r);
  }

  std::vector<Unit> units;
  for (const auto& e : scenario.events) {
    for (int c = 0; c < e.count; ++c) units.push_back({e.duration_s, e.sensor});
  }

  Rng rng(seed);
  double debt = 0.0;
  long total_masked = 0;
  for (std::size_t si = 0; si < plan.sequences.size(); ++si) {
    const int len = static_cast<int>(plan.sequences[si].rows.size());
    const double seq_span = (len - 1) * timing.stride_s + timing.window_span_s;

    SeqPlacement placement;
    double quota = 0.0;
    if (scenario.target_row_fraction) {
      const double ideal = *scenario.target_row_fraction * len;
      long q = std::lround(ideal + debt);
      q = std::clamp<long>(q, 0, len);
      quota = static_cast<double>(q);
      placement = place_calibrated(units, seq_span, timing, len, q, rng);
      debt = ideal + debt - placement.covered;
    } else {
      placement = place_uncalibrated(units, seq_span, timing, len, rng);
    }

    for (const auto& u : placement.units) {
      const auto [b, e] = windows_overlapping(u.start, u.duration, timing, len);
      plan.intervals.push_back({static_cast<int>(si), b, e, u.sensor});
    }
    plan.stats.push_back({static_cast<int>(si), len, placement.covered, quota,
                          placement.best_effort});
    if (placement.best_effort) {
      plan.warnings.push_back("sequence " + std::to_string(si) + " (subject " +
                              std::to_string(plan.sequences[si].subject) + ", activity " +
                              std::to_string(plan.sequences[si].activity) +
                              "): best-effort placement (" + std::to_string(placement.covered) +
                              " rows)");
    }
    total_masked += placement.covered;
  }

  plan.achieved_row_fraction =
      static_cast<double>(total_masked) / static_cast<double>(dataset.rows());
  if (scenario.target_row_fraction &&
      std::abs(plan.achieved_row_fraction - *scenario.target_row_fraction) > 0.01) {
    throw CalibrationError(
        "scenario '" + scenario.name + "': achieved masked-row fraction " +
        std::to_string(plan.achieved_row_fraction) + " misses target " +
        std::to_string(*scenario.target_row_fraction) + " by more than 1 percentage point");
  }
  return plan;
}

MaskedDataset apply_mask(const MaskPlan& plan, const HarDataset& dataset,
                         const FeatureGroups& groups) {
  if (plan.dataset_rows != dataset.rows() || plan.dataset_cols != dataset.cols()) {
    throw ValidationError("mask plan was built for a " + std::to_string(plan.dataset_rows) +
                          "x" + std::to_string(plan.dataset_cols) + " dataset, got " +
                          std::to_string(dataset.rows()) + "x" + std::to_string(dataset.cols()));
  }
  MaskedDataset out;
  out.base = dataset;
  out.missing = BoolMask::Constant(dataset.rows(), dataset.cols(), false);
  out.provenance = plan.intervals;
  out.scenario_name = plan.scenario_name;

  for (const auto& itv : plan.intervals) {
    const auto& rows = plan.sequences[static_cast<std::size_t>(itv.sequence)].rows;
    const std::vector<int> cols = groups.columns_for(itv.sensor);
    for (int i = itv.row_begin; i < itv.row_end; ++i) {
      const int r = rows[static_cast<std::size_t>(i)];
      for (const int c : cols) out.missing(r, c) = true;
    }
  }
  out.masked_row_fraction = masked_row_fraction(out);
  return out;
}

double missing_cell_fraction(const MaskedDataset& masked) {
  const auto total = static_cast<double>(masked.missing.size());
  return total == 0.0 ? 0.0 : static_cast<double>(masked.missing.count()) / total;
}

double masked_row_fraction(const MaskedDataset& masked) {
  if (masked.missing.rows() == 0) return 0.0;
  const auto masked_rows =
      static_cast<double>((masked.missing.rowwise().any()).count());
  return masked_rows / static_cast<double>(masked.missing.rows());
}

HarDataset zero_fill(const MaskedDataset& masked) {
  HarDataset out = masked.base;
  out.features = masked.missing.select(0.0, masked.base.features);
  return out;
}

}  // namespace har
