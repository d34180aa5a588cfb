#include "har/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace har {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Median over a scratch vector (average of the two middle order statistics
// for even counts).
double median_of(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lo + hi) / 2.0;
}

Vector observed_column_means(const MaskedDataset& train, const char* who) {
  const Eigen::Index d = train.base.cols();
  Vector means(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double sum = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < train.base.rows(); ++i) {
      if (!train.missing(i, j)) {
        sum += train.base.features(i, j);
        ++count;
      }
    }
    if (count == 0) {
      const std::string name = j < static_cast<Eigen::Index>(train.base.feature_names.size())
                                   ? train.base.feature_names[static_cast<std::size_t>(j)]
                                   : std::string("column " + std::to_string(j));
      throw FitError(std::string(who) + ": no observed training cells in " + name +
                     " (column " + std::to_string(j) + ")");
    }
    means(j) = sum / static_cast<double>(count);
  }
  return means;
}

}  // namespace

std::string to_string(SimpleStatistic s) {
  return s == SimpleStatistic::mean ? "mean" : "median";
}

SimpleStatistic statistic_from_string(const std::string& s) {
  if (s == "mean") return SimpleStatistic::mean;
  if (s == "median") return SimpleStatistic::median;
  throw ConfigError("unknown statistic '" + s + "' (expected mean or median)");
}

ImputerModel fit_simple(const MaskedDataset& train, SimpleStatistic statistic) {
  ImputerModel model;
  model.kind = ImputerKind::simple;
  model.statistic = statistic;
  if (statistic == SimpleStatistic::mean) {
    model.column_fill = observed_column_means(train, "fit_simple");
    return model;
  }
  const Eigen::Index d = train.base.cols();
  model.column_fill.resize(d);
  std::vector<double> scratch;
  for (Eigen::Index j = 0; j < d; ++j) {
    scratch.clear();
    for (Eigen::Index i = 0; i < train.base.rows(); ++i) {
      if (!train.missing(i, j)) scratch.push_back(train.base.features(i, j));
    }
    if (scratch.empty()) {
      throw FitError("fit_simple: no observed training cells in column " + std::to_string(j));
    }
    model.column_fill(j) = median_of(scratch);
  }
  return model;
}

ImputerModel fit_knn(const MaskedDataset& train, int k) {
  if (k < 1) throw FitError("fit_knn: k must be >= 1, got " + std::to_string(k));
  if (k > train.base.rows()) {
    throw FitError("fit_knn: k = " + std::to_string(k) + " exceeds the " +
                   std::to_string(train.base.rows()) + "-row pool");
  }
  ImputerModel model;
  model.kind = ImputerKind::knn;
  model.k = k;
  model.column_fill = observed_column_means(train, "fit_knn");
  model.pool_observed = train.missing.select(0.0, Matrix::Ones(train.base.rows(), train.base.cols()));
  model.pool_values = train.missing.select(0.0, train.base.features);
  return model;
}

double nan_distance(const Eigen::RowVectorXd& a_values,
                    const Eigen::Array<bool, 1, Eigen::Dynamic>& a_missing,
                    const Eigen::RowVectorXd& b_values,
                    const Eigen::Array<bool, 1, Eigen::Dynamic>& b_missing) {
  if (a_values.size() != b_values.size() || a_values.size() != a_missing.size() ||
      b_values.size() != b_missing.size()) {
    throw ConfigError("nan_distance: row dimensions disagree");
  }
  const Eigen::Index d = a_values.size();
  double sum = 0.0;
  Eigen::Index shared = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!a_missing(j) && !b_missing(j)) {
      const double diff = a_values(j) - b_values(j);
      sum += diff * diff;
      ++shared;
    }
  }
  if (shared == 0) return kInf;
  return std::sqrt(sum * static_cast<double>(d) / static_cast<double>(shared));
}

namespace {

// Squared shared-rescaled distances from every target row in the chunk to
// every pool row, plus the shared-dimension counts:
//   raw2(i, p) = sum_j obs_i(j) obs_p(j) (x_ij - x_pj)^2
//             = Za^2 Mp' - 2 Za Zp' + Ma (Zp^2)'
// which ranks identically to nan_distance once scaled by d / shared.
void chunk_distances(const Matrix& za, const Matrix& ma, const ImputerModel& model,
                     const Matrix& pool_sq, Matrix& scaled2, Matrix& shared) {
  shared.noalias() = ma * model.pool_observed.transpose();
  scaled2.noalias() = za.array().square().matrix() * model.pool_observed.transpose();
  scaled2.noalias() -= 2.0 * za * model.pool_values.transpose();
  scaled2.noalias() += ma * pool_sq.transpose();
  const double d = static_cast<double>(za.cols());
  for (Eigen::Index i = 0; i < scaled2.rows(); ++i) {
    for (Eigen::Index p = 0; p < scaled2.cols(); ++p) {
      if (shared(i, p) <= 0.0) {
        scaled2(i, p) = kInf;
      } else {
        scaled2(i, p) = std::max(scaled2(i, p), 0.0) * d / shared(i, p);
      }
    }
  }
}

}  // namespace

HarDataset impute(const ImputerModel& model, const MaskedDataset& data, ImputeStats* stats) {
  if (model.dim() != data.base.cols()) {
    throw ConfigError("imputer fitted on " + std::to_string(model.dim()) +
                      " columns applied to " + std::to_string(data.base.cols()));
  }
  HarDataset out = data.base;
  ImputeStats local;

  if (model.kind == ImputerKind::simple) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        if (data.missing(i, j)) {
          out.features(i, j) = model.column_fill(j);
          ++local.filled_cells;
        }
      }
    }
    if (stats) *stats = local;
    return out;
  }

  // Knn: process only rows with missing cells, in chunks to bound the
  // distance-matrix footprint.
  std::vector<Eigen::Index> targets;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (data.missing.row(i).any()) targets.push_back(i);
  }
  if (targets.empty()) {
    if (stats) *stats = local;
    return out;
  }

  const Eigen::Index n_pool = model.pool_values.rows();
  const Matrix pool_sq = model.pool_values.array().square();
  constexpr Eigen::Index kChunk = 256;
  Matrix za, ma, scaled2, shared;
  std::vector<int> order(static_cast<std::size_t>(n_pool));

  for (std::size_t begin = 0; begin < targets.size(); begin += kChunk) {
    const Eigen::Index nb =
        std::min<Eigen::Index>(kChunk, static_cast<Eigen::Index>(targets.size() - begin));
    za.resize(nb, out.cols());
    ma.resize(nb, out.cols());
    for (Eigen::Index r = 0; r < nb; ++r) {
      const Eigen::Index i = targets[begin + static_cast<std::size_t>(r)];
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const bool obs = !data.missing(i, j);
        ma(r, j) = obs ? 1.0 : 0.0;
        za(r, j) = obs ? data.base.features(i, j) : 0.0;
      }
    }
    chunk_distances(za, ma, model, pool_sq, scaled2, shared);

    for (Eigen::Index r = 0; r < nb; ++r) {
      const Eigen::Index i = targets[begin + static_cast<std::size_t>(r)];
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double da = scaled2(r, a), db = scaled2(r, b);
        if (da != db) return da < db;
        return a < b;
      });
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        if (!data.missing(i, j)) continue;
        double sum = 0.0;
        int found = 0;
        for (const int p : order) {
          if (std::isinf(scaled2(r, p))) break;  // sorted: only +inf remains
          if (model.pool_observed(p, j) != 0.0) {
            sum += model.pool_values(p, j);
            if (++found == model.k) break;
          }
        }
        if (found > 0) {
          out.features(i, j) = sum / static_cast<double>(found);
        } else {
          out.features(i, j) = model.column_fill(j);
          ++local.fallback_cells;
        }
        ++local.filled_cells;
      }
    }
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace har
