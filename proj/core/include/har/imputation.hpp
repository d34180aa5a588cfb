#pragma once

#include <cstdint>
#include <string>

#include "har/masking.hpp"

namespace har {

enum class SimpleStatistic { mean, median };
enum class ImputerKind { simple, knn };

std::string to_string(SimpleStatistic s);
SimpleStatistic statistic_from_string(const std::string& s);

// Fitted repair model. Simple keeps one statistic per column; Knn keeps the
// whole training pool (values with masked cells zeroed, plus a 0/1
// observation matrix) and per-column observed means as the fallback fill.
struct ImputerModel {
  ImputerKind kind = ImputerKind::simple;
  SimpleStatistic statistic = SimpleStatistic::mean;
  int k = 0;

  Vector column_fill;   // simple: the fitted statistic; knn: pool column means
  Matrix pool_values;   // knn only: masked cells as 0
  Matrix pool_observed; // knn only: 1.0 observed, 0.0 masked

  Eigen::Index dim() const { return column_fill.size(); }
};

// Per-column statistic over observed training cells. Throws FitError naming
// the first column with no observed cells.
ImputerModel fit_simple(const MaskedDataset& train, SimpleStatistic statistic);

// Stores the training rows as the neighbor pool. Requires 1 <= k <= rows and
// at least one observed cell per column (otherwise that column could never
// be imputed).
ImputerModel fit_knn(const MaskedDataset& train, int k);

// Euclidean distance over columns observed in both rows, rescaled by
// sqrt(d / d_shared); +infinity when the observed sets are disjoint.
double nan_distance(const Eigen::RowVectorXd& a_values,
                    const Eigen::Array<bool, 1, Eigen::Dynamic>& a_missing,
                    const Eigen::RowVectorXd& b_values,
                    const Eigen::Array<bool, 1, Eigen::Dynamic>& b_missing);

struct ImputeStats {
  std::int64_t filled_cells = 0;
  std::int64_t fallback_cells = 0;  // knn cells that used the pool column mean
};

// Observed cells pass through bit-exactly; masked cells are filled. Knn fills
// cell (i, j) with the unweighted mean of column j over the k nearest pool
// rows (by nan_distance, at finite distance) that observe column j; rank ties
// break toward the lower pool row index, and donor values are summed in rank
// order. When no finite-distance pool row observes the column, the pool
// column mean is used and counted in stats.fallback_cells.
HarDataset impute(const ImputerModel& model, const MaskedDataset& data,
                  ImputeStats* stats = nullptr);

}  // namespace har
