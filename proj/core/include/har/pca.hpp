#pragma once

#include <filesystem>
#include <string>

#include "har/dataset.hpp"

namespace har {

// Principal components of a centered data matrix: orthonormal rows of
// `components` span the retained subspace, eigenvalues are the corresponding
// covariance spectrum (1/(N-1) normalization), descending.
struct PcaModel {
  Vector mean;                      // d
  Matrix components;                // r x d
  Vector eigenvalues;               // r, descending, nonnegative
  Vector explained_variance_ratio;  // r, each eigenvalue over the full-trace variance
  double total_variance = 0.0;      // sum of all d eigenvalues

  Eigen::Index input_dim() const { return mean.size(); }
  Eigen::Index rank() const { return components.rows(); }
};

// Mean-centers x, eigendecomposes the covariance, keeps the top r
// eigenvectors. Sign convention: the largest-magnitude entry of every
// component is positive. Requires 1 <= r <= min(N-1, d) and finite input.
PcaModel fit_pca(const Matrix& x, Eigen::Index r);

// Smallest r whose cumulative share of the listed spectrum reaches target.
int components_for_variance(const Vector& eigenvalues_descending, double target);

// Z = (X - mean) * components'. Throws on column-count mismatch.
Matrix transform(const PcaModel& model, const Matrix& x);

// JSON sidecar (mean, components, eigenvalues, total variance); doubles
// round-trip bit-exactly.
std::string pca_to_json_text(const PcaModel& model);
PcaModel pca_from_json_text(const std::string& text);
void save_pca(const PcaModel& model, const std::filesystem::path& path);
PcaModel load_pca(const std::filesystem::path& path);

}  // namespace har
