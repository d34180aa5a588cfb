#include "har/pca.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace har {

PcaModel fit_pca(const Matrix& x, Eigen::Index r) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n < 2) throw ConfigError("fit_pca: need at least 2 rows, got " + std::to_string(n));
  const Eigen::Index r_max = std::min<Eigen::Index>(n - 1, d);
  if (r < 1 || r > r_max) {
    throw ConfigError("fit_pca: r = " + std::to_string(r) + " outside [1, " +
                      std::to_string(r_max) + "]");
  }
  if (!x.allFinite()) throw NumericError("fit_pca: input matrix has non-finite values");

  PcaModel model;
  model.mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - model.mean.transpose();
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw NumericError("fit_pca: eigendecomposition failed to converge");
  }
  // Eigen returns the spectrum ascending; flip to descending and clamp the
  // tiny negative values rank deficiency produces.
  Vector all_vals = solver.eigenvalues().reverse();
  for (Eigen::Index i = 0; i < all_vals.size(); ++i) all_vals(i) = std::max(all_vals(i), 0.0);
  model.total_variance = all_vals.sum();

  model.eigenvalues = all_vals.head(r);
  model.components.resize(r, d);
  for (Eigen::Index i = 0; i < r; ++i) {
    Vector v = solver.eigenvectors().col(d - 1 - i);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    model.components.row(i) = v.transpose();
  }
  model.explained_variance_ratio =
      model.total_variance > 0.0 ? Vector(model.eigenvalues / model.total_variance)
                                 : Vector(Vector::Zero(r));
  return model;
}

int components_for_variance(const Vector& eigenvalues_descending, double target) {
  if (eigenvalues_descending.size() == 0) {
    throw ConfigError("components_for_variance: empty eigenvalue list");
  }
  if (!(target > 0.0) || target > 1.0) {
    throw ConfigError("components_for_variance: target must be in (0, 1]");
  }
  const double total = eigenvalues_descending.sum();
  if (total <= 0.0) return 1;
  double cum = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues_descending.size(); ++i) {
    cum += eigenvalues_descending(i);
    if (cum / total >= target - 1e-12) return static_cast<int>(i) + 1;
  }
  return static_cast<int>(eigenvalues_descending.size());
}

Matrix transform(const PcaModel& model, const Matrix& x) {
  if (x.cols() != model.input_dim()) {
    throw ConfigError("pca transform: model expects " + std::to_string(model.input_dim()) +
                      " columns, got " + std::to_string(x.cols()));
  }
  return (x.rowwise() - model.mean.transpose()) * model.components.transpose();
}

namespace {

using nlohmann::json;

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

Matrix matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw ParseError("pca sidecar: ragged component matrix");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

std::string pca_to_json_text(const PcaModel& model) {
  json j = {{"format", "har-pca"},
            {"version", 1},
            {"mean", vector_to_json(model.mean)},
            {"components", matrix_to_json(model.components)},
            {"eigenvalues", vector_to_json(model.eigenvalues)},
            {"explained_variance_ratio", vector_to_json(model.explained_variance_ratio)},
            {"total_variance", model.total_variance}};
  return j.dump();
}

PcaModel pca_from_json_text(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "har-pca") throw ParseError("pca sidecar: wrong format tag");
    PcaModel model;
    model.mean = vector_from_json(j.at("mean"));
    model.components = matrix_from_json(j.at("components"));
    model.eigenvalues = vector_from_json(j.at("eigenvalues"));
    model.explained_variance_ratio = vector_from_json(j.at("explained_variance_ratio"));
    model.total_variance = j.at("total_variance").get<double>();
    return model;
  } catch (const json::exception& e) {
    throw ParseError(std::string("pca sidecar: ") + e.what());
  }
}

void save_pca(const PcaModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  out << pca_to_json_text(model);
  if (!out) throw LoadError("short write on " + path.string());
}

PcaModel load_pca(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return pca_from_json_text(text);
}

}  // namespace har
