#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "har/dataset.hpp"
#include "har/rng.hpp"

namespace har {

// Gate parameters of one LSTM cell. W_* act on the input (h x d), U_* on the
// previous hidden state (h x h), b_* are biases.
struct LstmParams {
  Matrix w_f, w_i, w_o, w_c;
  Matrix u_f, u_i, u_o, u_c;
  Vector b_f, b_i, b_o, b_c;

  Eigen::Index hidden() const { return w_f.rows(); }
  Eigen::Index input() const { return w_f.cols(); }
  static LstmParams zeros(Eigen::Index h, Eigen::Index d);
  void require_consistent() const;  // throws ValidationError on shape skew
};

struct DenseParams {
  Matrix w;  // out x in
  Vector b;  // out
  static DenseParams zeros(Eigen::Index out, Eigen::Index in);
};

struct NetworkConfig {
  Eigen::Index hidden = 128;
  Eigen::Index dense = 64;
  double dropout_p = 0.2;
  int timesteps = 1;  // input rows are reshaped to (timesteps x width/timesteps)

  void validate() const;
};

// LSTM(hidden) -> dropout -> dense(ReLU) -> dense(softmax over num_classes).
struct ClassifierModel {
  LstmParams lstm;
  DenseParams dense1;
  DenseParams dense2;
  double dropout_p = 0.2;
  int num_classes = 0;
  int timesteps = 1;

  Eigen::Index input_width() const { return lstm.input() * timesteps; }

  // Uniform(-s, s) with s = 1/sqrt(fan_in) per tensor; biases zero except the
  // forget gate's, which starts at 1.
  static ClassifierModel init(Eigen::Index input_width, int num_classes,
                              const NetworkConfig& cfg, Rng& rng);
};

// Everything backward() needs; batch laid out one sample per column.
struct LstmStepCache {
  Matrix x;  // d x B
  Matrix h_prev, c_prev;
  Matrix f, i, o, c_bar, c, tanh_c;
};

struct ForwardCache {
  std::vector<LstmStepCache> steps;
  Matrix h_last;        // h x B, before dropout
  Matrix dropout_mask;  // h x B, already scaled by 1/(1-p); empty when unused
  Matrix h_dropped;
  Matrix z1, a1;   // dense1 pre/post activation
  Matrix probs;    // K x B
  std::vector<int> labels_checked;  // unused; reserved
};

enum class RunMode { train, eval };

// One gate-equation step; returns (h_t, c_t) and optionally the gate record.
std::pair<Matrix, Matrix> lstm_cell_forward(const Matrix& x_t, const Matrix& h_prev,
                                            const Matrix& c_prev, const LstmParams& params,
                                            LstmStepCache* cache = nullptr);

// batch: one sample per row, width = timesteps * lstm.input(). Train mode
// draws an inverted-dropout mask (scale 1/(1-p)) from rng; eval mode ignores
// rng. Returns per-row class probabilities (B x K). Throws NumericError
// naming the first layer that produces a non-finite value.
Matrix forward(const ClassifierModel& model, const Matrix& batch, RunMode mode, Rng* rng,
               ForwardCache* cache = nullptr);

// Mean one-hot cross-entropy with the log argument floored at 1e-12.
double cross_entropy(const Matrix& probabilities, std::span<const int> labels);

struct ModelGrads {
  LstmParams lstm;
  DenseParams dense1, dense2;
  static ModelGrads zeros_like(const ClassifierModel& model);
  bool all_finite() const;
};

// Exact gradients of the mean cross-entropy over the cached batch, through
// the softmax head, both dense layers, the dropout mask and all timesteps.
ModelGrads backward(const ClassifierModel& model, const ForwardCache& cache,
                    std::span<const int> labels);

// Versioned JSON checkpoint of all tensors + hyperparameters; doubles
// round-trip bit-exactly.
std::string model_to_json_text(const ClassifierModel& model);
ClassifierModel model_from_json_text(const std::string& text);
void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

}  // namespace har
