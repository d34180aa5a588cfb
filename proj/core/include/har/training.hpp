#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "har/network.hpp"

namespace har {

struct TrainConfig {
  int epochs = 300;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
  bool shuffle_each_epoch = true;

  void validate() const;  // throws ConfigError
};

struct AdamState {
  ModelGrads m, v;
  long step = 0;
  static AdamState zeros_like(const ClassifierModel& model);
};

// Standard bias-corrected Adam update, in place. Throws NumericError on a
// non-finite gradient before touching the parameters.
void adam_step(ClassifierModel& params, const ModelGrads& grads, AdamState& state,
               const TrainConfig& cfg);

struct EpochStats {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::vector<std::string> warnings;

  void write_csv(std::ostream& out) const;  // epoch,train_loss,train_acc,val_loss,val_acc
};

// Fully observed features (one sample per row) with dense labels 0..K-1.
struct LabeledData {
  Matrix features;
  std::vector<int> labels;
  int num_classes = 0;
};

struct SplitIndices {
  std::vector<int> train_rows;
  std::vector<int> val_rows;
};

// Dense 0-based labels from 1-based ids (activities 1..6 -> 0..5,
// subjects 1..30 -> 0..29).
std::vector<int> to_dense_labels(const std::vector<int>& one_based);

// Adam training with a seeded validation holdout (never trained on), seeded
// epoch shuffles and dropout streams. Deterministic given (data, seeds);
// returns the final-epoch model — no early stopping. `split_out`, when given,
// receives the exact train/validation row partition.
std::pair<ClassifierModel, TrainHistory> train(const LabeledData& data,
                                               std::uint64_t model_init_seed,
                                               const TrainConfig& cfg, const NetworkConfig& net,
                                               SplitIndices* split_out = nullptr);

// Fraction of rows whose argmax probability matches the label; argmax ties
// break to the lowest class index.
double evaluate_accuracy(const ClassifierModel& model, const Matrix& features,
                         std::span<const int> labels);

// Per-row argmax predictions (chunked eval-mode forward).
std::vector<int> predict(const ClassifierModel& model, const Matrix& features);

// Subject-model accuracy restricted to each activity's rows. Activities with
// no rows are omitted (with a warning appended when `warnings` is given).
std::map<int, double> per_activity_subject_accuracy(const ClassifierModel& model,
                                                    const Matrix& features,
                                                    const std::vector<int>& subject_labels,
                                                    const std::vector<int>& activity_labels,
                                                    std::vector<std::string>* warnings = nullptr);

}  // namespace har
