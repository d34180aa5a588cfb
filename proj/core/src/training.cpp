#include "har/training.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace har {

namespace {

// Applies fn(param, grad, m, v) across all sixteen tensors.
template <typename ModelT, typename GradT, typename Fn>
void zip_tensors(ModelT& p, GradT& g, AdamState& s, Fn&& fn) {
  fn(p.lstm.w_f, g.lstm.w_f, s.m.lstm.w_f, s.v.lstm.w_f);
  fn(p.lstm.w_i, g.lstm.w_i, s.m.lstm.w_i, s.v.lstm.w_i);
  fn(p.lstm.w_o, g.lstm.w_o, s.m.lstm.w_o, s.v.lstm.w_o);
  fn(p.lstm.w_c, g.lstm.w_c, s.m.lstm.w_c, s.v.lstm.w_c);
  fn(p.lstm.u_f, g.lstm.u_f, s.m.lstm.u_f, s.v.lstm.u_f);
  fn(p.lstm.u_i, g.lstm.u_i, s.m.lstm.u_i, s.v.lstm.u_i);
  fn(p.lstm.u_o, g.lstm.u_o, s.m.lstm.u_o, s.v.lstm.u_o);
  fn(p.lstm.u_c, g.lstm.u_c, s.m.lstm.u_c, s.v.lstm.u_c);
  fn(p.lstm.b_f, g.lstm.b_f, s.m.lstm.b_f, s.v.lstm.b_f);
  fn(p.lstm.b_i, g.lstm.b_i, s.m.lstm.b_i, s.v.lstm.b_i);
  fn(p.lstm.b_o, g.lstm.b_o, s.m.lstm.b_o, s.v.lstm.b_o);
  fn(p.lstm.b_c, g.lstm.b_c, s.m.lstm.b_c, s.v.lstm.b_c);
  fn(p.dense1.w, g.dense1.w, s.m.dense1.w, s.v.dense1.w);
  fn(p.dense1.b, g.dense1.b, s.m.dense1.b, s.v.dense1.b);
  fn(p.dense2.w, g.dense2.w, s.m.dense2.w, s.v.dense2.w);
  fn(p.dense2.b, g.dense2.b, s.m.dense2.b, s.v.dense2.b);
}

int argmax_row(const Matrix& probs, Eigen::Index row) {
  int best = 0;
  double best_p = probs(row, 0);
  for (Eigen::Index k = 1; k < probs.cols(); ++k) {
    if (probs(row, k) > best_p) {
      best_p = probs(row, k);
      best = static_cast<int>(k);
    }
  }
  return best;
}

constexpr Eigen::Index kEvalChunk = 1024;

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("beta1 and beta2 must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw ConfigError("val_fraction must lie in [0, 1)");
  }
}

AdamState AdamState::zeros_like(const ClassifierModel& model) {
  AdamState s;
  s.m = ModelGrads::zeros_like(model);
  s.v = ModelGrads::zeros_like(model);
  s.step = 0;
  return s;
}

void adam_step(ClassifierModel& params, const ModelGrads& grads, AdamState& state,
               const TrainConfig& cfg) {
  if (!grads.all_finite()) throw NumericError("non-finite gradient");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = (cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square()).matrix();
    p.array() -=
        cfg.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.epsilon);
  };
  zip_tensors(params, grads, state, update);
}

void TrainHistory::write_csv(std::ostream& out) const {
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    const EpochStats& s = epochs[e];
    out << (e + 1) << ',' << s.train_loss << ',' << s.train_accuracy << ',' << s.val_loss
        << ',' << s.val_accuracy << '\n';
  }
}

std::vector<int> to_dense_labels(const std::vector<int>& one_based) {
  std::vector<int> out(one_based.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = one_based[i] - 1;
  return out;
}

namespace {

// Eval-mode loss and accuracy over the given rows, in chunks.
std::pair<double, double> evaluate_rows(const ClassifierModel& model, const Matrix& features,
                                        std::span<const int> labels,
                                        const std::vector<int>& rows) {
  if (rows.empty()) return {0.0, 0.0};
  double loss_sum = 0.0;
  long correct = 0;
  for (std::size_t begin = 0; begin < rows.size(); begin += kEvalChunk) {
    const auto nb = std::min<std::size_t>(kEvalChunk, rows.size() - begin);
    Matrix chunk(static_cast<Eigen::Index>(nb), features.cols());
    std::vector<int> chunk_labels(nb);
    for (std::size_t i = 0; i < nb; ++i) {
      chunk.row(static_cast<Eigen::Index>(i)) = features.row(rows[begin + i]);
      chunk_labels[i] = labels[static_cast<std::size_t>(rows[begin + i])];
    }
    const Matrix probs = forward(model, chunk, RunMode::eval, nullptr);
    loss_sum += cross_entropy(probs, chunk_labels) * static_cast<double>(nb);
    for (std::size_t i = 0; i < nb; ++i) {
      correct += argmax_row(probs, static_cast<Eigen::Index>(i)) == chunk_labels[i];
    }
  }
  return {loss_sum / static_cast<double>(rows.size()),
          static_cast<double>(correct) / static_cast<double>(rows.size())};
}

}  // namespace

std::pair<ClassifierModel, TrainHistory> train(const LabeledData& data,
                                               std::uint64_t model_init_seed,
                                               const TrainConfig& cfg, const NetworkConfig& net,
                                               SplitIndices* split_out) {
  cfg.validate();
  net.validate();
  const int n = static_cast<int>(data.features.rows());
  if (n < 2) throw ConfigError("train: need at least 2 rows");
  if (static_cast<int>(data.labels.size()) != n) {
    throw ValidationError("train: label count does not match feature rows");
  }
  if (data.num_classes < 2) throw ConfigError("train: num_classes must be >= 2");
  for (const int y : data.labels) {
    if (y < 0 || y >= data.num_classes) {
      throw ValidationError("train: label " + std::to_string(y) + " outside 0.." +
                            std::to_string(data.num_classes - 1));
    }
  }

  TrainHistory history;

  // Seeded validation holdout; those rows never reach a gradient step.
  Rng split_rng(derive_seed(cfg.seed, "val-split"));
  std::vector<int> order = split_rng.permutation(n);
  const int n_val = static_cast<int>(std::llround(cfg.val_fraction * n));
  SplitIndices split;
  split.val_rows.assign(order.begin(), order.begin() + n_val);
  split.train_rows.assign(order.begin() + n_val, order.end());
  std::sort(split.val_rows.begin(), split.val_rows.end());
  std::sort(split.train_rows.begin(), split.train_rows.end());
  if (split.train_rows.empty()) throw ConfigError("train: validation split leaves no rows");

  std::set<int> seen;
  for (const int r : split.train_rows) seen.insert(data.labels[static_cast<std::size_t>(r)]);
  for (int k = 0; k < data.num_classes; ++k) {
    if (!seen.count(k)) {
      history.warnings.push_back("class " + std::to_string(k) +
                                 " has no rows in the training split");
    }
  }
  if (split_out) *split_out = split;

  Rng init_rng(model_init_seed);
  ClassifierModel model =
      ClassifierModel::init(data.features.cols(), data.num_classes, net, init_rng);
  AdamState adam = AdamState::zeros_like(model);
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));

  const int n_train = static_cast<int>(split.train_rows.size());
  const int batch = std::min(cfg.batch_size, n_train);
  std::vector<int> epoch_order = split.train_rows;
  Matrix batch_features;
  std::vector<int> batch_labels;
  ForwardCache cache;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle_each_epoch) shuffle_rng.shuffle(epoch_order.begin(), epoch_order.end());
    double loss_sum = 0.0;
    long correct = 0;

    for (int begin = 0; begin < n_train; begin += batch) {
      const int nb = std::min(batch, n_train - begin);
      batch_features.resize(nb, data.features.cols());
      batch_labels.resize(static_cast<std::size_t>(nb));
      for (int i = 0; i < nb; ++i) {
        const int r = epoch_order[static_cast<std::size_t>(begin + i)];
        batch_features.row(i) = data.features.row(r);
        batch_labels[static_cast<std::size_t>(i)] = data.labels[static_cast<std::size_t>(r)];
      }
      const Matrix probs = forward(model, batch_features, RunMode::train, &dropout_rng, &cache);
      loss_sum += cross_entropy(probs, batch_labels) * nb;
      for (int i = 0; i < nb; ++i) {
        correct += argmax_row(probs, i) == batch_labels[static_cast<std::size_t>(i)];
      }
      const ModelGrads grads = backward(model, cache, batch_labels);
      try {
        adam_step(model, grads, adam, cfg);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(begin / batch));
      }
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(n_train);
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(n_train);
    std::tie(stats.val_loss, stats.val_accuracy) =
        evaluate_rows(model, data.features, data.labels, split.val_rows);
    history.epochs.push_back(stats);
  }
  return {std::move(model), std::move(history)};
}

std::vector<int> predict(const ClassifierModel& model, const Matrix& features) {
  std::vector<int> out(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index begin = 0; begin < features.rows(); begin += kEvalChunk) {
    const Eigen::Index nb = std::min(kEvalChunk, features.rows() - begin);
    const Matrix probs = forward(model, features.middleRows(begin, nb), RunMode::eval, nullptr);
    for (Eigen::Index i = 0; i < nb; ++i) {
      out[static_cast<std::size_t>(begin + i)] = argmax_row(probs, i);
    }
  }
  return out;
}

double evaluate_accuracy(const ClassifierModel& model, const Matrix& features,
                         std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw ValidationError("evaluate_accuracy: label count does not match rows");
  }
  if (features.rows() == 0) throw ValidationError("evaluate_accuracy: empty test set");
  const std::vector<int> pred = predict(model, features);
  long correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

std::map<int, double> per_activity_subject_accuracy(const ClassifierModel& model,
                                                    const Matrix& features,
                                                    const std::vector<int>& subject_labels,
                                                    const std::vector<int>& activity_labels,
                                                    std::vector<std::string>* warnings) {
  if (features.rows() != static_cast<Eigen::Index>(subject_labels.size()) ||
      features.rows() != static_cast<Eigen::Index>(activity_labels.size())) {
    throw ValidationError("per_activity_subject_accuracy: label counts do not match rows");
  }
  const std::vector<int> pred = predict(model, features);
  std::map<int, std::pair<long, long>> counts;  // activity -> (correct, total)
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto& [good, total] = counts[activity_labels[i]];
    good += pred[i] == subject_labels[i];
    total += 1;
  }
  std::map<int, double> out;
  for (const auto& [activity, ct] : counts) {
    out[activity] = static_cast<double>(ct.first) / static_cast<double>(ct.second);
  }
  if (warnings) {
    for (int a = 1; a <= kNumActivities; ++a) {
      if (!counts.count(a)) {
        warnings->push_back("activity " + std::to_string(a) + " has no test rows; omitted");
      }
    }
  }
  return out;
}

}  // namespace har
