#include "har/network.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace har {

namespace {

inline Matrix sigmoid(const Matrix& z) {
  return ((-z.array()).exp() + 1.0).inverse().matrix();
}

void require_finite(const Matrix& m, const char* layer) {
  if (!m.allFinite()) {
    throw NumericError(std::string(layer) + " produced non-finite values");
  }
}

void fill_uniform(Matrix& m, double s, Rng& rng) {
  double* p = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = rng.uniform(-s, s);
}

}  // namespace

LstmParams LstmParams::zeros(Eigen::Index h, Eigen::Index d) {
  LstmParams p;
  p.w_f = p.w_i = p.w_o = p.w_c = Matrix::Zero(h, d);
  p.u_f = p.u_i = p.u_o = p.u_c = Matrix::Zero(h, h);
  p.b_f = p.b_i = p.b_o = p.b_c = Vector::Zero(h);
  return p;
}

void LstmParams::require_consistent() const {
  const Eigen::Index h = w_f.rows();
  const Eigen::Index d = w_f.cols();
  auto bad = [&](bool cond) {
    if (cond) throw ValidationError("lstm parameter shapes are inconsistent");
  };
  for (const Matrix* m : {&w_i, &w_o, &w_c}) bad(m->rows() != h || m->cols() != d);
  for (const Matrix* m : {&u_f, &u_i, &u_o, &u_c}) bad(m->rows() != h || m->cols() != h);
  for (const Vector* v : {&b_f, &b_i, &b_o, &b_c}) bad(v->size() != h);
}

DenseParams DenseParams::zeros(Eigen::Index out, Eigen::Index in) {
  return {Matrix::Zero(out, in), Vector::Zero(out)};
}

void NetworkConfig::validate() const {
  if (hidden < 1 || dense < 1) throw ConfigError("network layer sizes must be >= 1");
  if (!(dropout_p >= 0.0) || dropout_p >= 1.0) {
    throw ConfigError("dropout_p must lie in [0, 1)");
  }
  if (timesteps < 1) throw ConfigError("timesteps must be >= 1");
}

ClassifierModel ClassifierModel::init(Eigen::Index input_width, int num_classes,
                                      const NetworkConfig& cfg, Rng& rng) {
  cfg.validate();
  if (num_classes < 2) throw ConfigError("need at least 2 classes");
  if (input_width < 1 || input_width % cfg.timesteps != 0) {
    throw ConfigError("input width " + std::to_string(input_width) +
                      " is not divisible into " + std::to_string(cfg.timesteps) + " timesteps");
  }
  const Eigen::Index d = input_width / cfg.timesteps;
  const Eigen::Index h = cfg.hidden;

  ClassifierModel m;
  m.dropout_p = cfg.dropout_p;
  m.num_classes = num_classes;
  m.timesteps = cfg.timesteps;
  m.lstm = LstmParams::zeros(h, d);
  const double sw = 1.0 / std::sqrt(static_cast<double>(d));
  const double su = 1.0 / std::sqrt(static_cast<double>(h));
  for (Matrix* w : {&m.lstm.w_f, &m.lstm.w_i, &m.lstm.w_o, &m.lstm.w_c}) fill_uniform(*w, sw, rng);
  for (Matrix* u : {&m.lstm.u_f, &m.lstm.u_i, &m.lstm.u_o, &m.lstm.u_c}) fill_uniform(*u, su, rng);
  m.lstm.b_f.setConstant(1.0);  // open forget gates at the start

  m.dense1 = DenseParams::zeros(cfg.dense, h);
  fill_uniform(m.dense1.w, su, rng);
  m.dense2 = DenseParams::zeros(num_classes, cfg.dense);
  fill_uniform(m.dense2.w, 1.0 / std::sqrt(static_cast<double>(cfg.dense)), rng);
  return m;
}

std::pair<Matrix, Matrix> lstm_cell_forward(const Matrix& x_t, const Matrix& h_prev,
                                            const Matrix& c_prev, const LstmParams& params,
                                            LstmStepCache* cache) {
  params.require_consistent();
  const Eigen::Index h = params.hidden();
  const Eigen::Index b = x_t.cols();
  if (x_t.rows() != params.input() || h_prev.rows() != h || c_prev.rows() != h ||
      h_prev.cols() != b || c_prev.cols() != b) {
    throw ValidationError("lstm_cell_forward: input/state shapes disagree with parameters");
  }

  const Matrix f = sigmoid((params.w_f * x_t + params.u_f * h_prev).colwise() + params.b_f);
  const Matrix i = sigmoid((params.w_i * x_t + params.u_i * h_prev).colwise() + params.b_i);
  const Matrix o = sigmoid((params.w_o * x_t + params.u_o * h_prev).colwise() + params.b_o);
  const Matrix c_bar =
      ((params.w_c * x_t + params.u_c * h_prev).colwise() + params.b_c).array().tanh();
  Matrix c = f.cwiseProduct(c_prev) + i.cwiseProduct(c_bar);
  Matrix tanh_c = c.array().tanh();
  Matrix h_t = o.cwiseProduct(tanh_c);

  if (cache) {
    cache->x = x_t;
    cache->h_prev = h_prev;
    cache->c_prev = c_prev;
    cache->f = f;
    cache->i = i;
    cache->o = o;
    cache->c_bar = c_bar;
    cache->c = c;
    cache->tanh_c = std::move(tanh_c);
  }
  return {std::move(h_t), std::move(c)};
}

Matrix forward(const ClassifierModel& model, const Matrix& batch, RunMode mode, Rng* rng,
               ForwardCache* cache) {
  const Eigen::Index b = batch.rows();
  if (batch.cols() != model.input_width()) {
    throw ValidationError("forward: batch width " + std::to_string(batch.cols()) +
                          " does not match model input width " +
                          std::to_string(model.input_width()));
  }
  if (b == 0) throw ValidationError("forward: empty batch");
  const Eigen::Index d = model.lstm.input();
  const Eigen::Index h = model.lstm.hidden();

  Matrix h_t = Matrix::Zero(h, b);
  Matrix c_t = Matrix::Zero(h, b);
  if (cache) cache->steps.resize(static_cast<std::size_t>(model.timesteps));
  for (int t = 0; t < model.timesteps; ++t) {
    const Matrix x_t = batch.middleCols(static_cast<Eigen::Index>(t) * d, d).transpose();
    LstmStepCache* step = cache ? &cache->steps[static_cast<std::size_t>(t)] : nullptr;
    std::tie(h_t, c_t) = lstm_cell_forward(x_t, h_t, c_t, model.lstm, step);
  }
  require_finite(h_t, "lstm");

  Matrix h_dropped;
  Matrix mask;
  if (mode == RunMode::train && model.dropout_p > 0.0) {
    if (!rng) throw ConfigError("forward: train mode with dropout needs an rng");
    const double keep = 1.0 - model.dropout_p;
    mask.resize(h, b);
    for (Eigen::Index col = 0; col < b; ++col) {
      for (Eigen::Index row = 0; row < h; ++row) {
        mask(row, col) = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
      }
    }
    h_dropped = h_t.cwiseProduct(mask);
  } else {
    h_dropped = h_t;
  }

  Matrix z1 = (model.dense1.w * h_dropped).colwise() + model.dense1.b;
  require_finite(z1, "dense1");
  Matrix a1 = z1.cwiseMax(0.0);

  Matrix logits = (model.dense2.w * a1).colwise() + model.dense2.b;
  require_finite(logits, "dense2");
  // Max-subtracted softmax per column.
  Matrix probs(logits.rows(), logits.cols());
  for (Eigen::Index col = 0; col < b; ++col) {
    const double m = logits.col(col).maxCoeff();
    Eigen::ArrayXd e = (logits.col(col).array() - m).exp();
    probs.col(col) = e / e.sum();
  }
  require_finite(probs, "softmax");

  if (cache) {
    cache->h_last = std::move(h_t);
    cache->dropout_mask = std::move(mask);
    cache->h_dropped = std::move(h_dropped);
    cache->z1 = std::move(z1);
    cache->a1 = std::move(a1);
    cache->probs = probs;
  }
  return probs.transpose();
}

double cross_entropy(const Matrix& probabilities, std::span<const int> labels) {
  const Eigen::Index n = probabilities.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw ValidationError("cross_entropy: label count does not match batch size");
  }
  double loss = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= probabilities.cols()) {
      throw ValidationError("cross_entropy: label " + std::to_string(y) + " out of range");
    }
    loss -= std::log(std::max(probabilities(r, y), 1e-12));
  }
  return loss / static_cast<double>(n);
}

ModelGrads ModelGrads::zeros_like(const ClassifierModel& model) {
  ModelGrads g;
  g.lstm = LstmParams::zeros(model.lstm.hidden(), model.lstm.input());
  g.dense1 = DenseParams::zeros(model.dense1.w.rows(), model.dense1.w.cols());
  g.dense2 = DenseParams::zeros(model.dense2.w.rows(), model.dense2.w.cols());
  return g;
}

bool ModelGrads::all_finite() const {
  for (const Matrix* m : {&lstm.w_f, &lstm.w_i, &lstm.w_o, &lstm.w_c, &lstm.u_f, &lstm.u_i,
                          &lstm.u_o, &lstm.u_c, &dense1.w, &dense2.w}) {
    if (!m->allFinite()) return false;
  }
  for (const Vector* v : {&lstm.b_f, &lstm.b_i, &lstm.b_o, &lstm.b_c, &dense1.b, &dense2.b}) {
    if (!v->allFinite()) return false;
  }
  return true;
}

ModelGrads backward(const ClassifierModel& model, const ForwardCache& cache,
                    std::span<const int> labels) {
  if (cache.steps.empty() || cache.probs.size() == 0) {
    throw ValidationError("backward: cache is missing a train-mode forward pass");
  }
  const Eigen::Index b = cache.probs.cols();
  if (static_cast<Eigen::Index>(labels.size()) != b) {
    throw ValidationError("backward: label count does not match cached batch");
  }

  ModelGrads g = ModelGrads::zeros_like(model);

  // d(mean loss)/d(logits) = (probs - onehot)/B, one sample per column.
  Matrix dlogits = cache.probs;
  for (Eigen::Index col = 0; col < b; ++col) {
    dlogits(labels[static_cast<std::size_t>(col)], col) -= 1.0;
  }
  dlogits /= static_cast<double>(b);

  g.dense2.w.noalias() = dlogits * cache.a1.transpose();
  g.dense2.b = dlogits.rowwise().sum();
  Matrix da1 = model.dense2.w.transpose() * dlogits;

  Matrix dz1 = (cache.z1.array() > 0.0).select(da1, 0.0);
  g.dense1.w.noalias() = dz1 * cache.h_dropped.transpose();
  g.dense1.b = dz1.rowwise().sum();
  Matrix dh = model.dense1.w.transpose() * dz1;

  if (cache.dropout_mask.size() > 0) dh = dh.cwiseProduct(cache.dropout_mask);

  Matrix dc = Matrix::Zero(dh.rows(), dh.cols());
  for (auto t = static_cast<std::ptrdiff_t>(cache.steps.size()) - 1; t >= 0; --t) {
    const LstmStepCache& s = cache.steps[static_cast<std::size_t>(t)];

    const Matrix do_gate = dh.cwiseProduct(s.tanh_c);
    dc += dh.cwiseProduct(s.o).cwiseProduct(
        (1.0 - s.tanh_c.array().square()).matrix());

    const Matrix df = dc.cwiseProduct(s.c_prev);
    const Matrix di = dc.cwiseProduct(s.c_bar);
    const Matrix dc_bar = dc.cwiseProduct(s.i);
    const Matrix dc_prev = dc.cwiseProduct(s.f);

    const Matrix dzf = df.cwiseProduct(s.f).cwiseProduct((1.0 - s.f.array()).matrix());
    const Matrix dzi = di.cwiseProduct(s.i).cwiseProduct((1.0 - s.i.array()).matrix());
    const Matrix dzo = do_gate.cwiseProduct(s.o).cwiseProduct((1.0 - s.o.array()).matrix());
    const Matrix dzc = dc_bar.cwiseProduct((1.0 - s.c_bar.array().square()).matrix());

    g.lstm.w_f.noalias() += dzf * s.x.transpose();
    g.lstm.w_i.noalias() += dzi * s.x.transpose();
    g.lstm.w_o.noalias() += dzo * s.x.transpose();
    g.lstm.w_c.noalias() += dzc * s.x.transpose();
    g.lstm.u_f.noalias() += dzf * s.h_prev.transpose();
    g.lstm.u_i.noalias() += dzi * s.h_prev.transpose();
    g.lstm.u_o.noalias() += dzo * s.h_prev.transpose();
    g.lstm.u_c.noalias() += dzc * s.h_prev.transpose();
    g.lstm.b_f += dzf.rowwise().sum();
    g.lstm.b_i += dzi.rowwise().sum();
    g.lstm.b_o += dzo.rowwise().sum();
    g.lstm.b_c += dzc.rowwise().sum();

    dh = model.lstm.u_f.transpose() * dzf + model.lstm.u_i.transpose() * dzi +
         model.lstm.u_o.transpose() * dzo + model.lstm.u_c.transpose() * dzc;
    dc = dc_prev;
  }
  return g;
}

namespace {

using nlohmann::json;

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Matrix matrix_from(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

Vector vector_from(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace

std::string model_to_json_text(const ClassifierModel& model) {
  json tensors = {
      {"w_f", matrix_json(model.lstm.w_f)}, {"w_i", matrix_json(model.lstm.w_i)},
      {"w_o", matrix_json(model.lstm.w_o)}, {"w_c", matrix_json(model.lstm.w_c)},
      {"u_f", matrix_json(model.lstm.u_f)}, {"u_i", matrix_json(model.lstm.u_i)},
      {"u_o", matrix_json(model.lstm.u_o)}, {"u_c", matrix_json(model.lstm.u_c)},
      {"b_f", vector_json(model.lstm.b_f)}, {"b_i", vector_json(model.lstm.b_i)},
      {"b_o", vector_json(model.lstm.b_o)}, {"b_c", vector_json(model.lstm.b_c)},
      {"dense1_w", matrix_json(model.dense1.w)}, {"dense1_b", vector_json(model.dense1.b)},
      {"dense2_w", matrix_json(model.dense2.w)}, {"dense2_b", vector_json(model.dense2.b)},
  };
  json j = {{"format", "har-classifier"},
            {"version", 1},
            {"hyper",
             {{"num_classes", model.num_classes},
              {"timesteps", model.timesteps},
              {"dropout_p", model.dropout_p},
              {"hidden", model.lstm.hidden()},
              {"input", model.lstm.input()},
              {"dense", model.dense1.w.rows()}}},
            {"tensors", std::move(tensors)}};
  return j.dump();
}

ClassifierModel model_from_json_text(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "har-classifier" || j.value("version", 0) != 1) {
      throw ParseError("model checkpoint: unknown format/version");
    }
    const json& t = j.at("tensors");
    ClassifierModel m;
    m.num_classes = j.at("hyper").at("num_classes").get<int>();
    m.timesteps = j.at("hyper").at("timesteps").get<int>();
    m.dropout_p = j.at("hyper").at("dropout_p").get<double>();
    m.lstm.w_f = matrix_from(t.at("w_f"));
    m.lstm.w_i = matrix_from(t.at("w_i"));
    m.lstm.w_o = matrix_from(t.at("w_o"));
    m.lstm.w_c = matrix_from(t.at("w_c"));
    m.lstm.u_f = matrix_from(t.at("u_f"));
    m.lstm.u_i = matrix_from(t.at("u_i"));
    m.lstm.u_o = matrix_from(t.at("u_o"));
    m.lstm.u_c = matrix_from(t.at("u_c"));
    m.lstm.b_f = vector_from(t.at("b_f"));
    m.lstm.b_i = vector_from(t.at("b_i"));
    m.lstm.b_o = vector_from(t.at("b_o"));
    m.lstm.b_c = vector_from(t.at("b_c"));
    m.dense1.w = matrix_from(t.at("dense1_w"));
    m.dense1.b = vector_from(t.at("dense1_b"));
    m.dense2.w = matrix_from(t.at("dense2_w"));
    m.dense2.b = vector_from(t.at("dense2_b"));
    m.lstm.require_consistent();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model checkpoint: ") + e.what());
  }
}

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  out << model_to_json_text(model);
  if (!out) throw LoadError("short write on " + path.string());
}

ClassifierModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return model_from_json_text(text);
}

}  // namespace har
