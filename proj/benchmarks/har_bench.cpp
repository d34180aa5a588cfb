// Microbenchmarks for the hot paths: LSTM forward/backward, KNN imputation,
// PCA fitting and outage planning. Synthetic data sized like the real
// pipeline (561 features, batch 64, hidden 128).

#include <benchmark/benchmark.h>

#include <har/dataset.hpp>
#include <har/imputation.hpp>
#include <har/masking.hpp>
#include <har/network.hpp>
#include <har/pca.hpp>
#include <har/rng.hpp>
#include <har/training.hpp>

namespace {

using namespace har;

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

std::vector<int> random_labels(Eigen::Index n, int classes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (auto& y : out) y = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return out;
}

HarDataset synthetic_dataset(int subjects, int activities, int rows_each, int cols) {
  HarDataset d;
  const Eigen::Index rows = static_cast<Eigen::Index>(subjects) * activities * rows_each;
  d.features = random_matrix(rows, cols, 7);
  for (int s = 1; s <= subjects; ++s) {
    for (int a = 1; a <= activities; ++a) {
      for (int i = 0; i < rows_each; ++i) {
        d.subject_ids.push_back(s);
        d.activity_labels.push_back(a);
      }
    }
  }
  for (int c = 0; c < cols; ++c) {
    d.feature_names.push_back((c % 2 == 0 ? "tAcc-" : "tGyro-") + std::to_string(c));
  }
  return d;
}

ClassifierModel paper_model(Eigen::Index width, int classes) {
  NetworkConfig cfg;  // hidden 128, dense 64, dropout 0.2, 1 timestep
  Rng rng(11);
  return ClassifierModel::init(width, classes, cfg, rng);
}

void BM_LstmForwardEval(benchmark::State& state) {
  const auto batch = random_matrix(state.range(0), 561, 3);
  const ClassifierModel model = paper_model(561, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(model, batch, RunMode::eval, nullptr));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LstmForwardEval)->Arg(64)->Arg(1024);

void BM_LstmTrainStep(benchmark::State& state) {
  const Eigen::Index b = state.range(0);
  const auto batch = random_matrix(b, 561, 3);
  const auto labels = random_labels(b, 6, 4);
  ClassifierModel model = paper_model(561, 6);
  AdamState adam = AdamState::zeros_like(model);
  TrainConfig tc;
  Rng dropout_rng(5);
  ForwardCache cache;
  for (auto _ : state) {
    forward(model, batch, RunMode::train, &dropout_rng, &cache);
    const ModelGrads grads = backward(model, cache, labels);
    adam_step(model, grads, adam, tc);
  }
  state.SetItemsProcessed(state.iterations() * b);
}
BENCHMARK(BM_LstmTrainStep)->Arg(64);

void BM_KnnImpute(benchmark::State& state) {
  const Eigen::Index pool_rows = state.range(0);
  HarDataset pool_data;
  pool_data.features = random_matrix(pool_rows, 561, 8);
  pool_data.subject_ids.assign(static_cast<std::size_t>(pool_rows), 1);
  pool_data.activity_labels.assign(static_cast<std::size_t>(pool_rows), 1);
  for (int c = 0; c < 561; ++c) pool_data.feature_names.push_back("f" + std::to_string(c));

  MaskedDataset target = MaskedDataset::clean(pool_data);
  Rng rng(9);
  for (Eigen::Index r = 0; r < target.missing.rows(); ++r) {
    if (rng.uniform() < 0.15) {
      for (int c = 0; c < 200; ++c) target.missing(r, c) = true;
    }
  }
  const ImputerModel model = fit_knn(MaskedDataset::clean(pool_data), 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(impute(model, target));
  }
  state.SetItemsProcessed(state.iterations() * pool_rows);
}
BENCHMARK(BM_KnnImpute)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

void BM_PcaFit(benchmark::State& state) {
  const auto x = random_matrix(state.range(0), 561, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_pca(x, 175));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PcaFit)->Arg(2048)->Unit(benchmark::kMillisecond);

void BM_PlanOutages(benchmark::State& state) {
  const HarDataset d = synthetic_dataset(30, 6, static_cast<int>(state.range(0)), 8);
  const OutageScenario sc = OutageScenario::builtin("S1");
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(plan_outages(sc, d, WindowTiming{}, ++seed));
  }
  state.SetItemsProcessed(state.iterations() * d.rows());
}
BENCHMARK(BM_PlanOutages)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_NanDistance(benchmark::State& state) {
  const Matrix a = random_matrix(2, 561, 12);
  Eigen::Array<bool, 1, Eigen::Dynamic> am(561), bm(561);
  Rng rng(13);
  for (int c = 0; c < 561; ++c) {
    am(c) = rng.uniform() < 0.2;
    bm(c) = rng.uniform() < 0.2;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(nan_distance(a.row(0), am, a.row(1), bm));
  }
}
BENCHMARK(BM_NanDistance);

}  // namespace

BENCHMARK_MAIN();
