// Microbenchmarks for the hot paths: tape matmul forward/backward, the two
// graph-match layer variants, relation distributions, one training epoch and
// batched prediction.

#include <benchmark/benchmark.h>

#include <random>

#include "vsgmn/eval.hpp"
#include "vsgmn/gmn.hpp"
#include "vsgmn/tape.hpp"
#include "vsgmn/train.hpp"

using namespace vsgmn;

namespace {

Tensor random_tensor(std::mt19937_64& gen, std::vector<std::size_t> shape) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Tensor t(shape);
  for (double& x : t.data()) x = unit(gen);
  return t;
}

Tensor random_adjacency(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  Tensor a({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = unit(gen);
  }
  return a;
}

ZslDataset bench_dataset() {
  SyntheticConfig cfg;
  cfg.seen_classes = 15;
  cfg.unseen_classes = 5;
  cfg.attribute_dim = 12;
  cfg.feature_dim = 32;
  cfg.samples_per_class = 30;
  cfg.seed = 7;
  return generate_synthetic_dataset(cfg);
}

void BM_MatmulForward(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 gen(1);
  const Tensor a = random_tensor(gen, {n, n});
  const Tensor b = random_tensor(gen, {n, n});
  for (auto _ : state) {
    Tape tape;
    Var c = matmul(tape.leaf(a), tape.leaf(b));
    benchmark::DoNotOptimize(c.value());
  }
}
BENCHMARK(BM_MatmulForward)->Arg(32)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 gen(1);
  const Tensor a = random_tensor(gen, {n, n});
  const Tensor b = random_tensor(gen, {n, n});
  for (auto _ : state) {
    Tape tape;
    Var va = tape.leaf(a);
    Var loss = sum(matmul(va, tape.leaf(b)));
    GradientMap grads = tape.backward(loss);
    benchmark::DoNotOptimize(grads.at(va.id()));
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64);

void run_layer(benchmark::State& state, LayerVariant variant) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const std::size_t k = 12;
  std::mt19937_64 gen(2);
  const Tensor hv = random_tensor(gen, {n, k});
  const Tensor hs = random_tensor(gen, {n, k});
  const Tensor av = random_adjacency(gen, n);
  const Tensor as = random_adjacency(gen, n);
  GraphMatchLayer layer =
      variant == LayerVariant::attention
          ? GraphMatchLayer::attention_layer_params(k, 10.0, 1.0, "l0", gen)
          : GraphMatchLayer::propagation_layer_params(k, "l0", gen);
  for (auto _ : state) {
    Tape tape;
    BoundParams bound;
    NodePair nodes{tape.leaf(hv), tape.leaf(hs)};
    NodePair out = apply_layer(tape, layer, nodes, tape.leaf(av),
                               tape.leaf(as), true, bound);
    benchmark::DoNotOptimize(out.visual.value());
  }
}

void BM_AttentionLayer(benchmark::State& state) {
  run_layer(state, LayerVariant::attention);
}
BENCHMARK(BM_AttentionLayer)->Arg(20)->Arg(55);

void BM_PropagationLayer(benchmark::State& state) {
  run_layer(state, LayerVariant::propagation);
}
BENCHMARK(BM_PropagationLayer)->Arg(20)->Arg(55);

void BM_RelationDistributions(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 gen(3);
  const Tensor hv = random_tensor(gen, {n, 12});
  const Tensor hs = random_tensor(gen, {n, 12});
  for (auto _ : state) {
    Tape tape;
    DistributionPair d =
        relation_distributions(tape, {tape.leaf(hv), tape.leaf(hs)});
    benchmark::DoNotOptimize(d.visual.value());
  }
}
BENCHMARK(BM_RelationDistributions)->Arg(20)->Arg(55);

void BM_TrainEpoch(benchmark::State& state) {
  const ZslDataset ds = bench_dataset();
  TrainConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) {
    VsgmnModel model = train_model(ds, cfg, nullptr);
    benchmark::DoNotOptimize(model.trained);
  }
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  const ZslDataset ds = bench_dataset();
  TrainConfig cfg;
  cfg.epochs = 2;
  const VsgmnModel model = train_model(ds, cfg, nullptr);
  Tensor rows({ds.test_instances.size(), ds.feature_dim()});
  for (std::size_t r = 0; r < ds.test_instances.size(); ++r)
    for (std::size_t c = 0; c < ds.feature_dim(); ++c)
      rows(r, c) = ds.features(ds.test_instances[r], c);
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict(model, rows, EvalMode::gzsl, 1.0));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(rows.rows()));
}
BENCHMARK(BM_Predict)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
