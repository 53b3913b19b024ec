#include <benchmark/benchmark.h>

#include "amodal/harness.hpp"
#include "amodal/rng.hpp"

using namespace amodal;

namespace {

void BM_SceneGeneration(benchmark::State& state) {
  const auto sc = uniform_scene_config({ShapeKind::kTriangle, ShapeKind::kRectangle, ShapeKind::kCircle},
                                       static_cast<int>(state.range(0)), 1);
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(make_sample(sc, i++));
}
BENCHMARK(BM_SceneGeneration)->Arg(6)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_ConvForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Conv2d<float> conv({c, c, 3, 1, 1});
  Rng rng(2);
  for (auto& w : conv.weight()) w = static_cast<float>(rng.uniform(-0.1, 0.1));
  Tensor<float> x(c, 64, 64);
  for (auto& v : x.data) v = static_cast<float>(rng.uniform());
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x));
}
BENCHMARK(BM_ConvForward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_PredictorForward(benchmark::State& state) {
  const auto spec = default_experiment_spec(ExperimentKind::kTrainEval);
  Predictor p(net_config_for(spec, spec.scene, spec.net.embed_dim));
  p.initialize(1);
  const auto s = make_sample(spec.scene, 0);
  for (auto _ : state) benchmark::DoNotOptimize(p.forward(s.rendered.image));
}
BENCHMARK(BM_PredictorForward)->Unit(benchmark::kMillisecond);

void BM_OracleClustering(benchmark::State& state) {
  const auto sc = uniform_scene_config({ShapeKind::kTriangle, ShapeKind::kRectangle, ShapeKind::kCircle},
                                       static_cast<int>(state.range(0)), 3);
  const auto s = make_sample(sc, 0, {.render_image = false});
  OracleConfig oc;
  oc.sigma = 0.3;
  const auto h = oracle_predict(s, oc);
  for (auto _ : state) benchmark::DoNotOptimize(detect_instances(h, ClusterConfig{}));
}
BENCHMARK(BM_OracleClustering)->Arg(6)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  const auto sc = uniform_scene_config({ShapeKind::kTriangle, ShapeKind::kRectangle, ShapeKind::kCircle}, 6, 4);
  std::vector<SampleEval> evals;
  for (int i = 0; i < state.range(0); ++i) evals.push_back(gt_layer_sample_eval(make_sample(sc, i, {.render_image = false}), 2));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(evals, EvalConfig{}));
}
BENCHMARK(BM_Evaluate)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
