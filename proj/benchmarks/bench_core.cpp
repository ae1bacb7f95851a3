#include <benchmark/benchmark.h>

#include "dasad/data.hpp"
#include "dasad/evaluation.hpp"
#include "dasad/losses.hpp"
#include "dasad/training.hpp"

using namespace dasad;

namespace {

StratifiedBatch mnist_like_batch(Eigen::Index per_stratum) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  StratifiedBatch b;
  for (Stratum s : {Stratum::NS, Stratum::AS, Stratum::NT}) {
    b[s] = Eigen::MatrixXd::NullaryExpr(784, per_stratum, [&] { return u(rng); });
  }
  b[Stratum::AT] = Eigen::MatrixXd(784, 0);
  return b;
}

void BM_ObjectiveStep(benchmark::State& state) {
  const auto variant = static_cast<Variant>(state.range(0));
  const TrainConfig cfg = TrainConfig::defaults(variant);
  const StratifiedBatch batch = mnist_like_batch(cfg.batch_size);
  Model model = Model::init(cfg.architecture(784), 0, cfg.prior_kappa);
  const LatentPriors priors = priors_for(cfg);
  const ClassPriors cp(0.5, 0.5);
  const ObjectiveOptions opts = cfg.objective_options();
  Model grad = model.zeros_like();
  AdamState adam;
  Rng rng(2);
  for (auto _ : state) {
    NoiseBank noise(&rng);
    const LossBreakdown lb = evaluate_objective(batch, model, priors, cp, opts, noise, &grad);
    adam_step(model, grad, adam, 1e-4);
    benchmark::DoNotOptimize(lb.total);
  }
  state.SetLabel(std::string(variant_id(variant)));
}
BENCHMARK(BM_ObjectiveStep)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);

void BM_VmfKl(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const VmfDist q(UnitVector::basis(m, 0), 37.0);
  const VmfDist p(UnitVector::basis(m, 1), 10.0);
  for (auto _ : state) benchmark::DoNotOptimize(vmf_kl(q, p));
}
BENCHMARK(BM_VmfKl)->Arg(3)->Arg(10)->Arg(100);

void BM_VmfLogNormConst(benchmark::State& state) {
  const double k = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(vmf_log_norm_const(10, k));
}
BENCHMARK(BM_VmfLogNormConst)->Arg(1)->Arg(50)->Arg(1000);

void BM_VmfSampleCosine(benchmark::State& state) {
  Rng rng(3);
  const double k = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(vmf_sample_cosine(10, k, rng));
}
BENCHMARK(BM_VmfSampleCosine)->Arg(1)->Arg(10)->Arg(1000);

void BM_Auc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(n);
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = u(rng);
    y[i] = i % 3 == 0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc(s, y));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Auc)->RangeMultiplier(10)->Range(100, 100000)->Complexity(benchmark::oNLogN);

void BM_Rotate(benchmark::State& state) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Eigen::MatrixXd img = Eigen::MatrixXd::NullaryExpr(28, 28, [&] { return u(rng); });
  for (auto _ : state) benchmark::DoNotOptimize(rotate_image(img, 45.0));
}
BENCHMARK(BM_Rotate);

}  // namespace

BENCHMARK_MAIN();
