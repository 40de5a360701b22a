// SPDX-License-Identifier: Apache-2.0
#include "xmodal/encoder.hpp"
#include "xmodal/kernels.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/mmd.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace xmodal;

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// P identities x K samples per modality, rows grouped per identity.
FeatureSet batch(int p, int k, int dim, Rng& rng) {
  FeatureSet b;
  b.features = gaussian(2 * p * k, dim, rng);
  b.identity_count = p;
  for (int id = 0; id < p; ++id)
    for (auto m : {Modality::Visible, Modality::Thermal})
      for (int s = 0; s < k; ++s) {
        b.identities.push_back(id);
        b.modalities.push_back(m);
      }
  return b;
}

void BM_Gram(benchmark::State& state) {
  Rng rng(1);
  const auto n = state.range(0);
  const Matrix a = gaussian(n, 64, rng);
  const KernelSpec spec = KernelSpec::median_heuristic();
  for (auto _ : state) benchmark::DoNotOptimize(gram(a, a, spec));
  state.SetComplexityN(n);
}
BENCHMARK(BM_Gram)->RangeMultiplier(2)->Range(8, 128)->Complexity();

void BM_MarginMmdId(benchmark::State& state) {
  Rng rng(2);
  const FeatureSet b = batch(static_cast<int>(state.range(0)), 4, 64, rng);
  const KernelSpec spec = KernelSpec::median_heuristic();
  for (auto _ : state) benchmark::DoNotOptimize(loss_margin_mmd_id(b, spec, MarginConfig{}));
}
BENCHMARK(BM_MarginMmdId)->Arg(4)->Arg(8)->Arg(16);

void BM_HcTri(benchmark::State& state) {
  Rng rng(3);
  const FeatureSet b = batch(static_cast<int>(state.range(0)), 4, 64, rng);
  for (auto _ : state) benchmark::DoNotOptimize(loss_hc_tri(b, HcTriConfig{}));
}
BENCHMARK(BM_HcTri)->Arg(4)->Arg(8)->Arg(16);

void BM_ForwardBackward(benchmark::State& state) {
  Rng rng(4);
  EncoderShape shape;
  shape.num_classes = 40;
  const EncoderParams params = init_encoder(shape, rng);
  FeatureSet b = batch(4, 4, 4 * shape.input_dim, rng);
  b.descriptor_count = 4;
  b.identity_count = 40;
  const LossConfig cfg;
  for (auto _ : state) {
    const ForwardResult fr = forward(params, b, BatchNormMode::Train);
    const LossBundle l = loss_total(b.with_features(fr.pooled), fr.logits, b.identities, cfg);
    benchmark::DoNotOptimize(backward(params, fr.tape, l.grad_features, l.grad_logits));
  }
}
BENCHMARK(BM_ForwardBackward);

}  // namespace

BENCHMARK_MAIN();
