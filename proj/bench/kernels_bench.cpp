// Serial reference vs OpenMP kernels on a 64^3 grid (the phantom grid).
// Run with OMP_NUM_THREADS set to compare thread counts.

#include <benchmark/benchmark.h>

#include <vector>

#include "vqa/kernels.hpp"
#include "vqa/rng.hpp"

namespace k = vqa::kernels;

namespace {

constexpr k::Grid kGrid{64, 64, 64};

struct Data {
  std::vector<float> a, b, out;
  std::vector<std::uint8_t> ma, mb;
  std::array<std::vector<float>, 3> ga, gb, u, upd;

  Data() : a(kGrid.size()), b(kGrid.size()), out(kGrid.size()), ma(kGrid.size()), mb(kGrid.size()) {
    vqa::Rng rng(1);
    for (std::size_t i = 0; i < kGrid.size(); ++i) {
      a[i] = float(rng.uniform());
      b[i] = float(rng.uniform());
      ma[i] = rng.uniform() < 0.3;
      mb[i] = rng.uniform() < 0.3;
    }
    for (int c = 0; c < 3; ++c) {
      ga[c].resize(kGrid.size());
      gb[c].resize(kGrid.size());
      upd[c].resize(kGrid.size());
      u[c].assign(kGrid.size(), 0.0f);
      for (auto& x : u[c]) x = float(rng.uniform(-2, 2));
    }
    k::serial::gradient(a, kGrid, {ga[0].data(), ga[1].data(), ga[2].data()});
    k::serial::gradient(b, kGrid, {gb[0].data(), gb[1].data(), gb[2].data()});
  }
  k::ConstField3 cga() const { return {ga[0].data(), ga[1].data(), ga[2].data()}; }
  k::ConstField3 cgb() const { return {gb[0].data(), gb[1].data(), gb[2].data()}; }
};

const Data& data() {
  static const Data d;
  return d;
}

template <bool Omp>
void BM_GaussianSmooth(benchmark::State& st) {
  const Data& d = data();
  std::vector<float> out(kGrid.size());
  for (auto _ : st) {
    if constexpr (Omp) k::omp::gaussian_smooth(d.a, out, kGrid, {2, 2, 2});
    else k::serial::gaussian_smooth(d.a, out, kGrid, {2, 2, 2});
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Omp>
void BM_SampleWarp(benchmark::State& st) {
  const Data& d = data();
  k::SampleSpec s;
  s.target = kGrid;
  s.source = kGrid;
  s.displacement = {d.u[0].data(), d.u[1].data(), d.u[2].data()};
  std::vector<float> out(kGrid.size());
  const float* in[] = {d.a.data()};
  float* o[] = {out.data()};
  for (auto _ : st) {
    if constexpr (Omp) k::omp::sample(s, in, o);
    else k::serial::sample(s, in, o);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Omp>
void BM_Gradient(benchmark::State& st) {
  const Data& d = data();
  std::array<std::vector<float>, 3> g{std::vector<float>(kGrid.size()), std::vector<float>(kGrid.size()),
                                      std::vector<float>(kGrid.size())};
  for (auto _ : st) {
    if constexpr (Omp) k::omp::gradient(d.a, kGrid, {g[0].data(), g[1].data(), g[2].data()});
    else k::serial::gradient(d.a, kGrid, {g[0].data(), g[1].data(), g[2].data()});
    benchmark::DoNotOptimize(g[0].data());
  }
}

template <bool Omp>
void BM_Confusion(benchmark::State& st) {
  const Data& d = data();
  for (auto _ : st) {
    const auto c = Omp ? k::omp::confusion(d.ma, d.mb, kGrid) : k::serial::confusion(d.ma, d.mb, kGrid);
    benchmark::DoNotOptimize(c);
  }
}

template <bool Omp>
void BM_PairMoments(benchmark::State& st) {
  const Data& d = data();
  for (auto _ : st) {
    const auto m = Omp ? k::omp::pair_moments(d.a, d.b, kGrid) : k::serial::pair_moments(d.a, d.b, kGrid);
    benchmark::DoNotOptimize(m);
  }
}

template <bool Omp>
void BM_DemonsUpdate(benchmark::State& st) {
  const Data& d = data();
  std::array<std::vector<float>, 3> u{std::vector<float>(kGrid.size()), std::vector<float>(kGrid.size()),
                                      std::vector<float>(kGrid.size())};
  const k::Field3 out{u[0].data(), u[1].data(), u[2].data()};
  for (auto _ : st) {
    const double ssd = Omp ? k::omp::demons_update(d.a, d.b, d.cga(), d.cgb(), 1.0, kGrid, out)
                           : k::serial::demons_update(d.a, d.b, d.cga(), d.cgb(), 1.0, kGrid, out);
    benchmark::DoNotOptimize(ssd);
  }
}

template <bool Omp>
void BM_AffineMoments(benchmark::State& st) {
  const Data& d = data();
  const vqa::AffineMap id;
  for (auto _ : st) {
    const auto m = Omp ? k::omp::affine_moments(d.a, d.b, d.cgb(), id, kGrid)
                       : k::serial::affine_moments(d.a, d.b, d.cgb(), id, kGrid);
    benchmark::DoNotOptimize(m);
  }
}

}  // namespace

#define VQA_BENCH_PAIR(fn)                      \
  BENCHMARK(fn<false>)->Name(#fn "/serial");    \
  BENCHMARK(fn<true>)->Name(#fn "/omp")

VQA_BENCH_PAIR(BM_GaussianSmooth);
VQA_BENCH_PAIR(BM_SampleWarp);
VQA_BENCH_PAIR(BM_Gradient);
VQA_BENCH_PAIR(BM_Confusion);
VQA_BENCH_PAIR(BM_PairMoments);
VQA_BENCH_PAIR(BM_DemonsUpdate);
VQA_BENCH_PAIR(BM_AffineMoments);

BENCHMARK_MAIN();
