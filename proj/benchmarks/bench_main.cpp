// Microbenchmarks for the polynomial-time kernels. Sizes follow the shapes
// the toy trainer actually produces (L = lambda * reference length) plus one
// deliberately large lattice to expose scaling.

#include <benchmark/benchmark.h>

#include <cstdint>

#include "falign/decode.hpp"
#include "falign/fuzzy.hpp"
#include "falign/grad.hpp"
#include "falign/lattice.hpp"
#include "falign/pathdp.hpp"

namespace {

falign::Lattice make_lattice(int L, int vocab_size) {
  return falign::from_logits(falign::random_lattice(11, L, vocab_size));
}

falign::Reference make_reference(int length, int vocab_size) {
  falign::Reference y;
  std::uint64_t state = 99;
  for (int i = 0; i < length; ++i) {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    y.tokens.push_back(static_cast<int>((state >> 33) % vocab_size));
  }
  return y;
}

void bm_passing_probabilities(benchmark::State& state) {
  falign::Lattice lat = make_lattice(static_cast<int>(state.range(0)), 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(falign::passing_probabilities(lat));
  }
}
BENCHMARK(bm_passing_probabilities)->Arg(32)->Arg(128)->Arg(256);

void bm_fa_loss(benchmark::State& state) {
  int L = static_cast<int>(state.range(0));
  falign::Lattice lat = make_lattice(L, 8);
  falign::Reference y = make_reference(L / 4 > 2 ? L / 4 : 2, 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(falign::fa_loss(lat, y, 2));
  }
}
BENCHMARK(bm_fa_loss)->Arg(32)->Arg(128)->Arg(256);

void bm_fa_loss_grad(benchmark::State& state) {
  int L = static_cast<int>(state.range(0));
  falign::LatticeLogits params = falign::random_lattice(11, L, 8);
  falign::Reference y = make_reference(L / 4 > 2 ? L / 4 : 2, 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(falign::fa_loss_grad(params, y, 2));
  }
}
BENCHMARK(bm_fa_loss_grad)->Arg(32)->Arg(128);

void bm_marginal_nll(benchmark::State& state) {
  int L = static_cast<int>(state.range(0));
  falign::Lattice lat = make_lattice(L, 8);
  falign::Reference y = make_reference(L / 4 > 2 ? L / 4 : 2, 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(falign::marginal_nll(lat, y));
  }
}
BENCHMARK(bm_marginal_nll)->Arg(32)->Arg(128)->Arg(256);

void bm_joint_viterbi_decode(benchmark::State& state) {
  falign::Lattice lat = make_lattice(static_cast<int>(state.range(0)), 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(falign::joint_viterbi_decode(lat));
  }
}
BENCHMARK(bm_joint_viterbi_decode)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
