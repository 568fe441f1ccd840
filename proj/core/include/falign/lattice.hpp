#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "falign/matrix.hpp"

namespace falign {

// Decoding lattice over L vertices. A decode is a strictly increasing walk
// from vertex 1 to vertex L; each visited vertex emits one token, so a walk
// over m vertices yields an m-token output.
//
// Conventions shared by every module:
//   - vertex indices are 1-based (1..L); trans()/emit() take 1-based vertices
//   - token ids are 0-based (0..vocab_size-1)
//   - all probabilities and scores are 64-bit doubles
struct Lattice {
  int L = 0;
  int vocab_size = 0;
  Mat transition;  // L x L, strictly upper triangular; rows 1..L-1 stochastic, row L zero
  Mat emission;    // L x vocab_size, each row stochastic

  double trans(int i, int j) const { return transition(i - 1, j - 1); }
  double& trans(int i, int j) { return transition(i - 1, j - 1); }
  double emit(int v, int t) const { return emission(v - 1, t); }
  double& emit(int v, int t) { return emission(v - 1, t); }
};

// Unconstrained trainable parameters. from_logits() maps them onto a Lattice
// through masked row softmaxes, so every gradient step stays inside the
// feasible set by construction.
struct LatticeLogits {
  int L = 0;
  int vocab_size = 0;
  Mat transition_logits;  // L x L; entries j <= i are ignored by from_logits
  Mat emission_logits;    // L x vocab_size
};

struct Violation {
  std::string what;
  int row = 0;  // 1-based vertex
  int col = -1; // transition: 1-based target vertex; emission: 0-based token; -1 if n/a
  double residual = 0.0;
};

struct ValidationVerdict {
  bool ok = true;
  std::vector<Violation> violations;
};

// Row i < L becomes a softmax over the entries j > i; row L stays all zero;
// emission rows are full softmaxes. Rejects non-finite logits.
Lattice from_logits(const LatticeLogits& params);

// Checks strict upper-triangularity, row stochasticity (tolerance 1e-12 on
// row sums), entry ranges, and finiteness.
ValidationVerdict validate(const Lattice& lat);

// Throws ErrorKind::kValidation when validate() reports violations.
void require_valid(const Lattice& lat);

// Standard-normal logits drawn from a seeded generator. Same seed, same
// logits, on every platform (the normal variates are produced by a fixed
// Box-Muller transform rather than std::normal_distribution, whose algorithm
// is implementation-defined).
LatticeLogits random_lattice(std::uint64_t seed, int L, int vocab_size);

}  // namespace falign
