#pragma once

#include <utility>
#include <vector>

#include "falign/lattice.hpp"
#include "falign/pathdp.hpp"

namespace falign {

// One decoded output plus the probabilities needed for reporting. For every
// decoder, log_path_prob + log_tokens_given_path <= log_marginal up to
// rounding, because the decoded (path, tokens) pair is one term of the
// marginal sum.
struct Decode {
  Path path;
  std::vector<int> tokens;
  double log_path_prob = 0.0;          // log P(a|x)
  double log_tokens_given_path = 0.0;  // log P(y|a,x)
  double log_marginal = 0.0;           // log P(y|x) of the decoded tokens
};

// Follow the argmax transition from vertex 1 and emit each visited vertex's
// argmax token. Ties: smallest vertex index, smallest token id.
Decode greedy_decode(const Lattice& lat);

// At each vertex, jump to the successor maximizing trans(v, j) * emit(j, t)
// jointly over (j, t). Ties: smallest j, then smallest t.
Decode lookahead_decode(const Lattice& lat);

// Global optimum of the per-token normalized log joint over all output
// lengths m in [2, L], with each vertex emitting its argmax token.
// Ties: smaller m, then lexicographically smaller token sequence, then
// lexicographically smaller vertex sequence.
Decode joint_viterbi_decode(const Lattice& lat);

// Scores of one decode plus per-vertex (passing probability, max token
// probability) pairs for confidence reporting.
struct StatRecord {
  double neg_log_path = 0.0;
  double neg_log_tokens_given_path = 0.0;
  double neg_log_marginal = 0.0;
  std::vector<std::pair<double, double>> vertex_stats;  // entry v-1 for vertex v
};

StatRecord decode_stats(const Lattice& lat, const Decode& d);

}  // namespace falign
