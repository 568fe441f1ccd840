#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "falign/decode.hpp"
#include "falign/fuzzy.hpp"
#include "falign/lattice.hpp"
#include "falign/pathdp.hpp"

namespace falign {

// Brute-force reference implementations, exponential in L (and vocab size),
// guarded by explicit caps. They exist to pin down the semantics of the
// efficient recurrences: every polynomial-time operation in this library has
// one of these as its ground truth in the test suites, and the CLI's
// oracle-check command runs the comparisons on arbitrary serialized lattices.

inline constexpr int kDefaultPathCap = 12;
inline constexpr int kTranslationLatticeCap = 7;
inline constexpr int kTranslationVocabCap = 4;

// Every positive-probability path 1 -> L with its probability.
struct PathEnumeration {
  std::vector<std::pair<Path, double>> paths;
};

// Depth-first enumeration in lexicographic path order. Throws kCapExceeded
// when L > cap.
PathEnumeration enumerate_paths(const Lattice& lat, int cap = kDefaultPathCap);

// sum of P(a) over paths containing v, for each vertex v.
PassingVector oracle_passing_prob(const Lattice& lat, int cap = kDefaultPathCap);

// sum_a P(a) * sum_i prod_j emit(a_{i+j-1}, gram_j): the definitional
// expected occurrence count, one sliding window at a time.
double oracle_expected_gram_count(const Lattice& lat, const Gram& gram,
                                  int cap = kDefaultPathCap);

// sum over |y|-vertex paths of P(a) * prod_i emit(a_i, y_i). Returns 0 when
// no path has length |y|.
double oracle_marginal_prob(const Lattice& lat, const Reference& y, int cap = kDefaultPathCap);

// Exact (numerator, denominator) of the clipped expected-count precision,
// obtained by enumerating every translation of every path. Hard-capped to
// L <= kTranslationLatticeCap and vocab_size <= kTranslationVocabCap.
std::pair<double, double> oracle_full_translation_expectation(const Lattice& lat,
                                                              const Reference& y, int n);

// Exhaustive search over (path, per-vertex argmax tokens) maximizing the
// length-normalized log joint; identical tie-breaks to joint_viterbi_decode.
Decode oracle_best_joint(const Lattice& lat, int cap = kDefaultPathCap);

// Process-wide count of enumeration passes. Lets tests assert that the
// efficient code paths never fall back to enumeration.
std::uint64_t enumeration_calls();

}  // namespace falign
