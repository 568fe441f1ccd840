#pragma once

#include <map>
#include <vector>

#include "falign/lattice.hpp"
#include "falign/pathdp.hpp"

namespace falign {

using Gram = std::vector<int>;

// Distinct n-grams of a reference with occurrence counts.
struct NGramTable {
  int order = 0;
  std::map<Gram, int> counts;
};

// Row i-1 holds the probability of emitting gram token i at each vertex:
// G(i-1, v-1) = emit(v, gram[i-1]).
struct GramProbMatrix {
  Mat G;  // n x L
};

// Full evaluation of the alignment objective for one (lattice, reference, n).
// The loss is -bp * precision, so perfect clipped n-gram precision at a
// non-short expected length reaches -1 and disjoint vocabularies give 0.
struct AlignmentReport {
  int order = 0;
  double numerator = 0.0;        // sum_g min(E[C_g(y')], C_g(y)) over g in the reference's table
  double denominator = 0.0;      // E[total n-grams of a decode]
  double precision = 0.0;        // numerator / denominator
  double expected_length = 0.0;  // E[T_{y'}]
  double bp = 1.0;               // min(exp(1 - |y| / expected_length), 1)
  double loss = 0.0;             // -bp * precision
};

// n >= 1; |y| < n yields an empty table.
NGramTable ngram_table(const Reference& y, int n);

// ||p^T E^{n-1}||_1: expected number of n-gram windows in a decode. Windows
// shorter than n contribute nothing, so this equals
// E[max(T - n + 1, 0)] without any path enumeration.
double expected_total_ngrams(const Lattice& lat, int n);

GramProbMatrix gram_prob_matrix(const Lattice& lat, const Gram& gram);

// ||((p (.) G_1) E (.) G_2) E ... (.) G_n||_1: the expected number of
// occurrences of `gram` in a decode, by the accumulator recurrence.
double expected_gram_count(const Lattice& lat, const Gram& gram);

struct PrecisionParts {
  double numerator = 0.0;
  double denominator = 0.0;
  double precision = 0.0;
};

// Clipped expected-count n-gram precision of the lattice against y.
// Requires |y| >= n and a positive denominator.
PrecisionParts fuzzy_precision(const Lattice& lat, const Reference& y, int n);

// min(exp(1 - |y| / E[T_{y'}]), 1).
double brevity_penalty(const Lattice& lat, const Reference& y);

AlignmentReport fa_loss(const Lattice& lat, const Reference& y, int n);

}  // namespace falign
