#pragma once

#include <vector>

#include "falign/fuzzy.hpp"
#include "falign/lattice.hpp"
#include "falign/pathdp.hpp"

// Forward evaluation of the alignment loss with every intermediate kept, so
// reverse-mode differentiation can replay the exact computation. fa_loss()
// and fa_loss_grad() both run this, which keeps their loss values identical
// to the bit.

namespace falign::detail {

struct GramTrace {
  Gram gram;
  int ref_count = 0;      // C_g(y)
  std::vector<Vec> d;     // d[k]: accumulator after k reweighted hops, k = 0..n-1
  std::vector<Vec> m;     // m[k] = d[k-1] * E before the entrywise product, k = 1..n-1 (m[0] unused)
  double count = 0.0;     // E[C_g(y')] = sum(d[n-1])
  bool clipped = false;   // count >= ref_count: min() takes the constant branch
};

struct FaTrace {
  int order = 0;
  int ref_length = 0;
  Vec p;                  // passing probabilities
  std::vector<Vec> c;     // c[k] = p^T E^k, k = 0..n-1
  std::vector<GramTrace> grams;
  double numerator = 0.0;
  double denominator = 0.0;
  double precision = 0.0;
  double expected_len = 0.0;
  double bp = 1.0;
  bool bp_clipped = true; // expected_len >= |y|: brevity penalty pinned at 1
  double loss = 0.0;
};

FaTrace fa_forward(const Lattice& lat, const Reference& y, int n);

}  // namespace falign::detail
