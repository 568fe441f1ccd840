#pragma once

#include <utility>
#include <vector>

#include "falign/lattice.hpp"

namespace falign {

// Probability that each vertex appears on a sampled decode path. p_1 = 1 by
// definition and p_L = 1 because every path is absorbed at vertex L.
struct PassingVector {
  Vec p;  // value for vertex v at p[v-1]
  double at(int v) const { return p[v - 1]; }
  int size() const { return static_cast<int>(p.size()); }
};

// Strictly increasing 1-based vertex sequence; full decode paths run 1..L.
struct Path {
  std::vector<int> vertices;
  int length() const { return static_cast<int>(vertices.size()); }
  bool operator==(const Path& o) const { return vertices == o.vertices; }
};

// Target token-id sequence (0-based ids).
struct Reference {
  std::vector<int> tokens;
  int length() const { return static_cast<int>(tokens.size()); }
  bool operator==(const Reference& o) const { return tokens == o.tokens; }
};

// Linear recurrence p_v = sum_{u<v} p_u * trans(u, v) with p_1 = 1.
PassingVector passing_probabilities(const Lattice& lat);

// ||p||_1: the expected number of vertices on a path, i.e. the expected
// output length.
double expected_length(const Lattice& lat);

// -log P(y|x) marginalized over all |y|-vertex paths 1 -> L, computed by a
// log-domain forward DP over (position, vertex). Returns +inf when no path
// emits y with positive probability; throws kInfeasibleLength when |y| > L
// (or |y| == 1 with L > 1) since no path can have that many positions.
double marginal_nll(const Lattice& lat, const Reference& y);

// P(a | y, x) for a full path with |a| == |y|.
double path_posterior(const Lattice& lat, const Reference& y, const Path& a);

// Most probable path given the reference (max-product DP) together with its
// log joint probability log P(y, a|x). Exact score ties resolve to the
// lexicographically smallest vertex sequence.
std::pair<Path, double> best_path_given_reference(const Lattice& lat, const Reference& y);

}  // namespace falign
