#include "falign/pathdp.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "falign/error.hpp"
#include "falign/numeric.hpp"

namespace falign {

namespace {

void check_tokens(const Lattice& lat, const Reference& y) {
  for (int t : y.tokens) {
    if (t < 0 || t >= lat.vocab_size) {
      throw_error(ErrorKind::kInvalidToken,
                  "token " + std::to_string(t) + " outside vocabulary of size " +
                      std::to_string(lat.vocab_size));
    }
  }
}

// |y| must admit a path: exactly L = 1 for a single token, otherwise
// 2 <= |y| <= L.
void check_length_feasible(const Lattice& lat, int M) {
  if (M < 1) throw_error(ErrorKind::kInvalidParameter, "reference must be non-empty");
  if (M > lat.L) {
    throw_error(ErrorKind::kInfeasibleLength, "reference length " + std::to_string(M) +
                                                  " exceeds lattice size " + std::to_string(lat.L));
  }
  if (M == 1 && lat.L != 1) {
    throw_error(ErrorKind::kInfeasibleLength,
                "single-token reference is only feasible on a single-vertex lattice");
  }
}

}  // namespace

PassingVector passing_probabilities(const Lattice& lat) {
  require_valid(lat);
  PassingVector pv;
  pv.p.assign(lat.L, 0.0);
  pv.p[0] = 1.0;
  for (int v = 2; v <= lat.L; ++v) {
    double acc = 0.0;
    for (int u = 1; u < v; ++u) acc += pv.p[u - 1] * lat.trans(u, v);
    pv.p[v - 1] = acc;
  }
  return pv;
}

double expected_length(const Lattice& lat) {
  PassingVector pv = passing_probabilities(lat);
  double sum = 0.0;
  for (double x : pv.p) sum += x;
  return sum;
}

double marginal_nll(const Lattice& lat, const Reference& y) {
  require_valid(lat);
  check_tokens(lat, y);
  const int M = y.length();
  const int L = lat.L;
  check_length_feasible(lat, M);

  // log alpha over vertices for the current position; position 1 is pinned
  // to vertex 1.
  Vec cur(L, kNegInf), nxt(L, kNegInf);
  cur[0] = log_safe(lat.emit(1, y.tokens[0]));
  for (int i = 2; i <= M; ++i) {
    std::fill(nxt.begin(), nxt.end(), kNegInf);
    for (int v = i; v <= L; ++v) {
      double acc = kNegInf;
      for (int u = i - 1; u < v; ++u) {
        acc = log_add(acc, cur[u - 1] + log_safe(lat.trans(u, v)));
      }
      nxt[v - 1] = acc + log_safe(lat.emit(v, y.tokens[i - 1]));
    }
    std::swap(cur, nxt);
  }
  return -cur[L - 1];
}

double path_posterior(const Lattice& lat, const Reference& y, const Path& a) {
  require_valid(lat);
  check_tokens(lat, y);
  const int M = y.length();
  check_length_feasible(lat, M);
  if (a.length() != M) {
    throw_error(ErrorKind::kInvalidPath, "path length must equal reference length");
  }
  if (a.vertices.front() != 1 || a.vertices.back() != lat.L) {
    throw_error(ErrorKind::kInvalidPath, "path must run from vertex 1 to vertex L");
  }
  for (int i = 0; i < M; ++i) {
    if (a.vertices[i] < 1 || a.vertices[i] > lat.L) {
      throw_error(ErrorKind::kInvalidPath, "vertex index out of range");
    }
    if (i > 0 && a.vertices[i] <= a.vertices[i - 1]) {
      throw_error(ErrorKind::kInvalidPath, "path must be strictly increasing");
    }
  }

  double log_joint = 0.0;
  for (int i = 0; i + 1 < M; ++i) log_joint += log_safe(lat.trans(a.vertices[i], a.vertices[i + 1]));
  for (int i = 0; i < M; ++i) log_joint += log_safe(lat.emit(a.vertices[i], y.tokens[i]));

  double nll = marginal_nll(lat, y);
  if (nll == kPosInf) {
    throw_error(ErrorKind::kUndefinedPosterior, "reference has zero marginal probability");
  }
  // log posterior = log_joint - log_marginal = log_joint + nll.
  return std::exp(log_joint + nll);
}

std::pair<Path, double> best_path_given_reference(const Lattice& lat, const Reference& y) {
  require_valid(lat);
  check_tokens(lat, y);
  const int M = y.length();
  const int L = lat.L;
  check_length_feasible(lat, M);

  if (M == 1) {
    // Single-vertex lattice: the only path is (1).
    double lj = log_safe(lat.emit(1, y.tokens[0]));
    if (lj == kNegInf) throw_error(ErrorKind::kNoFeasiblePath, "all joint probabilities are zero");
    return {Path{{1}}, lj};
  }

  // Suffix values F(i, v): best log of the remaining path from position i at
  // vertex v, excluding vertex v's own emission. Greedy forward
  // reconstruction over exact suffix values picks the lexicographically
  // smallest optimal vertex sequence.
  Mat F(M, L, kNegInf);
  F(M - 1, L - 1) = 0.0;
  for (int i = M - 1; i >= 1; --i) {
    for (int v = i; v <= L; ++v) {
      double best = kNegInf;
      for (int w = v + 1; w <= L; ++w) {
        double cand = log_safe(lat.trans(v, w)) + log_safe(lat.emit(w, y.tokens[i])) + F(i, w - 1);
        if (cand > best) best = cand;
      }
      F(i - 1, v - 1) = best;
    }
  }

  double log_joint = log_safe(lat.emit(1, y.tokens[0])) + F(0, 0);
  if (log_joint == kNegInf) {
    throw_error(ErrorKind::kNoFeasiblePath, "all joint probabilities are zero");
  }

  Path path;
  path.vertices.reserve(M);
  path.vertices.push_back(1);
  int v = 1;
  for (int i = 1; i < M; ++i) {
    for (int w = v + 1; w <= L; ++w) {
      double cand = log_safe(lat.trans(v, w)) + log_safe(lat.emit(w, y.tokens[i])) + F(i, w - 1);
      if (cand == F(i - 1, v - 1)) {
        path.vertices.push_back(w);
        v = w;
        break;
      }
    }
  }
  return {path, log_joint};
}

}  // namespace falign
