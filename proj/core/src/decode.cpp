#include "falign/decode.hpp"

#include <algorithm>
#include <string>

#include "falign/error.hpp"
#include "falign/numeric.hpp"

namespace falign {

namespace {

int argmax_token(const Lattice& lat, int v) {
  int best = 0;
  for (int t = 1; t < lat.vocab_size; ++t) {
    if (lat.emit(v, t) > lat.emit(v, best)) best = t;
  }
  return best;
}

void finish(const Lattice& lat, Decode& d) {
  d.tokens.resize(d.path.length());
  d.log_tokens_given_path = 0.0;
  for (int i = 0; i < d.path.length(); ++i) {
    int v = d.path.vertices[i];
    d.tokens[i] = argmax_token(lat, v);
    d.log_tokens_given_path += log_safe(lat.emit(v, d.tokens[i]));
  }
  d.log_marginal = -marginal_nll(lat, Reference{d.tokens});
}

}  // namespace

Decode greedy_decode(const Lattice& lat) {
  require_valid(lat);
  Decode d;
  d.path.vertices.push_back(1);
  int v = 1;
  while (v != lat.L) {
    int best = v + 1;
    for (int j = v + 2; j <= lat.L; ++j) {
      if (lat.trans(v, j) > lat.trans(v, best)) best = j;
    }
    d.log_path_prob += log_safe(lat.trans(v, best));
    d.path.vertices.push_back(best);
    v = best;
  }
  finish(lat, d);
  return d;
}

Decode lookahead_decode(const Lattice& lat) {
  require_valid(lat);
  Decode d;
  d.path.vertices.push_back(1);
  int v = 1;
  while (v != lat.L) {
    // Jointly score the hop and the landing vertex's best token.
    int best_j = v + 1;
    double best_score = lat.trans(v, v + 1) * lat.emit(v + 1, argmax_token(lat, v + 1));
    for (int j = v + 2; j <= lat.L; ++j) {
      double score = lat.trans(v, j) * lat.emit(j, argmax_token(lat, j));
      if (score > best_score) {
        best_score = score;
        best_j = j;
      }
    }
    d.log_path_prob += log_safe(lat.trans(v, best_j));
    d.path.vertices.push_back(best_j);
    v = best_j;
  }
  finish(lat, d);
  return d;
}

Decode joint_viterbi_decode(const Lattice& lat) {
  require_valid(lat);
  const int L = lat.L;
  if (L < 2) throw_error(ErrorKind::kInfeasibleLength, "joint decoding needs L >= 2");

  Vec s(L + 1, 0.0);  // best log emission per vertex, 1-based
  std::vector<int> tok(L + 1, 0);
  for (int v = 1; v <= L; ++v) {
    tok[v] = argmax_token(lat, v);
    s[v] = log_safe(lat.emit(v, tok[v]));
  }

  // Prefix DP over (position, vertex) shared by every candidate length:
  // D(i, v) = best log joint of an i-vertex prefix 1 -> v.
  Mat D(L, L, kNegInf);
  D(0, 0) = s[1];
  for (int i = 2; i <= L; ++i) {
    for (int v = i; v <= L; ++v) {
      double best = kNegInf;
      for (int u = i - 1; u < v; ++u) {
        double cand = D(i - 2, u - 1) + log_safe(lat.trans(u, v));
        if (cand > best) best = cand;
      }
      D(i - 1, v - 1) = best + s[v];
    }
  }

  // Rerank candidate lengths by per-token score; ties keep the smaller m.
  int best_m = 0;
  double best_norm = kNegInf;
  for (int m = 2; m <= L; ++m) {
    double score = D(m - 1, L - 1);
    if (score == kNegInf) continue;
    double norm = score / m;
    if (best_m == 0 || norm > best_norm) {
      best_norm = norm;
      best_m = m;
    }
  }
  if (best_m == 0) throw_error(ErrorKind::kNoFeasiblePath, "no positive-probability path");
  const int m = best_m;

  // Suffix values for the chosen length: F(i, v) = best remaining log joint
  // from position i at vertex v, excluding vertex v's own emission.
  Mat F(m, L, kNegInf);
  F(m - 1, L - 1) = 0.0;
  for (int i = m - 1; i >= 1; --i) {
    for (int v = i; v <= L; ++v) {
      double best = kNegInf;
      for (int w = v + 1; w <= L; ++w) {
        double cand = log_safe(lat.trans(v, w)) + s[w] + F(i, w - 1);
        if (cand > best) best = cand;
      }
      F(i - 1, v - 1) = best;
    }
  }

  // Pass 1: lexicographically smallest token sequence among optimal paths.
  // The frontier holds every vertex reachable at this position along some
  // optimal path whose tokens match the chosen prefix.
  std::vector<int> tokens{tok[1]};
  std::vector<char> frontier(L + 1, 0), next(L + 1, 0);
  frontier[1] = 1;
  for (int i = 2; i <= m; ++i) {
    std::fill(next.begin(), next.end(), 0);
    int best_tok = lat.vocab_size;
    for (int v = 1; v <= L; ++v) {
      if (!frontier[v]) continue;
      for (int w = v + 1; w <= L; ++w) {
        if (log_safe(lat.trans(v, w)) + s[w] + F(i - 1, w - 1) == F(i - 2, v - 1)) {
          next[w] = 1;
          best_tok = std::min(best_tok, tok[w]);
        }
      }
    }
    for (int w = 1; w <= L; ++w) {
      if (next[w] && tok[w] != best_tok) next[w] = 0;
    }
    frontier.swap(next);
    tokens.push_back(best_tok);
  }

  // Pass 2: lexicographically smallest vertex sequence among optimal paths
  // emitting exactly that token sequence.
  Mat G(m, L, kNegInf);
  G(m - 1, L - 1) = 0.0;
  for (int i = m - 1; i >= 1; --i) {
    for (int v = i; v <= L; ++v) {
      double best = kNegInf;
      for (int w = v + 1; w <= L; ++w) {
        if (tok[w] != tokens[i]) continue;
        double cand = log_safe(lat.trans(v, w)) + s[w] + G(i, w - 1);
        if (cand > best) best = cand;
      }
      G(i - 1, v - 1) = best;
    }
  }

  Decode d;
  d.path.vertices.push_back(1);
  int v = 1;
  for (int i = 2; i <= m; ++i) {
    for (int w = v + 1; w <= L; ++w) {
      if (tok[w] != tokens[i - 1]) continue;
      if (log_safe(lat.trans(v, w)) + s[w] + G(i - 1, w - 1) == G(i - 2, v - 1)) {
        d.log_path_prob += log_safe(lat.trans(v, w));
        d.path.vertices.push_back(w);
        v = w;
        break;
      }
    }
  }
  finish(lat, d);
  return d;
}

StatRecord decode_stats(const Lattice& lat, const Decode& d) {
  StatRecord rec;
  rec.neg_log_path = -d.log_path_prob;
  rec.neg_log_tokens_given_path = -d.log_tokens_given_path;
  rec.neg_log_marginal = -d.log_marginal;
  PassingVector pv = passing_probabilities(lat);
  rec.vertex_stats.reserve(lat.L);
  for (int v = 1; v <= lat.L; ++v) {
    rec.vertex_stats.push_back({pv.at(v), lat.emit(v, argmax_token(lat, v))});
  }
  return rec;
}

}  // namespace falign
