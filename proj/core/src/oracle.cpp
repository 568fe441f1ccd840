#include "falign/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <string>

#include "falign/error.hpp"
#include "falign/numeric.hpp"

namespace falign {

namespace {

std::atomic<std::uint64_t> g_enumeration_calls{0};

int argmax_token(const Lattice& lat, int v) {
  int best = 0;
  for (int t = 1; t < lat.vocab_size; ++t) {
    if (lat.emit(v, t) > lat.emit(v, best)) best = t;
  }
  return best;
}

void check_cap(const Lattice& lat, int cap) {
  if (cap < 1) throw_error(ErrorKind::kInvalidParameter, "enumeration cap must be positive");
  if (lat.L > cap) {
    throw_error(ErrorKind::kCapExceeded, "path enumeration capped at L <= " + std::to_string(cap) +
                                             ", got L = " + std::to_string(lat.L));
  }
}

void dfs_paths(const Lattice& lat, int v, std::vector<int>& prefix, double prob,
               PathEnumeration& out) {
  if (v == lat.L) {
    out.paths.push_back({Path{prefix}, prob});
    return;
  }
  for (int w = v + 1; w <= lat.L; ++w) {
    double e = lat.trans(v, w);
    if (e <= 0.0) continue;
    prefix.push_back(w);
    dfs_paths(lat, w, prefix, prob * e, out);
    prefix.pop_back();
  }
}

}  // namespace

PathEnumeration enumerate_paths(const Lattice& lat, int cap) {
  require_valid(lat);
  check_cap(lat, cap);
  g_enumeration_calls.fetch_add(1, std::memory_order_relaxed);
  PathEnumeration out;
  std::vector<int> prefix{1};
  dfs_paths(lat, 1, prefix, 1.0, out);
  return out;
}

PassingVector oracle_passing_prob(const Lattice& lat, int cap) {
  PathEnumeration en = enumerate_paths(lat, cap);
  PassingVector pv;
  pv.p.assign(lat.L, 0.0);
  for (const auto& [path, prob] : en.paths) {
    for (int v : path.vertices) pv.p[v - 1] += prob;
  }
  return pv;
}

double oracle_expected_gram_count(const Lattice& lat, const Gram& gram, int cap) {
  if (gram.empty()) throw_error(ErrorKind::kInvalidOrder, "gram must be non-empty");
  for (int t : gram) {
    if (t < 0 || t >= lat.vocab_size) throw_error(ErrorKind::kInvalidToken, "gram token out of range");
  }
  PathEnumeration en = enumerate_paths(lat, cap);
  const int n = static_cast<int>(gram.size());
  double total = 0.0;
  for (const auto& [path, prob] : en.paths) {
    const int T = path.length();
    double windows = 0.0;
    for (int i = 0; i + n <= T; ++i) {
      double w = 1.0;
      for (int j = 0; j < n; ++j) w *= lat.emit(path.vertices[i + j], gram[j]);
      windows += w;
    }
    total += prob * windows;
  }
  return total;
}

double oracle_marginal_prob(const Lattice& lat, const Reference& y, int cap) {
  for (int t : y.tokens) {
    if (t < 0 || t >= lat.vocab_size) throw_error(ErrorKind::kInvalidToken, "token out of range");
  }
  PathEnumeration en = enumerate_paths(lat, cap);
  double total = 0.0;
  for (const auto& [path, prob] : en.paths) {
    if (path.length() != y.length()) continue;
    double w = prob;
    for (int i = 0; i < y.length(); ++i) w *= lat.emit(path.vertices[i], y.tokens[i]);
    total += w;
  }
  return total;
}

namespace {

struct TranslationAccum {
  const Lattice* lat = nullptr;
  const NGramTable* table = nullptr;
  int n = 0;
  std::map<Gram, double> expected_counts;
  double denominator = 0.0;

  // Recurse over token choices at each path position; weight is the joint
  // probability of the path and the tokens chosen so far.
  void walk(const Path& path, std::vector<int>& tokens, int pos, double weight) {
    const int T = path.length();
    if (pos == T) {
      double total_windows = 0.0;
      for (int i = 0; i + n <= T; ++i) {
        total_windows += 1.0;
        Gram g(tokens.begin() + i, tokens.begin() + i + n);
        auto it = table->counts.find(g);
        if (it != table->counts.end()) expected_counts[g] += weight;
      }
      denominator += weight * total_windows;
      return;
    }
    int v = path.vertices[pos];
    for (int t = 0; t < lat->vocab_size; ++t) {
      double e = lat->emit(v, t);
      if (e <= 0.0) continue;
      tokens[pos] = t;
      walk(path, tokens, pos + 1, weight * e);
    }
  }
};

}  // namespace

std::pair<double, double> oracle_full_translation_expectation(const Lattice& lat,
                                                              const Reference& y, int n) {
  if (n < 1) throw_error(ErrorKind::kInvalidOrder, "n must be >= 1");
  if (lat.L > kTranslationLatticeCap || lat.vocab_size > kTranslationVocabCap) {
    throw_error(ErrorKind::kCapExceeded,
                "full translation enumeration capped at L <= " +
                    std::to_string(kTranslationLatticeCap) + ", vocab_size <= " +
                    std::to_string(kTranslationVocabCap));
  }
  NGramTable table = ngram_table(y, n);
  PathEnumeration en = enumerate_paths(lat, kTranslationLatticeCap);

  TranslationAccum accum;
  accum.lat = &lat;
  accum.table = &table;
  accum.n = n;
  for (const auto& [path, prob] : en.paths) {
    std::vector<int> tokens(path.length(), 0);
    accum.walk(path, tokens, 0, prob);
  }

  double numerator = 0.0;
  for (const auto& [gram, ref_count] : table.counts) {
    auto it = accum.expected_counts.find(gram);
    double expected = it == accum.expected_counts.end() ? 0.0 : it->second;
    numerator += std::min(expected, static_cast<double>(ref_count));
  }
  return {numerator, accum.denominator};
}

Decode oracle_best_joint(const Lattice& lat, int cap) {
  if (lat.L < 2) throw_error(ErrorKind::kInfeasibleLength, "joint decoding needs L >= 2");
  PathEnumeration en = enumerate_paths(lat, cap);

  bool have = false;
  double best_norm = kNegInf;
  Decode best;
  for (const auto& [path, prob] : en.paths) {
    const int m = path.length();
    std::vector<int> tokens(m);
    double log_tokens = 0.0;
    for (int i = 0; i < m; ++i) {
      tokens[i] = argmax_token(lat, path.vertices[i]);
      log_tokens += log_safe(lat.emit(path.vertices[i], tokens[i]));
    }
    double log_path = log_safe(prob);
    double norm = (log_path + log_tokens) / m;
    bool better = false;
    if (!have || norm > best_norm) {
      better = true;
    } else if (norm == best_norm) {
      if (m < best.path.length()) {
        better = true;
      } else if (m == best.path.length()) {
        if (tokens < best.tokens) {
          better = true;
        } else if (tokens == best.tokens && path.vertices < best.path.vertices) {
          better = true;
        }
      }
    }
    if (better) {
      have = true;
      best_norm = norm;
      best.path = path;
      best.tokens = tokens;
      best.log_path_prob = log_path;
      best.log_tokens_given_path = log_tokens;
    }
  }
  if (!have) throw_error(ErrorKind::kNoFeasiblePath, "no positive-probability path");
  best.log_marginal = -marginal_nll(lat, Reference{best.tokens});
  return best;
}

std::uint64_t enumeration_calls() { return g_enumeration_calls.load(std::memory_order_relaxed); }

}  // namespace falign
