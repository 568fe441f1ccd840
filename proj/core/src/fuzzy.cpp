#include "falign/fuzzy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "falign/detail/fa_trace.hpp"
#include "falign/error.hpp"

namespace falign {

namespace {

void check_order(int n) {
  if (n < 1) throw_error(ErrorKind::kInvalidOrder, "n-gram order must be >= 1");
}

void check_gram_tokens(const Lattice& lat, const Gram& gram) {
  for (int t : gram) {
    if (t < 0 || t >= lat.vocab_size) {
      throw_error(ErrorKind::kInvalidToken, "gram token out of range");
    }
  }
}

Vec passing_vec(const Lattice& lat) {
  Vec p(lat.L, 0.0);
  p[0] = 1.0;
  for (int v = 2; v <= lat.L; ++v) {
    double acc = 0.0;
    for (int u = 1; u < v; ++u) acc += p[u - 1] * lat.trans(u, v);
    p[v - 1] = acc;
  }
  return p;
}

// c <- c * E (row vector times the transition matrix).
Vec hop(const Lattice& lat, const Vec& c) {
  Vec out(lat.L, 0.0);
  for (int v = 2; v <= lat.L; ++v) {
    double acc = 0.0;
    for (int u = 1; u < v; ++u) acc += c[u - 1] * lat.trans(u, v);
    out[v - 1] = acc;
  }
  return out;
}

double sum(const Vec& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc;
}

}  // namespace

NGramTable ngram_table(const Reference& y, int n) {
  check_order(n);
  NGramTable table;
  table.order = n;
  for (int i = 0; i + n <= y.length(); ++i) {
    Gram g(y.tokens.begin() + i, y.tokens.begin() + i + n);
    ++table.counts[g];
  }
  return table;
}

double expected_total_ngrams(const Lattice& lat, int n) {
  require_valid(lat);
  check_order(n);
  Vec c = passing_vec(lat);
  for (int k = 1; k < n; ++k) c = hop(lat, c);
  return sum(c);
}

GramProbMatrix gram_prob_matrix(const Lattice& lat, const Gram& gram) {
  require_valid(lat);
  check_order(static_cast<int>(gram.size()));
  check_gram_tokens(lat, gram);
  GramProbMatrix out;
  out.G = Mat(static_cast<int>(gram.size()), lat.L, 0.0);
  for (int i = 0; i < static_cast<int>(gram.size()); ++i) {
    for (int v = 1; v <= lat.L; ++v) out.G(i, v - 1) = lat.emit(v, gram[i]);
  }
  return out;
}

double expected_gram_count(const Lattice& lat, const Gram& gram) {
  require_valid(lat);
  const int n = static_cast<int>(gram.size());
  check_order(n);
  check_gram_tokens(lat, gram);
  Vec p = passing_vec(lat);
  Vec d(lat.L, 0.0);
  for (int v = 1; v <= lat.L; ++v) d[v - 1] = p[v - 1] * lat.emit(v, gram[0]);
  for (int k = 1; k < n; ++k) {
    d = hop(lat, d);
    for (int v = 1; v <= lat.L; ++v) d[v - 1] *= lat.emit(v, gram[k]);
  }
  return sum(d);
}

namespace detail {

FaTrace fa_forward(const Lattice& lat, const Reference& y, int n) {
  require_valid(lat);
  check_order(n);
  for (int t : y.tokens) {
    if (t < 0 || t >= lat.vocab_size) throw_error(ErrorKind::kInvalidToken, "token out of range");
  }
  const int M = y.length();
  if (M < n) {
    throw_error(ErrorKind::kInvalidOrder, "reference shorter than the n-gram order");
  }

  FaTrace tr;
  tr.order = n;
  tr.ref_length = M;
  tr.p = passing_vec(lat);
  tr.expected_len = sum(tr.p);

  tr.c.resize(n);
  tr.c[0] = tr.p;
  for (int k = 1; k < n; ++k) tr.c[k] = hop(lat, tr.c[k - 1]);
  tr.denominator = sum(tr.c[n - 1]);
  if (tr.denominator <= 0.0) {
    throw_error(ErrorKind::kDegenerateLattice, "every path is shorter than the n-gram order");
  }

  NGramTable table = ngram_table(y, n);
  tr.grams.reserve(table.counts.size());
  for (const auto& [gram, ref_count] : table.counts) {
    GramTrace g;
    g.gram = gram;
    g.ref_count = ref_count;
    g.d.resize(n);
    g.m.resize(n);
    g.d[0].assign(lat.L, 0.0);
    for (int v = 1; v <= lat.L; ++v) g.d[0][v - 1] = tr.p[v - 1] * lat.emit(v, gram[0]);
    for (int k = 1; k < n; ++k) {
      g.m[k] = hop(lat, g.d[k - 1]);
      g.d[k].assign(lat.L, 0.0);
      for (int v = 1; v <= lat.L; ++v) g.d[k][v - 1] = g.m[k][v - 1] * lat.emit(v, gram[k]);
    }
    g.count = sum(g.d[n - 1]);
    g.clipped = g.count >= static_cast<double>(g.ref_count);
    tr.numerator += g.clipped ? static_cast<double>(g.ref_count) : g.count;
    tr.grams.push_back(std::move(g));
  }

  tr.precision = tr.numerator / tr.denominator;
  tr.bp_clipped = tr.expected_len >= static_cast<double>(M);
  tr.bp = tr.bp_clipped ? 1.0 : std::exp(1.0 - static_cast<double>(M) / tr.expected_len);
  tr.loss = -tr.bp * tr.precision;
  return tr;
}

}  // namespace detail

PrecisionParts fuzzy_precision(const Lattice& lat, const Reference& y, int n) {
  detail::FaTrace tr = detail::fa_forward(lat, y, n);
  return {tr.numerator, tr.denominator, tr.precision};
}

double brevity_penalty(const Lattice& lat, const Reference& y) {
  if (y.length() < 1) throw_error(ErrorKind::kInvalidParameter, "reference must be non-empty");
  double elen = expected_length(lat);
  double ratio = static_cast<double>(y.length()) / elen;
  return ratio <= 1.0 ? 1.0 : std::exp(1.0 - ratio);
}

AlignmentReport fa_loss(const Lattice& lat, const Reference& y, int n) {
  detail::FaTrace tr = detail::fa_forward(lat, y, n);
  AlignmentReport report;
  report.order = n;
  report.numerator = tr.numerator;
  report.denominator = tr.denominator;
  report.precision = tr.precision;
  report.expected_length = tr.expected_len;
  report.bp = tr.bp;
  report.loss = tr.loss;
  return report;
}

}  // namespace falign
