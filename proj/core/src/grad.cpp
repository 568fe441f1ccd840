#include "falign/grad.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "falign/detail/fa_trace.hpp"
#include "falign/error.hpp"
#include "falign/numeric.hpp"

namespace falign {

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr double kFdAbsFloor = 1e-8;
constexpr double kKinkMargin = 1e-7;

// Adjoint of out = in * E (the hop): accumulates into Ebar and returns the
// adjoint of in.
Vec backward_hop(const Lattice& lat, const Vec& in, const Vec& out_bar, Mat& e_bar) {
  const int L = lat.L;
  Vec in_bar(L, 0.0);
  for (int v = 2; v <= L; ++v) {
    double ob = out_bar[v - 1];
    if (ob == 0.0) continue;
    for (int u = 1; u < v; ++u) {
      e_bar(u - 1, v - 1) += in[u - 1] * ob;
      in_bar[u - 1] += lat.trans(u, v) * ob;
    }
  }
  return in_bar;
}

// Chain adjoints of the probability matrices through the masked row
// softmaxes. Masked coordinates stay exactly zero.
void softmax_backward(const Lattice& lat, const Mat& e_bar, const Mat& w_bar,
                      GradientBundle& out) {
  const int L = lat.L;
  const int V = lat.vocab_size;
  for (int i = 1; i < L; ++i) {
    double dot = 0.0;
    for (int j = i + 1; j <= L; ++j) dot += e_bar(i - 1, j - 1) * lat.trans(i, j);
    for (int j = i + 1; j <= L; ++j) {
      out.d_transition_logits(i - 1, j - 1) = lat.trans(i, j) * (e_bar(i - 1, j - 1) - dot);
    }
  }
  for (int v = 1; v <= L; ++v) {
    double dot = 0.0;
    for (int t = 0; t < V; ++t) dot += w_bar(v - 1, t) * lat.emit(v, t);
    for (int t = 0; t < V; ++t) {
      out.d_emission_logits(v - 1, t) = lat.emit(v, t) * (w_bar(v - 1, t) - dot);
    }
  }
}

// Adjoint of the passing-probability recurrence, consumed in decreasing
// vertex order; p_1 is a constant.
void backward_passing(const Lattice& lat, const Vec& p, Vec& p_bar, Mat& e_bar) {
  for (int v = lat.L; v >= 2; --v) {
    double pb = p_bar[v - 1];
    if (pb == 0.0) continue;
    for (int u = 1; u < v; ++u) {
      e_bar(u - 1, v - 1) += p[u - 1] * pb;
      p_bar[u - 1] += lat.trans(u, v) * pb;
    }
  }
}

double loss_at(const LatticeLogits& params, const Reference& y, int n, LossKind which) {
  Lattice lat = from_logits(params);
  if (which == LossKind::kFuzzyAlignment) return detail::fa_forward(lat, y, n).loss;
  return marginal_nll(lat, y);
}

}  // namespace

GradientBundle fa_loss_grad(const LatticeLogits& params, const Reference& y, int n) {
  Lattice lat = from_logits(params);
  detail::FaTrace tr = detail::fa_forward(lat, y, n);
  const int L = lat.L;
  const double T = static_cast<double>(tr.ref_length);

  GradientBundle out;
  out.d_transition_logits = Mat(L, L, 0.0);
  out.d_emission_logits = Mat(L, lat.vocab_size, 0.0);
  out.loss_value = tr.loss;

  // loss = -bp * num / den, with bp a function of the expected length.
  Mat e_bar(L, L, 0.0);
  Mat w_bar(L, lat.vocab_size, 0.0);
  Vec p_bar(L, 0.0);

  const double num_bar = -tr.bp / tr.denominator;
  const double den_bar = tr.bp * tr.numerator / (tr.denominator * tr.denominator);
  const double bp_bar = -tr.precision;
  const double elen_bar =
      tr.bp_clipped ? 0.0 : bp_bar * tr.bp * T / (tr.expected_len * tr.expected_len);

  // Numerator: each unclipped gram's count backpropagates through its
  // reweighted-hop chain.
  for (const detail::GramTrace& g : tr.grams) {
    if (g.clipped) continue;
    Vec d_bar(L, num_bar);
    for (int k = tr.order - 1; k >= 1; --k) {
      // d[k] = m[k] (.) emit(., gram[k])
      Vec m_bar(L, 0.0);
      for (int v = 1; v <= L; ++v) {
        m_bar[v - 1] = d_bar[v - 1] * lat.emit(v, g.gram[k]);
        w_bar(v - 1, g.gram[k]) += d_bar[v - 1] * g.m[k][v - 1];
      }
      d_bar = backward_hop(lat, g.d[k - 1], m_bar, e_bar);
    }
    // d[0] = p (.) emit(., gram[0])
    for (int v = 1; v <= L; ++v) {
      p_bar[v - 1] += d_bar[v - 1] * lat.emit(v, g.gram[0]);
      w_bar(v - 1, g.gram[0]) += d_bar[v - 1] * tr.p[v - 1];
    }
  }

  // Denominator: plain hop chain from p.
  {
    Vec c_bar(L, den_bar);
    for (int k = tr.order - 1; k >= 1; --k) c_bar = backward_hop(lat, tr.c[k - 1], c_bar, e_bar);
    for (int v = 1; v <= L; ++v) p_bar[v - 1] += c_bar[v - 1];
  }

  // Expected length is the L1 mass of p.
  if (elen_bar != 0.0) {
    for (int v = 1; v <= L; ++v) p_bar[v - 1] += elen_bar;
  }

  backward_passing(lat, tr.p, p_bar, e_bar);
  softmax_backward(lat, e_bar, w_bar, out);
  return out;
}

GradientBundle nll_loss_grad(const LatticeLogits& params, const Reference& y) {
  Lattice lat = from_logits(params);
  require_valid(lat);
  for (int t : y.tokens) {
    if (t < 0 || t >= lat.vocab_size) throw_error(ErrorKind::kInvalidToken, "token out of range");
  }
  const int M = y.length();
  const int L = lat.L;
  if (M < 1) throw_error(ErrorKind::kInvalidParameter, "reference must be non-empty");
  if (M > L || (M == 1 && L != 1)) {
    throw_error(ErrorKind::kInfeasibleLength, "no path matches the reference length");
  }

  // Forward scores include the emission at their own position; backward
  // scores cover everything after it.
  Mat la(M, L, kNegInf), lb(M, L, kNegInf);
  la(0, 0) = log_safe(lat.emit(1, y.tokens[0]));
  for (int i = 2; i <= M; ++i) {
    for (int v = i; v <= L; ++v) {
      double acc = kNegInf;
      for (int u = i - 1; u < v; ++u) {
        acc = log_add(acc, la(i - 2, u - 1) + log_safe(lat.trans(u, v)));
      }
      la(i - 1, v - 1) = acc + log_safe(lat.emit(v, y.tokens[i - 1]));
    }
  }
  const double log_p = la(M - 1, L - 1);
  if (log_p == kNegInf) {
    throw_error(ErrorKind::kUndefinedGradient, "reference has zero marginal probability");
  }

  lb(M - 1, L - 1) = 0.0;
  for (int i = M - 1; i >= 1; --i) {
    for (int u = i; u <= L; ++u) {
      double acc = kNegInf;
      for (int v = u + 1; v <= L; ++v) {
        acc = log_add(acc, log_safe(lat.trans(u, v)) + log_safe(lat.emit(v, y.tokens[i])) +
                               lb(i, v - 1));
      }
      lb(i - 1, u - 1) = acc;
    }
  }

  // Posterior occupancies. gamma(i, v) = P(a_i = v | y, x); xi sums to the
  // expected number of uses of each transition.
  Mat gamma(M, L, 0.0);
  for (int i = 0; i < M; ++i) {
    for (int v = 0; v < L; ++v) {
      double lg = la(i, v) + lb(i, v) - log_p;
      gamma(i, v) = lg == kNegInf ? 0.0 : std::exp(lg);
    }
  }

  GradientBundle out;
  out.d_transition_logits = Mat(L, L, 0.0);
  out.d_emission_logits = Mat(L, lat.vocab_size, 0.0);
  out.loss_value = -log_p;

  // d/d t(u, j) = trans(u, j) * R(u) - A(u, j) with R the expected number of
  // departures from u and A the expected transition counts.
  Vec r(L, 0.0);
  for (int u = 0; u < L; ++u) {
    for (int i = 0; i + 1 < M; ++i) r[u] += gamma(i, u);
  }
  for (int u = 1; u < L; ++u) {
    if (r[u - 1] == 0.0) continue;
    for (int v = u + 1; v <= L; ++v) {
      double lt = log_safe(lat.trans(u, v));
      double a_uv = 0.0;
      if (lt != kNegInf) {
        for (int i = 1; i < M; ++i) {
          double lx = la(i - 1, u - 1) + lt + log_safe(lat.emit(v, y.tokens[i])) + lb(i, v - 1) -
                      log_p;
          if (lx != kNegInf) a_uv += std::exp(lx);
        }
      }
      out.d_transition_logits(u - 1, v - 1) = lat.trans(u, v) * r[u - 1] - a_uv;
    }
  }

  // d/d e(v, t) = emit(v, t) * S(v) - B(v, t) with S the total occupancy of v
  // and B its occupancy restricted to positions emitting t.
  for (int v = 0; v < L; ++v) {
    double s = 0.0;
    for (int i = 0; i < M; ++i) s += gamma(i, v);
    if (s == 0.0) continue;
    Vec b(lat.vocab_size, 0.0);
    for (int i = 0; i < M; ++i) b[y.tokens[i]] += gamma(i, v);
    for (int t = 0; t < lat.vocab_size; ++t) {
      out.d_emission_logits(v, t) = lat.emission(v, t) * s - b[t];
    }
  }
  return out;
}

namespace {

struct ClipState {
  double min_margin = kPosInf;  // distance to the nearest clipping boundary
  std::vector<bool> gram_clipped;
  bool bp_clipped = true;
  bool feasible = true;
};

ClipState clip_state(const LatticeLogits& params, const Reference& y, int n) {
  ClipState st;
  detail::FaTrace tr = detail::fa_forward(from_logits(params), y, n);
  for (const detail::GramTrace& g : tr.grams) {
    st.gram_clipped.push_back(g.clipped);
    st.min_margin = std::min(st.min_margin, std::abs(g.count - static_cast<double>(g.ref_count)));
  }
  st.bp_clipped = tr.bp_clipped;
  st.min_margin =
      std::min(st.min_margin, std::abs(tr.expected_len - static_cast<double>(tr.ref_length)));
  return st;
}

bool kink_adjacent(const ClipState& base, const ClipState& plus, const ClipState& minus) {
  double m = std::min({base.min_margin, plus.min_margin, minus.min_margin});
  if (m <= kKinkMargin) return true;
  if (plus.bp_clipped != minus.bp_clipped) return true;
  return plus.gram_clipped != minus.gram_clipped;
}

}  // namespace

CheckReport finite_diff_check(const LatticeLogits& params, const Reference& y, int n,
                              LossKind which) {
  const bool fa = which == LossKind::kFuzzyAlignment;
  if (!std::isfinite(loss_at(params, y, n, which))) {
    throw_error(ErrorKind::kCheckInfeasible, "loss is not finite at the given parameters");
  }
  GradientBundle analytic = fa ? fa_loss_grad(params, y, n) : nll_loss_grad(params, y);

  CheckReport report;
  ClipState base;
  if (fa) base = clip_state(params, y, n);

  LatticeLogits work = params;
  auto coord_value = [&](bool is_emission, int r, int c) -> double& {
    return is_emission ? work.emission_logits(r, c) : work.transition_logits(r, c);
  };
  auto analytic_value = [&](bool is_emission, int r, int c) {
    return is_emission ? analytic.d_emission_logits(r, c) : analytic.d_transition_logits(r, c);
  };

  auto run_coord = [&](bool is_emission, int r, int c) {
    double saved = coord_value(is_emission, r, c);
    coord_value(is_emission, r, c) = saved + kFdStep;
    double loss_plus = loss_at(work, y, n, which);
    ClipState plus;
    if (fa) plus = clip_state(work, y, n);
    coord_value(is_emission, r, c) = saved - kFdStep;
    double loss_minus = loss_at(work, y, n, which);
    ClipState minus;
    if (fa) minus = clip_state(work, y, n);
    coord_value(is_emission, r, c) = saved;

    CheckCoord coord{is_emission, r + 1, is_emission ? c : c + 1};
    if (fa && kink_adjacent(base, plus, minus)) {
      report.skipped.push_back(coord);
      return;
    }
    double fd = (loss_plus - loss_minus) / (2.0 * kFdStep);
    double g = analytic_value(is_emission, r, c);
    double denom = std::max({std::abs(fd), std::abs(g), kFdAbsFloor / kFdRelTol});
    double rel = std::abs(fd - g) / denom;
    ++report.checked;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst = coord;
      report.worst_analytic = g;
      report.worst_numeric = fd;
    }
  };

  for (int r = 0; r < params.L; ++r) {
    for (int c = 0; c < params.L; ++c) run_coord(false, r, c);
  }
  for (int r = 0; r < params.L; ++r) {
    for (int c = 0; c < params.vocab_size; ++c) run_coord(true, r, c);
  }
  report.pass = report.max_rel_err <= kFdRelTol;
  return report;
}

}  // namespace falign
