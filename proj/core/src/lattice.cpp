#include "falign/lattice.hpp"

#include <cmath>
#include <random>
#include <string>

#include "falign/error.hpp"

namespace falign {

namespace {

constexpr double kRowSumTol = 1e-12;

// Box-Muller over mt19937_64 uniforms. std::normal_distribution's algorithm
// is implementation-defined, so this keeps seeded logits identical across
// standard libraries.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform_open();
    double u2 = uniform_open();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  // Uniform on (0, 1]: never feeds 0 to the log.
  double uniform_open() {
    return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
  }

  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

void check_param_shapes(const LatticeLogits& params) {
  if (params.L < 1) throw_error(ErrorKind::kInvalidSize, "lattice needs at least one vertex");
  if (params.vocab_size < 1) throw_error(ErrorKind::kInvalidSize, "vocab_size must be positive");
  if (params.transition_logits.rows() != params.L || params.transition_logits.cols() != params.L) {
    throw_error(ErrorKind::kInvalidSize, "transition_logits must be L x L");
  }
  if (params.emission_logits.rows() != params.L ||
      params.emission_logits.cols() != params.vocab_size) {
    throw_error(ErrorKind::kInvalidSize, "emission_logits must be L x vocab_size");
  }
  if (!params.transition_logits.all_finite() || !params.emission_logits.all_finite()) {
    throw_error(ErrorKind::kInvalidParameter, "logits must be finite");
  }
}

}  // namespace

Lattice from_logits(const LatticeLogits& params) {
  check_param_shapes(params);
  const int L = params.L;
  const int V = params.vocab_size;
  Lattice lat;
  lat.L = L;
  lat.vocab_size = V;
  lat.transition = Mat(L, L, 0.0);
  lat.emission = Mat(L, V, 0.0);

  // Transition row i (0-based): softmax over columns i+1..L-1. Row L-1 has no
  // successors and stays zero.
  for (int i = 0; i + 1 < L; ++i) {
    double hi = params.transition_logits(i, i + 1);
    for (int j = i + 2; j < L; ++j) hi = std::max(hi, params.transition_logits(i, j));
    double z = 0.0;
    for (int j = i + 1; j < L; ++j) z += std::exp(params.transition_logits(i, j) - hi);
    for (int j = i + 1; j < L; ++j) {
      lat.transition(i, j) = std::exp(params.transition_logits(i, j) - hi) / z;
    }
  }

  for (int v = 0; v < L; ++v) {
    double hi = params.emission_logits(v, 0);
    for (int t = 1; t < V; ++t) hi = std::max(hi, params.emission_logits(v, t));
    double z = 0.0;
    for (int t = 0; t < V; ++t) z += std::exp(params.emission_logits(v, t) - hi);
    for (int t = 0; t < V; ++t) {
      lat.emission(v, t) = std::exp(params.emission_logits(v, t) - hi) / z;
    }
  }
  return lat;
}

ValidationVerdict validate(const Lattice& lat) {
  ValidationVerdict verdict;
  auto add = [&verdict](const std::string& what, int row, int col, double residual) {
    verdict.ok = false;
    verdict.violations.push_back({what, row, col, residual});
  };

  if (lat.L < 1 || lat.vocab_size < 1 || lat.transition.rows() != lat.L ||
      lat.transition.cols() != lat.L || lat.emission.rows() != lat.L ||
      lat.emission.cols() != lat.vocab_size) {
    add("shape mismatch", 0, -1, 0.0);
    return verdict;
  }

  for (int i = 1; i <= lat.L; ++i) {
    for (int j = 1; j <= lat.L; ++j) {
      double x = lat.trans(i, j);
      if (!std::isfinite(x)) {
        add("non-finite transition", i, j, x);
      } else if (j <= i && x != 0.0) {
        add("transition at or below the diagonal must be zero", i, j, x);
      } else if (x < 0.0 || x > 1.0) {
        add("transition outside [0, 1]", i, j, x);
      }
    }
    if (i < lat.L) {
      double sum = 0.0;
      for (int j = i + 1; j <= lat.L; ++j) sum += lat.trans(i, j);
      if (std::abs(sum - 1.0) > kRowSumTol) add("transition row sum != 1", i, -1, sum - 1.0);
    }
  }

  for (int v = 1; v <= lat.L; ++v) {
    double sum = 0.0;
    for (int t = 0; t < lat.vocab_size; ++t) {
      double x = lat.emit(v, t);
      if (!std::isfinite(x)) {
        add("non-finite emission", v, t, x);
      } else if (x < 0.0 || x > 1.0) {
        add("emission outside [0, 1]", v, t, x);
      }
      sum += x;
    }
    if (std::abs(sum - 1.0) > kRowSumTol) add("emission row sum != 1", v, -1, sum - 1.0);
  }
  return verdict;
}

void require_valid(const Lattice& lat) {
  ValidationVerdict verdict = validate(lat);
  if (!verdict.ok) {
    const Violation& v = verdict.violations.front();
    throw_error(ErrorKind::kValidation,
                "invalid lattice: " + v.what + " (row " + std::to_string(v.row) + ")");
  }
}

LatticeLogits random_lattice(std::uint64_t seed, int L, int vocab_size) {
  if (L < 2) throw_error(ErrorKind::kInvalidSize, "random_lattice needs L >= 2");
  if (vocab_size < 1) throw_error(ErrorKind::kInvalidSize, "random_lattice needs vocab_size >= 1");
  LatticeLogits params;
  params.L = L;
  params.vocab_size = vocab_size;
  params.transition_logits = Mat(L, L, 0.0);
  params.emission_logits = Mat(L, vocab_size, 0.0);
  NormalSampler sampler(seed);
  for (double& x : params.transition_logits.data()) x = sampler.next();
  for (double& x : params.emission_logits.data()) x = sampler.next();
  return params;
}

}  // namespace falign
