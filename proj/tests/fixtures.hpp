#pragma once

// Shared test fixtures and helpers.
//
// The central trick: logits of 0 vs -2000 make masked softmax rows exact,
// because exp(-2000) underflows to 0.0 and the remaining weights are small
// integer ratios. Fixtures built this way have probabilities that are exact
// binary fractions (1, 1/2, 1/4, ...), so tests can assert equality instead
// of approximate closeness wherever the math is exact.

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "falign/error.hpp"
#include "falign/lattice.hpp"
#include "falign/pathdp.hpp"

namespace falign {

// Readable doctest failure messages for error-kind comparisons.
inline std::ostream& operator<<(std::ostream& os, ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidParameter: return os << "kInvalidParameter";
    case ErrorKind::kInvalidSize: return os << "kInvalidSize";
    case ErrorKind::kInvalidOrder: return os << "kInvalidOrder";
    case ErrorKind::kInvalidToken: return os << "kInvalidToken";
    case ErrorKind::kInvalidPath: return os << "kInvalidPath";
    case ErrorKind::kInvalidConfig: return os << "kInvalidConfig";
    case ErrorKind::kInfeasibleLength: return os << "kInfeasibleLength";
    case ErrorKind::kUndefinedPosterior: return os << "kUndefinedPosterior";
    case ErrorKind::kUndefinedGradient: return os << "kUndefinedGradient";
    case ErrorKind::kNoFeasiblePath: return os << "kNoFeasiblePath";
    case ErrorKind::kDegenerateLattice: return os << "kDegenerateLattice";
    case ErrorKind::kCheckInfeasible: return os << "kCheckInfeasible";
    case ErrorKind::kCapExceeded: return os << "kCapExceeded";
    case ErrorKind::kValidation: return os << "kValidation";
    case ErrorKind::kIo: return os << "kIo";
    case ErrorKind::kFormat: return os << "kFormat";
  }
  return os << "ErrorKind(?)";
}

}  // namespace falign

namespace testfix {

inline constexpr double kOff = -2000.0;  // exp(kOff) == 0.0 in 64-bit arithmetic

// Deterministic single-path lattice: L = |tokens| vertices, vertex v emits
// tokens[v-1] with probability exactly 1 and steps to v+1 with probability
// exactly 1.
inline falign::LatticeLogits chain_logits(const std::vector<int>& tokens, int vocab_size) {
  const int L = static_cast<int>(tokens.size());
  falign::LatticeLogits params;
  params.L = L;
  params.vocab_size = vocab_size;
  params.transition_logits = falign::Mat(L, L, kOff);
  for (int i = 0; i + 1 < L; ++i) params.transition_logits(i, i + 1) = 0.0;
  params.emission_logits = falign::Mat(L, vocab_size, kOff);
  for (int v = 0; v < L; ++v) params.emission_logits(v, tokens[v]) = 0.0;
  return params;
}

inline falign::Lattice chain(const std::vector<int>& tokens, int vocab_size) {
  return falign::from_logits(chain_logits(tokens, vocab_size));
}

// The branch fixture: L=4, V=3, transition(1,2)=transition(1,3)=0.5 exactly,
// transition(2,4)=transition(3,4)=1, deterministic emissions
// vertex 1 -> token 0, vertex 2 -> token 1, vertex 3 -> token 2,
// vertex 4 -> token 1. Two paths, (1,2,4) and (1,3,4), each probability 1/2;
// they decode to [0,1,1] and [0,2,1].
inline falign::LatticeLogits b4_logits() {
  falign::LatticeLogits params;
  params.L = 4;
  params.vocab_size = 3;
  params.transition_logits = falign::Mat(4, 4, 0.0);
  params.transition_logits(0, 3) = kOff;  // vertex 1 cannot jump straight to 4
  params.transition_logits(1, 2) = kOff;  // vertex 2 goes only to 4
  params.emission_logits = falign::Mat(4, 3, kOff);
  params.emission_logits(0, 0) = 0.0;
  params.emission_logits(1, 1) = 0.0;
  params.emission_logits(2, 2) = 0.0;
  params.emission_logits(3, 1) = 0.0;
  return params;
}

inline falign::Lattice b4() { return falign::from_logits(b4_logits()); }

// All-zero logits: transition row i uniform over its successors, emission
// rows uniform over the vocabulary.
inline falign::LatticeLogits uniform_logits(int L, int vocab_size) {
  falign::LatticeLogits params;
  params.L = L;
  params.vocab_size = vocab_size;
  params.transition_logits = falign::Mat(L, L, 0.0);
  params.emission_logits = falign::Mat(L, vocab_size, 0.0);
  return params;
}

// splitmix64: a tiny platform-independent generator for drawing test inputs.
struct TestRng {
  std::uint64_t state;
  explicit TestRng(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  int below(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }
};

inline falign::Reference random_reference(TestRng& rng, int length, int vocab_size) {
  falign::Reference y;
  for (int i = 0; i < length; ++i) y.tokens.push_back(rng.below(vocab_size));
  return y;
}

// Runs f and reports which falign::ErrorKind it threw, if any.
template <class F>
std::optional<falign::ErrorKind> thrown_kind(F&& f) {
  try {
    f();
  } catch (const falign::Error& e) {
    return e.kind();
  } catch (...) {
    return std::nullopt;
  }
  return std::nullopt;
}

// A per-process scratch directory for file-based tests.
inline std::filesystem::path temp_dir() {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() /
             ("falign_tests_" + std::to_string(static_cast<unsigned long>(::getpid())));
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

}  // namespace testfix
