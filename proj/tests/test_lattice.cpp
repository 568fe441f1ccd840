#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "falign/lattice.hpp"
#include "falign/oracle.hpp"
#include "fixtures.hpp"

using namespace falign;

TEST_SUITE("lattice") {
  TEST_CASE("from_logits: a single legal successor gets probability 1") {
    Lattice lat = from_logits(testfix::uniform_logits(2, 1));
    CHECK(lat.trans(1, 2) == 1.0);
    CHECK(lat.trans(2, 1) == 0.0);
    CHECK(lat.trans(2, 2) == 0.0);
  }

  TEST_CASE("from_logits: equal logits split evenly") {
    Lattice lat = from_logits(testfix::uniform_logits(3, 2));
    CHECK(lat.trans(1, 2) == 0.5);
    CHECK(lat.trans(1, 3) == 0.5);
    CHECK(lat.trans(2, 3) == 1.0);
    CHECK(lat.emit(1, 0) == 0.5);
    CHECK(lat.emit(1, 1) == 0.5);
  }

  TEST_CASE("from_logits: ln 3 versus 0 gives the 3:1 split") {
    LatticeLogits params = testfix::uniform_logits(3, 2);
    params.transition_logits(0, 1) = std::log(3.0);
    params.transition_logits(0, 2) = 0.0;
    Lattice lat = from_logits(params);
    CHECK(std::abs(lat.trans(1, 2) - 0.75) <= 1e-12);
    CHECK(std::abs(lat.trans(1, 3) - 0.25) <= 1e-12);
  }

  TEST_CASE("from_logits rejects non-finite logits") {
    LatticeLogits params = testfix::uniform_logits(3, 2);
    params.emission_logits(1, 0) = std::nan("");
    CHECK(testfix::thrown_kind([&] { from_logits(params); }) == ErrorKind::kInvalidParameter);
    params = testfix::uniform_logits(3, 2);
    params.transition_logits(0, 1) = INFINITY;
    CHECK(testfix::thrown_kind([&] { from_logits(params); }) == ErrorKind::kInvalidParameter);
  }

  TEST_CASE("from_logits masks the lower triangle and the terminal row") {
    LatticeLogits params = testfix::uniform_logits(4, 2);
    // Garbage below the diagonal must be ignored, not normalized in.
    params.transition_logits(2, 0) = 50.0;
    params.transition_logits(3, 1) = 50.0;
    Lattice lat = from_logits(params);
    for (int i = 1; i <= 4; ++i) {
      for (int j = 1; j <= i; ++j) CHECK(lat.trans(i, j) == 0.0);
    }
    for (int j = 1; j <= 4; ++j) CHECK(lat.trans(4, j) == 0.0);
    CHECK(lat.trans(3, 4) == 1.0);
  }

  TEST_CASE("validate accepts a chain and reports specific violations") {
    CHECK(validate(testfix::chain({0, 1, 1}, 3)).ok);

    Lattice lat = testfix::chain({0, 1, 1}, 3);
    lat.trans(2, 1) = 0.1;
    ValidationVerdict verdict = validate(lat);
    REQUIRE_FALSE(verdict.ok);
    bool found = false;
    for (const Violation& v : verdict.violations) {
      if (v.row == 2 && v.col == 1) found = true;
    }
    CHECK_MESSAGE(found, "expected a lower-triangular violation at (2,1)");

    Lattice lat2 = testfix::chain({0, 1, 1}, 3);
    lat2.emit(2, 1) = 0.9;  // row sum now 0.9
    ValidationVerdict verdict2 = validate(lat2);
    REQUIRE_FALSE(verdict2.ok);
    bool residual_found = false;
    for (const Violation& v : verdict2.violations) {
      if (v.row == 2 && std::abs(std::abs(v.residual) - 0.1) <= 1e-12) residual_found = true;
    }
    CHECK_MESSAGE(residual_found, "expected an emission row-sum residual of 0.1 at row 2");

    CHECK(testfix::thrown_kind([&] { require_valid(lat); }) == ErrorKind::kValidation);
  }

  TEST_CASE("random_lattice is deterministic and seed-sensitive") {
    LatticeLogits a = random_lattice(7, 5, 3);
    LatticeLogits b = random_lattice(7, 5, 3);
    CHECK(a.transition_logits.data() == b.transition_logits.data());
    CHECK(a.emission_logits.data() == b.emission_logits.data());

    LatticeLogits c = random_lattice(8, 5, 3);
    CHECK(a.transition_logits.data() != c.transition_logits.data());

    CHECK(testfix::thrown_kind([&] { random_lattice(1, 1, 3); }) == ErrorKind::kInvalidSize);
  }

  TEST_CASE("random_lattice output always passes validate") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      LatticeLogits params = random_lattice(seed, 2 + static_cast<int>(seed % 7), 1 + seed % 4);
      CHECK(validate(from_logits(params)).ok);
    }
  }

  TEST_CASE("adding a constant to a logit row leaves the lattice unchanged") {
    LatticeLogits params = random_lattice(3, 6, 3);
    Lattice base = from_logits(params);
    LatticeLogits shifted = params;
    for (int j = 0; j < 6; ++j) shifted.transition_logits(1, j) += 3.7;
    for (int t = 0; t < 3; ++t) shifted.emission_logits(4, t) += -1.25;
    Lattice moved = from_logits(shifted);
    double dev = 0.0;
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        dev = std::max(dev, std::abs(base.transition(i, j) - moved.transition(i, j)));
      }
      for (int t = 0; t < 3; ++t) {
        dev = std::max(dev, std::abs(base.emission(i, t) - moved.emission(i, t)));
      }
    }
    CHECK(dev <= 1e-12);
  }

  TEST_CASE("every monotone walk of nonzero transitions ends at the terminal vertex") {
    auto walks_terminate = [](const Lattice& lat) {
      std::function<bool(int)> walk = [&](int v) -> bool {
        if (v == lat.L) return true;
        bool stepped = false;
        for (int j = v + 1; j <= lat.L; ++j) {
          if (lat.trans(v, j) > 0.0) {
            stepped = true;
            if (!walk(j)) return false;
          }
        }
        return stepped;  // a dead end before L would be a violation
      };
      return walk(1);
    };
    CHECK(walks_terminate(testfix::b4()));
    CHECK(walks_terminate(testfix::chain({0, 1, 0, 1}, 2)));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      CHECK(walks_terminate(from_logits(random_lattice(seed, 8, 3))));
    }
  }
}
