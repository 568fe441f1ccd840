#pragma once

#include <vector>

#include "falign/fuzzy.hpp"
#include "falign/lattice.hpp"
#include "falign/pathdp.hpp"

namespace falign {

// Exact gradients with respect to the unconstrained logits. Masked transition
// coordinates (j <= i and all of row L) are exactly zero.
struct GradientBundle {
  Mat d_transition_logits;  // L x L
  Mat d_emission_logits;    // L x vocab_size
  double loss_value = 0.0;
};

// Reverse-mode pass through the alignment-loss recurrences. Subgradient
// conventions at the two kinks:
//   - min(E[C_g], C_g(y)) at equality takes the constant branch (no gradient
//     through the expected count),
//   - the brevity penalty at expected_length == |y| takes the constant
//     branch (bp = 1, zero gradient).
GradientBundle fa_loss_grad(const LatticeLogits& params, const Reference& y, int n);

// Forward-backward pass for -log P(y|x): posterior transition and emission
// occupancies chained through the masked softmax rows. Throws
// kUndefinedGradient when P(y|x) underflows to zero.
GradientBundle nll_loss_grad(const LatticeLogits& params, const Reference& y);

enum class LossKind { kFuzzyAlignment, kNll };

struct CheckCoord {
  bool is_emission = false;
  int row = 0;  // 1-based vertex
  int col = 0;  // transition: 1-based target vertex; emission: 0-based token id
};

struct CheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  CheckCoord worst;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int checked = 0;                  // coordinates actually compared
  std::vector<CheckCoord> skipped;  // kink-adjacent coordinates, reported instead of checked
};

// Central finite differences (step 1e-5) on every logit coordinate against
// the analytic gradient. A coordinate is skipped (and reported) when its
// evaluation interval comes within 1e-7 of a min()/brevity-penalty clipping
// boundary or crosses one, since the loss is not differentiable there.
// Pass criterion: relative error <= 1e-4 with an absolute floor of 1e-8 for
// near-zero gradients.
CheckReport finite_diff_check(const LatticeLogits& params, const Reference& y, int n,
                              LossKind which);

}  // namespace falign
