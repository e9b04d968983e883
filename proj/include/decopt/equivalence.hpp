#pragma once

#include <cstdint>

#include "decopt/types.hpp"

namespace decopt {

// Max iterate deviation (infinity norm over the stack, max over iterations)
// between two implementations of the same recursion.
struct EquivalenceReport {
  double prox_forms = 0.0;      // Prox-GPDA per-agent form vs one-line form
  double extra_vs_prox = 0.0;   // EXTRA vs Prox-GPDA with W = I - 2 c alpha L
  double gt_forms = 0.0;        // GT two-variable form vs one-line form
  int iterations = 0;

  bool passed(double tol = 1e-10) const {
    return prox_forms <= tol && extra_vs_prox <= tol && gt_forms <= tol;
  }
};

EquivalenceReport verify_equivalences(std::uint64_t seed, int iterations = 50);

}  // namespace decopt
