#pragma once

// Model parameters shared by the matrix builders and the scalar oracle.
// Kept free of any linear-algebra dependency.

#include "qtherm/error.hpp"

namespace qtherm {

/// Cavity mode (A) coupled to a two-level atom (B).
struct JcmParams {
  double omega_a = 6.283185307179586;
  double omega_b = 6.283185307179586;
  double gamma = 0.05;
  int n_max = 5;     // cavity dimension is n_max + 1
  bool rwa = false;  // drop the simultaneous-excitation terms

  double detuning() const { return omega_b - omega_a; }

  void validate() const {
    if (!(omega_a > 0.0) || !(omega_b > 0.0)) {
      throw PreconditionError("JcmParams: frequencies must be positive");
    }
    if (!(gamma >= 0.0)) throw PreconditionError("JcmParams: gamma must be >= 0");
    if (n_max < 1) throw PreconditionError("JcmParams: n_max must be >= 1");
  }
};

}  // namespace qtherm
