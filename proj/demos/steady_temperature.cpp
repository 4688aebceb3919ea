// Steady-state inverse temperature of the cavity as a function of the
// reservoir's, from the weak-coupling generator. Cold reservoirs cannot cool
// the cavity below the floor set by the measurement rate.

#include <cstdio>
#include <vector>

#include "qtherm/generators.hpp"

int main() {
  using namespace qtherm;
  JcmParams p;
  p.n_max = 5;
  const JointSystem sys = build_jcm(p);
  const std::vector<double> betas{0.25, 0.5, 1, 2, 4, 8, 16};
  const std::vector<double> lambdas{0.1 * p.omega_a, 0.2 * p.omega_a, p.omega_a};

  const std::vector<ScanPoint> pts = steady_scan(sys, betas, lambdas);
  std::printf("%10s %8s %12s %12s\n", "lambda", "beta", "beta_eff", "floor");
  for (const ScanPoint& s : pts) {
    if (!s.ok) {
      std::printf("%10.4f %8.2f  %s\n", s.lambda, s.beta, s.note.c_str());
      continue;
    }
    std::printf("%10.4f %8.2f %12.6f %12.6f\n", s.lambda, s.beta, s.beta_eff, min_temp_beta(s.lambda, p.omega_a));
  }
  return 0;
}
