// A single cavity photon leaks into a stream of cold two-level atoms that are
// measured at Poisson-distributed times. Prints the mean cavity energy and the
// cumulative heat and work booked to the cavity, next to the exponential decay
// predicted by the Poisson-averaged single-photon transfer probability.

#include <cmath>
#include <cstdio>

#include "qtherm/analytic.hpp"
#include "qtherm/engine.hpp"

int main() {
  using namespace qtherm;
  JcmParams p;  // resonant, gamma = 0.05
  p.n_max = 6;
  const JointSystem sys = build_jcm(p);

  ProcessConfig cfg;
  cfg.lambda = 0.01;
  cfg.beta.values = {4.0};
  cfg.horizon = 600.0;
  cfg.mode = ProcessMode::Trajectory;
  cfg.n_traj = 2000;
  cfg.initial_state_a = StateVector::basis(sys.dim_a, 1);
  for (int k = 0; k <= 12; ++k) cfg.checkpoints.push_back(50.0 * k);

  const ProcessResult res = run_process(cfg, sys);
  // each measurement removes the photon with probability <|b_1|^2>
  const double rate = cfg.lambda * analytic::mean_b2_poisson(1, cfg.lambda, p);
  const double e_inf = p.omega_a * 0.5;
  std::printf("%8s %12s %10s %12s %12s %12s\n", "t", "<H_A>", "se", "averaged", "Q_cum", "W_cum");
  for (const Checkpoint& c : res.checkpoints) {
    const double avg = e_inf + p.omega_a * std::exp(-rate * c.t);
    std::printf("%8.1f %12.6f %10.2e %12.6f %12.6f %12.6f\n", c.t, c.mean_ha, c.se_ha, avg, c.q_cum, c.w_cum);
  }
  if (res.truncation_suspect) std::printf("warning: top Fock level populated; raise n_max\n");
  return 0;
}
