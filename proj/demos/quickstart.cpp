// Solve one SLOPE problem with AMP and compare against FISTA.

#include <cstdio>

#include "slope_amp/slope_amp.hpp"

using namespace slope_amp;

int main() {
  const Index n = 250, p = 500;
  const PriorSpec prior = PriorSpec::bernoulli_gaussian(0.1, 1.0);
  const ProblemInstance inst = gen_instance(n, p, prior, 0.0, 7);

  // Penalty and the matching AMP threshold direction.
  const LambdaSeq lambda = LambdaSeq::bhq(p, 0.1, 0.15);
  SeConfig se;
  se.p_se = p;
  se.delta = inst.delta;
  const CalibrationResult cal = alpha_of_lambda(lambda, prior, se);
  std::printf("alpha scale %.4f, predicted tau*^2 %.5f\n", cal.alpha_scale, cal.tau_star_sq);

  AmpConfig cfg;
  cfg.alpha = cal.alpha;
  const AmpResult amp = amp_run(inst.X, inst.y, cfg);
  std::printf("AMP: %d iterations, tau_hat^2 %.5f\n", amp.state.iter,
              amp.state.tau_hat * amp.state.tau_hat);

  const LambdaSeq solved = fixed_point_lambda(amp.state, cal.alpha, n);
  const Vector beta_hat = reference_solution(inst.X, inst.y, solved);
  std::printf("||beta_amp - beta_hat||^2 / p = %.3e\n", opt_error(amp.state.beta, beta_hat));
  std::printf("||beta_hat - beta||^2 / p     = %.5f (predicted %.5f)\n",
              opt_error(beta_hat, inst.beta_true), predicted_mse(cal.tau_star_sq, se));
}
