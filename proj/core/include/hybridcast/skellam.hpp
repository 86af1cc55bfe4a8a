#pragma once

namespace hybridcast::metrics {

/// Poisson probability of k events at intensity lambda >= 0.
double poisson_pmf(int k, double lambda);

/// P(G1 - G2 = k) for independent G1 ~ Poisson(lambda1), G2 ~ Poisson(lambda2).
/// Zero intensities are handled as the degenerate limits.
double skellam_pmf(int k, double lambda1, double lambda2);
double log_skellam_pmf(int k, double lambda1, double lambda2);

struct OutcomeProbs {
  double p_win = 0.0;
  double p_draw = 0.0;
  double p_loss = 0.0;

  double operator[](int outcome) const;  // 1 win, 2 draw, 3 loss
};

/// (P(K > 0), P(K = 0), P(K < 0)) for the Skellam difference K. Tails are
/// summed up to |k| <= max(40, an intensity-dependent bound) and the three
/// values renormalized.
OutcomeProbs outcome_probs(double lambda1, double lambda2);

}  // namespace hybridcast::metrics
