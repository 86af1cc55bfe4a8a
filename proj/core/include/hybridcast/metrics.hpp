#pragma once

#include <span>

#include "hybridcast/skellam.hpp"

namespace hybridcast::metrics {

// Match outcomes from the first team's view: 1 win, 2 draw, 3 loss.
int outcome_of(int goals1, int goals2);

/// Ranked probability score: half the sum of squared cumulative differences.
double rps(const OutcomeProbs& probs, int outcome);

double multinomial_likelihood(const OutcomeProbs& probs, int outcome);

/// Most probable outcome; ties go to the lower index (win, then draw).
int argmax_outcome(const OutcomeProbs& probs);
int is_correct(const OutcomeProbs& probs, int outcome);

/// Three-way odds to probabilities: 1 / odds normalized to sum one.
OutcomeProbs threeway_from_odds(double odds_win, double odds_draw, double odds_loss);

/// Mean absolute error of predicted goals.
double mae_goals(std::span<const double> predicted, std::span<const int> actual);

struct GoalPair {
  double first = 0.0;
  double second = 0.0;
};
struct ScorePair {
  int first = 0;
  int second = 0;
};

/// Mean of |(y1 - y2) - (yhat1 - yhat2)|.
double mae_goal_diff(std::span<const GoalPair> predicted, std::span<const ScorePair> actual);

}  // namespace hybridcast::metrics
