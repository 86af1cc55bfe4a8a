#include "hybridcast/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace hybridcast::metrics {

namespace {

void check_outcome(int outcome) {
  if (outcome < 1 || outcome > 3) throw std::invalid_argument("outcome must be 1, 2 or 3");
}

}  // namespace

int outcome_of(int goals1, int goals2) { return goals1 > goals2 ? 1 : goals1 == goals2 ? 2 : 3; }

double rps(const OutcomeProbs& probs, int outcome) {
  check_outcome(outcome);
  const double c1 = probs.p_win - (outcome == 1 ? 1.0 : 0.0);
  const double c2 = c1 + probs.p_draw - (outcome == 2 ? 1.0 : 0.0);
  return 0.5 * (c1 * c1 + c2 * c2);
}

double multinomial_likelihood(const OutcomeProbs& probs, int outcome) {
  check_outcome(outcome);
  return probs[outcome];
}

int argmax_outcome(const OutcomeProbs& probs) {
  int best = 1;
  for (int r = 2; r <= 3; ++r)
    if (probs[r] > probs[best]) best = r;
  return best;
}

int is_correct(const OutcomeProbs& probs, int outcome) {
  check_outcome(outcome);
  return argmax_outcome(probs) == outcome ? 1 : 0;
}

OutcomeProbs threeway_from_odds(double odds_win, double odds_draw, double odds_loss) {
  if (!(odds_win > 0.0) || !(odds_draw > 0.0) || !(odds_loss > 0.0))
    throw std::invalid_argument("three-way odds must be positive");
  const double a = 1.0 / odds_win, b = 1.0 / odds_draw, c = 1.0 / odds_loss;
  const double total = a + b + c;
  return {a / total, b / total, c / total};
}

double mae_goals(std::span<const double> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size() || predicted.empty())
    throw std::invalid_argument("mae_goals: sizes must match and be nonzero");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) s += std::abs(actual[i] - predicted[i]);
  return s / static_cast<double>(predicted.size());
}

double mae_goal_diff(std::span<const GoalPair> predicted, std::span<const ScorePair> actual) {
  if (predicted.size() != actual.size() || predicted.empty())
    throw std::invalid_argument("mae_goal_diff: sizes must match and be nonzero");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    s += std::abs((actual[i].first - actual[i].second) - (predicted[i].first - predicted[i].second));
  return s / static_cast<double>(predicted.size());
}

}  // namespace hybridcast::metrics
