#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hybridcast/metrics.hpp"
#include "hybridcast/predictor.hpp"

namespace hybridcast::metrics {

struct Forecast {
  OutcomeProbs probs;
  std::optional<predict::MatchIntensity> intensities;  // absent for pure outcome forecasts
};
using Forecasts = std::map<std::string, Forecast>;  // by match id

Forecast from_intensities(double lambda1, double lambda2);

// A forecasting method: given training rows, forecast every match of the
// held-out rows.
struct Method {
  std::string name;
  std::function<Forecasts(const std::vector<predict::FeatureRow>& train, const std::vector<predict::FeatureRow>& test)>
      forecast;
};

/// Lasso Poisson regression refitted on every training set.
Method lasso_method(std::string name, predict::LassoOptions options);
/// Fixed intensities per match, e.g. produced by an external model.
Method intensity_method(std::string name, std::map<std::string, predict::MatchIntensity> intensities);
/// Fixed outcome probabilities per match, e.g. three-way bookmaker odds.
Method outcome_method(std::string name, std::map<std::string, OutcomeProbs> probs);

/// match_id,odds_win,odds_draw,odds_loss -> normalized probabilities.
std::map<std::string, OutcomeProbs> parse_threeway_odds(const std::filesystem::path& path);
std::map<std::string, OutcomeProbs> parse_threeway_odds_text(std::string_view text,
                                                             const std::string& source = "threeway.csv");

struct MethodScores {
  std::string method;
  std::size_t matches = 0;
  double likelihood = 0.0;      // mean probability of the observed outcome
  double classification = 0.0;  // share of matches whose outcome was the most probable one
  double rps = 0.0;
  double mae_goals = 0.0;  // NaN without intensities
  double mae_goal_diff = 0.0;
};

struct FoldReport {
  int edition = 0;
  std::vector<MethodScores> methods;
};

struct EvaluationReport {
  std::vector<MethodScores> overall;
  std::vector<FoldReport> folds;
};

/// Scores the forecasts of `methods` on the given matches (two rows each).
MethodScores score(const std::string& method, const std::vector<predict::FeatureRow>& rows, const Forecasts& forecasts);

/// Leave-one-tournament-out: each edition is held out once and every method
/// is trained on the others. Throws LeakageError when a row's features are
/// dated after the start of its own edition (its earliest match date), and
/// ValidationError for fewer than two editions.
EvaluationReport loto_evaluate(const std::vector<predict::FeatureRow>& rows, const std::vector<Method>& methods);

void write_report(std::ostream& out, const EvaluationReport& report);

}  // namespace hybridcast::metrics
