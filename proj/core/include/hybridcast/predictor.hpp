#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "hybridcast/common.hpp"
#include "hybridcast/ingest.hpp"

namespace hybridcast::predict {

/// Difference features in column order: the covariates, then hist_ability,
/// bookmaker_log_ability, avg_pm and missing_pm_players.
const std::vector<std::string>& feature_names();

/// Design columns of the regression: feature_names() plus "groupstage".
std::vector<std::string> design_names();

// One team's side of a tournament match. The paired row of the same match
// carries the negated differences.
struct FeatureRow {
  int edition = 0;
  std::string match_id;
  Date date;
  std::string team;
  std::string opponent;
  int goals = 0;  // after 90 minutes
  int groupstage = 1;
  Date as_of;  // latest date of any data behind the features
  std::vector<double> differences;

  friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

// A played tournament match with its stage label.
struct TournamentMatch {
  int edition = 0;
  std::string match_id;
  Date date;
  std::string team1;
  std::string team2;
  int goals1 = 0;
  int goals2 = 0;
  bool groupstage = true;
};

std::vector<TournamentMatch> parse_tournament_matches(const std::filesystem::path& path);
std::vector<TournamentMatch> parse_tournament_matches_text(std::string_view text,
                                                           const std::string& source = "tournament_matches.csv");

// The three rating features of one team in one edition.
struct HybridFeatures {
  Date as_of;
  double hist_ability = 0.0;
  double bookmaker_log_ability = 0.0;
  double avg_pm = 0.0;
  double missing_pm_players = 0.0;
};
using HybridTable = std::map<std::pair<int, std::string>, HybridFeatures>;

HybridTable parse_team_features(const std::filesystem::path& path);
HybridTable parse_team_features_text(std::string_view text, const std::string& source = "team_features.csv");
void write_team_features(std::ostream& out, const HybridTable& table);

/// Two rows per match with differences from each row's team's view. Throws
/// ValidationError when a team lacks covariates or rating features.
std::vector<FeatureRow> assemble_features(const std::vector<CovariateRecord>& covariates, const HybridTable& hybrid,
                                          const std::vector<TournamentMatch>& matches);

/// Differences of `team` against `opponent` for one edition.
std::vector<double> difference_vector(const CovariateRecord& team, const CovariateRecord& opponent,
                                      const HybridFeatures& team_hybrid, const HybridFeatures& opponent_hybrid);

std::vector<FeatureRow> parse_features(const std::filesystem::path& path);
std::vector<FeatureRow> parse_features_text(std::string_view text, const std::string& source = "features.csv");
void write_features(std::ostream& out, const std::vector<FeatureRow>& rows);

// ---------------------------------------------------------------- lasso

struct PathPoint {
  double lambda = 0.0;
  double intercept = 0.0;
  std::vector<double> coefficients;  // original scale, design_names() order
  int sweeps = 0;
  bool converged = false;
};

struct CvPoint {
  double lambda = 0.0;
  double mean_deviance = 0.0;
  double se_deviance = 0.0;
};

struct LassoFit {
  std::vector<std::string> names;
  double intercept = 0.0;
  std::vector<double> coefficients;
  double lambda = 0.0;
  std::vector<CvPoint> cv;
  std::vector<PathPoint> path;

  double linear_predictor(const FeatureRow& row) const;
};

struct LassoOptions {
  int folds = 10;
  std::uint64_t seed = 1;
  int grid_size = 50;
  double min_ratio = 1e-4;
  std::optional<std::vector<double>> lambda_grid;  // overrides the generated grid
  bool one_se_rule = false;
  int max_sweeps = 10000;
  double tolerance = 1e-10;
  unsigned workers = 0;
};

// Penalized objective, on standardized columns:
//   -(1/N) loglik(b0, b) + lambda * sum_j |b_j|.
// Coordinate descent with a closed-form intercept and damped proximal
// Newton steps per coordinate; the objective never increases.
PathPoint fit_lasso_at(const std::vector<FeatureRow>& rows, double lambda, const LassoOptions& options = {});

/// Smallest lambda at which every coefficient is zero.
double lambda_max(const std::vector<FeatureRow>& rows);

/// Path over the lambda grid with cross-validation; the chosen lambda has
/// minimal mean held-out deviance (or the largest within one standard error
/// of it with `one_se_rule`).
LassoFit fit_lasso_poisson(const std::vector<FeatureRow>& rows, const LassoOptions& options = {});

/// Fold index per row: matches of each edition are shuffled and dealt
/// round robin, and both rows of a match share a fold.
std::vector<int> assign_folds(const std::vector<FeatureRow>& rows, int folds, std::uint64_t seed);

double predict_intensity(const LassoFit& fit, const FeatureRow& row);

/// 2 * sum(y log(y / mu) - (y - mu)).
double poisson_deviance(const std::vector<int>& y, const std::vector<double>& mu);

void write_model(std::ostream& out, const LassoFit& fit);
LassoFit parse_model(const std::filesystem::path& path);
LassoFit parse_model_text(std::string_view text, const std::string& source = "model.csv");
void write_cv_curve(std::ostream& out, const LassoFit& fit);

// ------------------------------------------------- external predictions

struct MatchIntensity {
  double lambda_home = 0.0;
  double lambda_away = 0.0;
};
// model name -> match id -> intensities
using PredictionSets = std::map<std::string, std::map<std::string, MatchIntensity>>;

/// Throws ParseError for nonpositive intensities, duplicate rows, or
/// match ids outside `known_matches` when it is non-empty.
PredictionSets load_external_predictions(const std::filesystem::path& path,
                                         const std::vector<std::string>& known_matches = {});
PredictionSets parse_predictions_text(std::string_view text, const std::vector<std::string>& known_matches = {},
                                      const std::string& source = "predictions.csv");
void write_predictions(std::ostream& out, const PredictionSets& sets);

/// Per match: the intensities of the first-listed and second-listed team.
std::map<std::string, MatchIntensity> predict_matches(const LassoFit& fit, const std::vector<FeatureRow>& rows);

/// Single-model intensities: match_id,lambda_home,lambda_away.
void write_intensities(std::ostream& out, const std::map<std::string, MatchIntensity>& intensities);
std::map<std::string, MatchIntensity> parse_intensities(const std::filesystem::path& path);

}  // namespace hybridcast::predict
