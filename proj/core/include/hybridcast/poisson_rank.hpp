#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hybridcast/common.hpp"
#include "hybridcast/ingest.hpp"

namespace hybridcast::rank {

struct DecayConfig {
  double half_period_days = 1095.0;
  Date as_of;
};

enum class ModelKind { independent, bivariate };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

/// (1/2)^(days_back / half_period). Throws std::invalid_argument for
/// negative `days_back` or nonpositive `half_period`.
double time_weight(double days_back, double half_period);

/// Bivariate Poisson probability of the score (z, y); `lambda_c = 0` gives
/// the product of two independent Poisson pmfs. Evaluated in log space.
double bivariate_pmf(int z, int y, double lambda1, double lambda2, double lambda_c);
double log_bivariate_pmf(int z, int y, double lambda1, double lambda2, double lambda_c);

struct StandardErrors {
  double intercept = 0.0;
  double home_effect = 0.0;
  double covariance = 0.0;
  std::map<std::string, double> strengths;
};

struct FitDiagnostics {
  double log_likelihood = 0.0;
  std::vector<double> trace;  // weighted log-likelihood after each iteration
  int iterations = 0;
  double gradient_norm = 0.0;  // max-norm at the returned point
  std::size_t components = 1;  // connected components of the match graph
  bool identifiable = true;    // false when components > 1
};

/// Fitted team strengths. Strengths sum to zero; covariance is zero exactly
/// for the independent model.
struct RatingSet {
  double intercept = 0.0;
  double home_effect = 0.0;
  double covariance = 0.0;
  std::map<std::string, double> strengths;
  ModelKind model_kind = ModelKind::bivariate;
  Date fitted_as_of;
  FitDiagnostics diagnostics;
  std::optional<StandardErrors> standard_errors;

  double strength(const std::string& team) const;
};

/// exp(intercept + (r_i - r_j) + home_effect * [i at home]).
double intensity(const RatingSet& ratings, const std::string& team_i, const std::string& team_j, bool i_at_home);

enum class Venue { neutral, first_at_home, second_at_home };

struct MatchIntensities {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda_c = 0.0;
};

MatchIntensities predict_match(const RatingSet& ratings, const std::string& team_i, const std::string& team_j,
                               Venue venue);

struct FitOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;
  bool compute_standard_errors = false;
  // Fix the covariance at zero in the bivariate likelihood instead of fitting it.
  bool fix_covariance_at_zero = false;
};

/// Weighted maximum-likelihood fit with the zero-sum constraint on strengths.
/// Throws ValidationError for matches after `as_of` or an empty match list,
/// ConvergenceError if the gradient criterion is not met in time.
RatingSet fit_ratings(std::span<const MatchRecord> matches, const DecayConfig& config, ModelKind kind,
                      const FitOptions& options = {});

/// Matches dated on or before `as_of`.
std::vector<MatchRecord> matches_up_to(std::span<const MatchRecord> matches, Date as_of);

// Objective on the unconstrained parameter vector
// [intercept, home, r_0 .. r_{n-2}, (log covariance)], exposed for
// gradient checks. Teams are indexed in sorted order.
class Likelihood {
 public:
  Likelihood(std::span<const MatchRecord> matches, const DecayConfig& config, ModelKind kind);

  std::size_t parameter_count() const;
  std::size_t team_count() const { return teams_.size(); }
  const std::vector<std::string>& teams() const { return teams_; }

  /// Weighted log-likelihood; fills `gradient` when non-null.
  double evaluate(const std::vector<double>& params, std::vector<double>* gradient) const;
  /// Same likelihood, bivariate form with an explicit covariance (may be 0).
  double evaluate_with_covariance(const std::vector<double>& params, double lambda_c) const;

  std::vector<double> initial_parameters() const;
  std::vector<double> strengths(const std::vector<double>& params) const;

 private:
  struct Obs {
    std::size_t i, j;
    int z, y;
    bool i_home, j_home;
    double weight;
  };
  std::vector<std::string> teams_;
  std::vector<Obs> obs_;
  ModelKind kind_;
};

}  // namespace hybridcast::rank
