#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hybridcast/bracket.hpp"
#include "hybridcast/ingest.hpp"
#include "hybridcast/tournament_spec.hpp"

namespace hybridcast::consensus {

/// Payout share delta of one bookmaker: the root on (0, 1] of
/// sum_i 1 / ((q_i - 1) / delta + 1) = 1. Throws ValidationError when the
/// book pays out more than it takes (no root) or for odds <= 1.
double solve_delta(std::span<const double> quoted);

/// Winning probabilities 1 / (odds_i + 1) with odds_i = (q_i - 1) / delta.
std::vector<double> implied_probs(std::span<const double> quoted, double delta);

struct BookmakerMargin {
  std::string bookmaker;
  double delta = 1.0;
  double overround = 0.0;  // 1 - delta
};

std::vector<BookmakerMargin> margins(const OddsTable& table);

/// Per-team consensus in table.teams() order: inverse logit of the mean
/// logit across bookmakers, renormalized to sum to one.
std::vector<double> consensus_probs(const OddsTable& table);

/// a / (a + b).
double bt_win_prob(double ability_a, double ability_b);

struct SimulationOptions {
  std::uint64_t runs = 100000;
  std::uint64_t seed = 1;
  unsigned workers = 0;  // 0: hardware concurrency
};

/// Win/lose-only tournament with Bradley-Terry matches. Abilities are
/// aligned with spec.teams and must be positive. Group ties, including the
/// order of third-placed teams, are broken by fictitious matches among the
/// tied teams.
bracket::StageProbabilities simulate_tournament_bt(std::span<const double> abilities, const TournamentSpec& spec,
                                                   const SimulationOptions& options);

struct InversionOptions {
  std::uint64_t runs = 100000;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  double tolerance = 1e-3;  // max absolute probability difference
  int max_iterations = 60;
  double step = 0.5;
};

struct InversionResult {
  std::vector<double> log_abilities;  // mean zero, aligned with spec.teams
  std::vector<double> simulated;      // championship probabilities at the result
  std::vector<double> residual_trace;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Finds log-abilities whose simulated championship probabilities match
/// `targets` (aligned with spec.teams). Iterates
/// s <- s + step * (log target - log simulated), re-centered, with common
/// random numbers across iterations: first at runs / 10, then at full runs.
/// The step is halved whenever the residual grows. On non-convergence the
/// best iterate is returned with `converged == false`.
InversionResult infer_abilities(std::span<const double> targets, const TournamentSpec& spec,
                                const InversionOptions& options);

struct ConsensusResult {
  std::vector<std::string> teams;  // spec order
  std::vector<BookmakerMargin> margins;
  std::vector<double> probs;
  InversionResult inversion;
};

/// Margins, consensus probabilities and log-abilities for a tournament.
/// The odds must cover exactly the spec's teams.
ConsensusResult run(const OddsTable& table, const TournamentSpec& spec, const InversionOptions& options);

}  // namespace hybridcast::consensus
