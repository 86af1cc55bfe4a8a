#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hybridcast/bracket.hpp"
#include "hybridcast/rng.hpp"
#include "hybridcast/tournament_spec.hpp"

namespace hybridcast::sim {

enum class Stage { group, knockout };

struct MatchContext {
  Stage stage = Stage::group;
  bool team_at_home = false;
  bool opponent_at_home = false;
};

// Expected goals (team, opponent) for one match.
using IntensitySource =
    std::function<std::pair<double, double>(const std::string& team, const std::string& opponent, const MatchContext&)>;

// Group tie-break order. `footnote`: points, goal difference, goals scored,
// then the same three criteria on the mutual matches of teams still level,
// then lot. `uefa`: head-to-head points, goal difference and goals first
// (reapplied to a smaller tied subset), then overall goal difference and
// goals, then lot.
enum class TieBreak { footnote, uefa };

struct SimConfig {
  std::uint64_t runs = 100000;
  std::uint64_t seed = 1;
  double extra_time_factor = 1.0 / 3.0;
  unsigned workers = 0;  // 0: hardware concurrency
  TieBreak tie_break = TieBreak::footnote;
};

/// Independent Poisson goals.
std::pair<int, int> simulate_match(double lambda1, double lambda2, Rng& rng);

/// True when the first team advances: 90 minutes, then extra time at
/// factor-scaled intensities, then a fair coin.
bool simulate_knockout_match(double lambda1, double lambda2, double factor, Rng& rng);

struct MatchScore {
  std::string team1;
  std::string team2;
  int goals1 = 0;
  int goals2 = 0;
};

/// Final order of a group given all of its round-robin results. Throws
/// ValidationError unless every pairing was played exactly once.
std::vector<std::string> group_table(const std::vector<MatchScore>& results, Rng& rng,
                                     TieBreak rule = TieBreak::footnote);

struct Replicate {
  bracket::GroupOutcome groups;
  std::vector<int> reached;  // stages reached per team, spec order
  int champion = -1;
};

// Tournament simulation with intensities evaluated once up front: one pair
// per scheduled group match and a neutral-ground pair for every possible
// knockout pairing.
class TournamentSimulator {
 public:
  TournamentSimulator(const TournamentSpec& spec, const IntensitySource& source, SimConfig config);

  const bracket::CompiledSpec& compiled() const { return spec_; }
  const SimConfig& config() const { return config_; }

  /// Replicate `index` of the run, drawn from its own seeded stream.
  Replicate simulate_once(std::uint64_t index) const;
  bracket::StageProbabilities run() const;

 private:
  void play(Rng& rng, Replicate& out) const;

  bracket::CompiledSpec spec_;
  SimConfig config_;
  std::vector<std::pair<double, double>> group_lambdas_;  // per fixture
  std::vector<double> knockout_lambda_;                   // [a * n + b]: goals of a against b
};

bracket::StageProbabilities run_tournament(const SimConfig& config, const TournamentSpec& spec,
                                           const IntensitySource& source);

}  // namespace hybridcast::sim
