#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "hybridcast/rng.hpp"
#include "hybridcast/tournament_spec.hpp"

namespace hybridcast::bracket {

// Tournament spec with every name resolved to an index. Teams keep the order
// of spec.teams.
struct CompiledSpec {
  struct Fixture {
    int group = 0;
    int first = 0;
    int second = 0;
    int host = -1;  // team index playing at home, or -1
  };
  struct Source {
    SlotRef::Kind kind = SlotRef::Kind::team;
    int group = -1;
    int position = 0;
    int slot = -1;
    int round = -1;
    int match = -1;
    int team = -1;
  };
  struct Match {
    std::string id;
    Source first;
    Source second;
  };
  struct Round {
    std::string name;
    std::vector<Match> matches;
  };

  std::vector<std::string> teams;
  std::vector<std::string> group_names;
  std::vector<std::vector<int>> groups;
  std::vector<Fixture> fixtures;
  bool with_thirds = false;
  int best_thirds = 0;
  // Indexed by the bit mask of qualifying groups; entry per slot is a group index.
  std::vector<std::vector<int>> third_rows;
  std::vector<Round> rounds;

  int team_index(const std::string& team) const;
  /// Round names followed by "champion".
  std::vector<std::string> stage_names() const;
};

/// Validates and resolves a spec.
CompiledSpec compile(const TournamentSpec& spec);

// Result of a group stage: each group's final order and the group indices
// ordered by the strength of their third-placed team, best first.
struct GroupOutcome {
  std::vector<std::vector<int>> rankings;
  std::vector<int> thirds_order;
};

/// Plays the knockout rounds. `winner(a, b, round)` returns a or b.
/// `reached[t]` is set to the number of stages team t reached (0 when out in
/// the group stage, rounds.size() + 1 for the champion). Returns the champion.
template <class Winner>
int play_knockout(const CompiledSpec& spec, const GroupOutcome& groups, Winner&& winner, std::vector<int>& reached) {
  std::fill(reached.begin(), reached.end(), 0);
  std::vector<std::vector<int>> winners(spec.rounds.size());
  std::vector<int> third_slot_groups;
  if (spec.with_thirds) {
    unsigned mask = 0;
    for (int k = 0; k < spec.best_thirds; ++k) mask |= 1u << groups.thirds_order[static_cast<std::size_t>(k)];
    third_slot_groups = spec.third_rows[mask];
  }
  auto resolve = [&](const CompiledSpec::Source& s) -> int {
    switch (s.kind) {
      case SlotRef::Kind::group_position:
        return groups.rankings[static_cast<std::size_t>(s.group)][static_cast<std::size_t>(s.position - 1)];
      case SlotRef::Kind::third_slot:
        return groups.rankings[static_cast<std::size_t>(third_slot_groups[static_cast<std::size_t>(s.slot)])][2];
      case SlotRef::Kind::winner_of:
        return winners[static_cast<std::size_t>(s.round)][static_cast<std::size_t>(s.match)];
      case SlotRef::Kind::team:
        return s.team;
    }
    return -1;
  };
  int champion = -1;
  for (std::size_t r = 0; r < spec.rounds.size(); ++r) {
    const auto& round = spec.rounds[r];
    winners[r].resize(round.matches.size());
    for (std::size_t m = 0; m < round.matches.size(); ++m) {
      const int a = resolve(round.matches[m].first);
      const int b = resolve(round.matches[m].second);
      reached[static_cast<std::size_t>(a)] = static_cast<int>(r) + 1;
      reached[static_cast<std::size_t>(b)] = static_cast<int>(r) + 1;
      winners[r][m] = winner(a, b, static_cast<int>(r));
    }
  }
  champion = winners.back().front();
  reached[static_cast<std::size_t>(champion)] = static_cast<int>(spec.rounds.size()) + 1;
  return champion;
}

// Per-team probabilities of reaching each stage.
struct StageProbabilities {
  std::vector<std::string> teams;
  std::vector<std::string> stages;  // knockout rounds, then "champion"
  std::uint64_t runs = 0;
  std::vector<std::vector<std::uint64_t>> counts;  // [team][stage]
  std::vector<std::vector<double>> probs;
  std::vector<std::vector<double>> standard_errors;

  std::size_t team_index(const std::string& team) const;
  double champion(const std::string& team) const;
  double prob(const std::string& team, const std::string& stage) const;
};

/// Turns stage counts into frequencies and binomial standard errors.
StageProbabilities make_stage_probabilities(const CompiledSpec& spec, std::vector<std::vector<std::uint64_t>> counts,
                                            std::uint64_t runs);

/// Runs `replicate(rng, reached)` for replicate indices [0, runs) on
/// `workers` threads. Each replicate draws from its own stream seeded by
/// (seed, index) and counts are summed, so the result does not depend on the
/// number of workers.
template <class Replicate>
std::vector<std::vector<std::uint64_t>> run_replicates(std::size_t teams, std::size_t stages, std::uint64_t runs,
                                                       std::uint64_t seed, unsigned workers, Replicate&& replicate) {
  using Counts = std::vector<std::vector<std::uint64_t>>;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::uint64_t>(runs, 1))));
  std::vector<Counts> partial(workers, Counts(teams, std::vector<std::uint64_t>(stages, 0)));
  auto body = [&](unsigned w) {
    std::vector<int> reached(teams, 0);
    auto& counts = partial[w];
    const std::uint64_t begin = runs * w / workers;
    const std::uint64_t end = runs * (w + 1) / workers;
    for (std::uint64_t i = begin; i < end; ++i) {
      Rng rng(derive_seed(seed, i));
      replicate(rng, reached);
      for (std::size_t t = 0; t < teams; ++t)
        for (int s = 0; s < reached[t]; ++s) ++counts[t][static_cast<std::size_t>(s)];
    }
  };
  if (workers == 1) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (auto& th : pool) th.join();
  }
  Counts total(teams, std::vector<std::uint64_t>(stages, 0));
  for (const auto& p : partial)
    for (std::size_t t = 0; t < teams; ++t)
      for (std::size_t s = 0; s < stages; ++s) total[t][s] += p[t][s];
  return total;
}

/// Default worker count: hardware concurrency, at least 1.
unsigned default_workers();

}  // namespace hybridcast::bracket
