#include "hybridcast/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hybridcast::consensus {

namespace {

double payout_sum(std::span<const double> quoted, double delta) {
  double s = 0.0;
  for (const double q : quoted) s += 1.0 / ((q - 1.0) / delta + 1.0);
  return s;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

// Orders `block` completely by repeated round robins among still-tied teams.
void resolve_ties(std::vector<int>& block, std::span<const double> ability, Rng& rng) {
  if (block.size() < 2) return;
  std::vector<int> wins(block.size(), 0);
  for (std::size_t a = 0; a < block.size(); ++a)
    for (std::size_t b = a + 1; b < block.size(); ++b) {
      const double pa = ability[static_cast<std::size_t>(block[a])];
      const double pb = ability[static_cast<std::size_t>(block[b])];
      if (rng.uniform() < pa / (pa + pb)) ++wins[a];
      else ++wins[b];
    }
  std::vector<std::size_t> order(block.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return wins[x] > wins[y]; });
  std::vector<int> sorted;
  std::vector<int> sorted_wins;
  for (auto k : order) {
    sorted.push_back(block[k]);
    sorted_wins.push_back(wins[k]);
  }
  // All tied: play again; otherwise recurse into each tied run.
  for (std::size_t lo = 0; lo < sorted.size();) {
    std::size_t hi = lo + 1;
    while (hi < sorted.size() && sorted_wins[hi] == sorted_wins[lo]) ++hi;
    if (hi - lo > 1) {
      std::vector<int> run(sorted.begin() + static_cast<long>(lo), sorted.begin() + static_cast<long>(hi));
      resolve_ties(run, ability, rng);
      std::copy(run.begin(), run.end(), sorted.begin() + static_cast<long>(lo));
    }
    lo = hi;
  }
  block = std::move(sorted);
}

// Sorts `items` by descending score and breaks ties with fictitious matches.
void rank_by_wins(std::vector<int>& items, const std::vector<int>& score, std::span<const double> ability, Rng& rng) {
  std::stable_sort(items.begin(), items.end(), [&](int a, int b) {
    return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
  });
  for (std::size_t lo = 0; lo < items.size();) {
    std::size_t hi = lo + 1;
    while (hi < items.size() &&
           score[static_cast<std::size_t>(items[hi])] == score[static_cast<std::size_t>(items[lo])])
      ++hi;
    if (hi - lo > 1) {
      std::vector<int> run(items.begin() + static_cast<long>(lo), items.begin() + static_cast<long>(hi));
      resolve_ties(run, ability, rng);
      std::copy(run.begin(), run.end(), items.begin() + static_cast<long>(lo));
    }
    lo = hi;
  }
}

bracket::GroupOutcome bt_group_stage(const bracket::CompiledSpec& spec, std::span<const double> ability, Rng& rng) {
  bracket::GroupOutcome out;
  if (spec.groups.empty()) return out;
  std::vector<int> wins(spec.teams.size(), 0);
  for (const auto& f : spec.fixtures) {
    const double a = ability[static_cast<std::size_t>(f.first)];
    const double b = ability[static_cast<std::size_t>(f.second)];
    ++wins[static_cast<std::size_t>(rng.uniform() < a / (a + b) ? f.first : f.second)];
  }
  out.rankings = spec.groups;
  for (auto& g : out.rankings) rank_by_wins(g, wins, ability, rng);
  if (spec.with_thirds) {
    std::vector<int> thirds;
    for (const auto& g : out.rankings) thirds.push_back(g[2]);
    std::vector<int> order = thirds;
    rank_by_wins(order, wins, ability, rng);
    for (int t : order)
      out.thirds_order.push_back(static_cast<int>(std::find(thirds.begin(), thirds.end(), t) - thirds.begin()));
  }
  return out;
}

bracket::StageProbabilities simulate_compiled(std::span<const double> abilities, const bracket::CompiledSpec& spec,
                                              const SimulationOptions& options) {
  const unsigned workers = options.workers ? options.workers : bracket::default_workers();
  auto counts = bracket::run_replicates(
      spec.teams.size(), spec.rounds.size() + 1, options.runs, options.seed, workers,
      [&](Rng& rng, std::vector<int>& reached) {
        const auto groups = bt_group_stage(spec, abilities, rng);
        bracket::play_knockout(
            spec, groups,
            [&](int a, int b, int) {
              const double pa = abilities[static_cast<std::size_t>(a)];
              const double pb = abilities[static_cast<std::size_t>(b)];
              return rng.uniform() < pa / (pa + pb) ? a : b;
            },
            reached);
      });
  return bracket::make_stage_probabilities(spec, std::move(counts), options.runs);
}

}  // namespace

double solve_delta(std::span<const double> quoted) {
  if (quoted.size() < 2) throw ValidationError("solve_delta: at least two outcomes required");
  for (const double q : quoted)
    if (!(q > 1.0)) throw ValidationError("solve_delta: quoted odds must exceed 1");
  const double at_one = payout_sum(quoted, 1.0);
  if (at_one < 1.0)
    throw ValidationError("solve_delta: no payout share in (0, 1]; implied probabilities sum to " +
                          std::to_string(at_one) + " at delta = 1");
  double lo = 1e-9, hi = 1.0;
  if (std::abs(at_one - 1.0) < 1e-12) return 1.0;
  double mid = hi;
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double f = payout_sum(quoted, mid) - 1.0;
    if (std::abs(f) < 1e-12) break;
    (f > 0.0 ? hi : lo) = mid;
  }
  return mid;
}

std::vector<double> implied_probs(std::span<const double> quoted, double delta) {
  std::vector<double> p;
  p.reserve(quoted.size());
  for (const double q : quoted) p.push_back(1.0 / ((q - 1.0) / delta + 1.0));
  return p;
}

std::vector<BookmakerMargin> margins(const OddsTable& table) {
  std::vector<BookmakerMargin> out;
  for (std::size_t b = 0; b < table.bookmakers().size(); ++b) {
    const double d = solve_delta(table.quotes_for(b));
    out.push_back({table.bookmakers()[b], d, 1.0 - d});
  }
  return out;
}

std::vector<double> consensus_probs(const OddsTable& table) {
  const std::size_t n = table.teams().size();
  const std::size_t books = table.bookmakers().size();
  if (books == 0 || n < 2) throw ValidationError("consensus needs at least one bookmaker and two teams");
  std::vector<double> mean_logit(n, 0.0);
  for (std::size_t b = 0; b < books; ++b) {
    const auto p = implied_probs(table.quotes_for(b), solve_delta(table.quotes_for(b)));
    for (std::size_t t = 0; t < n; ++t) mean_logit[t] += logit(p[t]) / static_cast<double>(books);
  }
  std::vector<double> out(n);
  double sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    out[t] = 1.0 / (1.0 + std::exp(-mean_logit[t]));
    sum += out[t];
  }
  for (auto& p : out) p /= sum;
  return out;
}

double bt_win_prob(double ability_a, double ability_b) {
  if (!(ability_a > 0.0) || !(ability_b > 0.0)) throw std::invalid_argument("bt_win_prob: abilities must be positive");
  // Complement form for the stronger side keeps p(a, b) + p(b, a) == 1.
  if (ability_a <= ability_b) return ability_a / (ability_a + ability_b);
  return 1.0 - ability_b / (ability_a + ability_b);
}

bracket::StageProbabilities simulate_tournament_bt(std::span<const double> abilities, const TournamentSpec& spec,
                                                   const SimulationOptions& options) {
  const auto compiled = bracket::compile(spec);
  if (abilities.size() != compiled.teams.size())
    throw ValidationError("expected " + std::to_string(compiled.teams.size()) + " abilities, got " +
                          std::to_string(abilities.size()));
  for (const double a : abilities)
    if (!(a > 0.0) || !std::isfinite(a)) throw ValidationError("abilities must be positive and finite");
  return simulate_compiled(abilities, compiled, options);
}

InversionResult infer_abilities(std::span<const double> targets, const TournamentSpec& spec,
                                const InversionOptions& options) {
  const auto compiled = bracket::compile(spec);
  const std::size_t n = compiled.teams.size();
  if (targets.size() != n)
    throw ValidationError("expected " + std::to_string(n) + " target probabilities, got " +
                          std::to_string(targets.size()));
  double total = 0.0;
  for (const double p : targets) {
    if (!(p > 0.0)) throw ValidationError("target probabilities must be positive");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) throw ValidationError("target probabilities must sum to 1");
  if (options.runs < 10) throw ValidationError("inversion needs at least 10 runs");

  auto center = [](std::vector<double>& s) {
    const double m = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    for (auto& v : s) v -= m;
  };
  // Start from the target log-probabilities spread over the rounds a champion wins.
  const double rounds = static_cast<double>(compiled.rounds.size() + (compiled.groups.empty() ? 0 : 1));
  std::vector<double> s(n);
  for (std::size_t t = 0; t < n; ++t) s[t] = std::log(targets[t]) / rounds;
  center(s);

  InversionResult result;
  double best = std::numeric_limits<double>::infinity();
  bool full = false;
  bool have_full = false;
  double step = options.step;
  double previous = std::numeric_limits<double>::infinity();
  const std::uint64_t coarse_runs = std::max<std::uint64_t>(options.runs / 10, 10);
  SimulationOptions sim{coarse_runs, options.seed, options.workers};
  std::vector<double> abilities(n);

  for (int it = 0; it < options.max_iterations; ++it) {
    // Switch to full resolution for the second half of the budget at the latest.
    if (!full && it >= options.max_iterations / 2) {
      full = true;
      sim.runs = options.runs;
      previous = std::numeric_limits<double>::infinity();
    }
    for (std::size_t t = 0; t < n; ++t) abilities[t] = std::exp(s[t]);
    const auto probs = simulate_compiled(abilities, compiled, sim);
    std::vector<double> p(n);
    double resid = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      p[t] = probs.probs[t].back();
      resid = std::max(resid, std::abs(p[t] - targets[t]));
    }
    result.residual_trace.push_back(resid);
    result.iterations = it + 1;
    // Coarse iterates only count until a full-resolution one exists.
    if (full ? (!have_full || resid < best) : resid < best) {
      best = resid;
      have_full = full;
      result.log_abilities = s;
      result.simulated = p;
      result.residual = resid;
    }
    if (full && resid < options.tolerance) {
      result.converged = true;
      break;
    }
    if (!full && resid < std::max(options.tolerance, 3.0 / std::sqrt(static_cast<double>(coarse_runs)) * 0.5)) {
      full = true;
      sim.runs = options.runs;
      previous = std::numeric_limits<double>::infinity();
      continue;
    }
    if (resid > previous) step = std::max(step * 0.5, 0.05);
    previous = resid;
    const double floor = 0.5 / static_cast<double>(sim.runs);
    for (std::size_t t = 0; t < n; ++t) s[t] += step * (std::log(targets[t]) - std::log(std::max(p[t], floor)));
    center(s);
  }
  return result;
}

ConsensusResult run(const OddsTable& table, const TournamentSpec& spec, const InversionOptions& options) {
  ConsensusResult out;
  out.teams = spec.teams;
  out.margins = margins(table);
  const auto probs = consensus_probs(table);
  if (table.teams().size() != spec.teams.size())
    throw ValidationError("odds cover " + std::to_string(table.teams().size()) + " teams but the tournament has " +
                          std::to_string(spec.teams.size()));
  for (const auto& team : spec.teams) {
    const auto it = std::find(table.teams().begin(), table.teams().end(), team);
    if (it == table.teams().end()) throw ValidationError("no odds for tournament team '" + team + "'");
    out.probs.push_back(probs[static_cast<std::size_t>(it - table.teams().begin())]);
  }
  out.inversion = infer_abilities(out.probs, spec, options);
  return out;
}

}  // namespace hybridcast::consensus
