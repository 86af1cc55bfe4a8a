#include "hybridcast/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace hybridcast::sim {

namespace {

struct Result {
  int a, b, ga, gb;
};

struct Line {
  int points = 0, gd = 0, gf = 0;
  friend bool operator==(const Line&, const Line&) = default;
};

// Table lines of `teams` counting only matches among them.
std::map<int, Line> table(const std::vector<int>& teams, const std::vector<Result>& results) {
  std::map<int, Line> lines;
  for (int t : teams) lines[t];
  for (const auto& r : results) {
    auto ia = lines.find(r.a), ib = lines.find(r.b);
    if (ia == lines.end() || ib == lines.end()) continue;
    ia->second.gd += r.ga - r.gb;
    ib->second.gd += r.gb - r.ga;
    ia->second.gf += r.ga;
    ib->second.gf += r.gb;
    if (r.ga > r.gb) ia->second.points += 3;
    else if (r.ga < r.gb) ib->second.points += 3;
    else {
      ia->second.points += 1;
      ib->second.points += 1;
    }
  }
  return lines;
}

template <class Key>
void sort_desc(std::vector<int>& v, Key key) {
  std::stable_sort(v.begin(), v.end(), [&](int x, int y) { return key(x) > key(y); });
}

// Calls fn(first, last) for each run of two or more entries with equal key.
template <class Key, class Fn>
void for_tied_runs(std::vector<int>& v, Key key, Fn fn) {
  for (std::size_t lo = 0; lo < v.size();) {
    std::size_t hi = lo + 1;
    while (hi < v.size() && key(v[hi]) == key(v[lo])) ++hi;
    if (hi - lo > 1) fn(lo, hi);
    lo = hi;
  }
}

std::vector<int> slice(const std::vector<int>& v, std::size_t lo, std::size_t hi) {
  return {v.begin() + static_cast<long>(lo), v.begin() + static_cast<long>(hi)};
}

void put(std::vector<int>& v, std::size_t lo, const std::vector<int>& part) {
  std::copy(part.begin(), part.end(), v.begin() + static_cast<long>(lo));
}

auto triple(const std::map<int, Line>& lines) {
  return [&lines](int t) {
    const auto& l = lines.at(t);
    return std::tuple(l.points, l.gd, l.gf);
  };
}

void lot(std::vector<int>& v, std::size_t lo, std::size_t hi, Rng& rng) {
  rng.shuffle(v.begin() + static_cast<long>(lo), v.begin() + static_cast<long>(hi));
}

std::vector<int> order_footnote(std::vector<int> teams, const std::vector<Result>& results, Rng& rng) {
  const auto overall = table(teams, results);
  sort_desc(teams, triple(overall));
  for_tied_runs(teams, triple(overall), [&](std::size_t lo, std::size_t hi) {
    auto run = slice(teams, lo, hi);
    const auto mutual = table(run, results);
    sort_desc(run, triple(mutual));
    for_tied_runs(run, triple(mutual), [&](std::size_t a, std::size_t b) { lot(run, a, b, rng); });
    put(teams, lo, run);
  });
  return teams;
}

void order_head_to_head(std::vector<int>& run, const std::map<int, Line>& overall, const std::vector<Result>& results,
                        Rng& rng) {
  const auto mutual = table(run, results);
  sort_desc(run, triple(mutual));
  const std::size_t size = run.size();
  for_tied_runs(run, triple(mutual), [&](std::size_t lo, std::size_t hi) {
    auto sub = slice(run, lo, hi);
    if (sub.size() < size) {
      order_head_to_head(sub, overall, results, rng);
    } else {
      auto key = [&](int t) { return std::pair(overall.at(t).gd, overall.at(t).gf); };
      sort_desc(sub, key);
      for_tied_runs(sub, key, [&](std::size_t a, std::size_t b) { lot(sub, a, b, rng); });
    }
    put(run, lo, sub);
  });
}

std::vector<int> order_uefa(std::vector<int> teams, const std::vector<Result>& results, Rng& rng) {
  const auto overall = table(teams, results);
  auto points = [&](int t) { return overall.at(t).points; };
  sort_desc(teams, points);
  for_tied_runs(teams, points, [&](std::size_t lo, std::size_t hi) {
    auto run = slice(teams, lo, hi);
    order_head_to_head(run, overall, results, rng);
    put(teams, lo, run);
  });
  return teams;
}

std::vector<int> order_group(const std::vector<int>& teams, const std::vector<Result>& results, TieBreak rule,
                             Rng& rng) {
  return rule == TieBreak::footnote ? order_footnote(teams, results, rng) : order_uefa(teams, results, rng);
}

void check_lambda(double v, const std::string& what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("intensity for " + what + " must be finite and nonnegative");
}

}  // namespace

std::pair<int, int> simulate_match(double lambda1, double lambda2, Rng& rng) {
  const int g1 = rng.poisson(lambda1);
  const int g2 = rng.poisson(lambda2);
  return {g1, g2};
}

bool simulate_knockout_match(double lambda1, double lambda2, double factor, Rng& rng) {
  auto [g1, g2] = simulate_match(lambda1, lambda2, rng);
  if (g1 != g2) return g1 > g2;
  auto [e1, e2] = simulate_match(lambda1 * factor, lambda2 * factor, rng);
  if (e1 != e2) return e1 > e2;
  return rng.coin();
}

std::vector<std::string> group_table(const std::vector<MatchScore>& results, Rng& rng, TieBreak rule) {
  std::vector<std::string> names;
  auto id = [&](const std::string& t) {
    auto it = std::find(names.begin(), names.end(), t);
    if (it != names.end()) return static_cast<int>(it - names.begin());
    names.push_back(t);
    return static_cast<int>(names.size() - 1);
  };
  std::vector<Result> rs;
  std::set<std::pair<int, int>> seen;
  for (const auto& m : results) {
    if (m.goals1 < 0 || m.goals2 < 0) throw ValidationError("negative goals in group result");
    const int a = id(m.team1), b = id(m.team2);
    if (a == b) throw ValidationError("team " + m.team1 + " plays itself");
    if (!seen.insert(std::minmax(a, b)).second)
      throw ValidationError("group result " + m.team1 + " v " + m.team2 + " listed twice");
    rs.push_back({a, b, m.goals1, m.goals2});
  }
  const std::size_t n = names.size();
  if (n < 2 || seen.size() != n * (n - 1) / 2) throw ValidationError("incomplete group results");
  std::vector<int> teams(n);
  for (std::size_t i = 0; i < n; ++i) teams[i] = static_cast<int>(i);
  std::vector<std::string> out;
  for (int t : order_group(teams, rs, rule, rng)) out.push_back(names[static_cast<std::size_t>(t)]);
  return out;
}

TournamentSimulator::TournamentSimulator(const TournamentSpec& spec, const IntensitySource& source, SimConfig config)
    : spec_(bracket::compile(spec)), config_(config) {
  if (config_.runs < 1) throw ValidationError("number of runs must be positive");
  if (!(config_.extra_time_factor > 0.0 && config_.extra_time_factor <= 1.0))
    throw ValidationError("extra-time factor must be in (0, 1]");
  if (!source) throw ValidationError("no intensity source");
  for (const auto& f : spec_.fixtures) {
    const auto& a = spec_.teams[static_cast<std::size_t>(f.first)];
    const auto& b = spec_.teams[static_cast<std::size_t>(f.second)];
    const auto l = source(a, b, {Stage::group, f.host == f.first, f.host == f.second});
    check_lambda(l.first, a + " v " + b);
    check_lambda(l.second, a + " v " + b);
    group_lambdas_.push_back(l);
  }
  const std::size_t n = spec_.teams.size();
  knockout_lambda_.assign(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto l = source(spec_.teams[a], spec_.teams[b], {Stage::knockout, false, false});
      check_lambda(l.first, spec_.teams[a] + " v " + spec_.teams[b]);
      check_lambda(l.second, spec_.teams[a] + " v " + spec_.teams[b]);
      knockout_lambda_[a * n + b] = l.first;
      knockout_lambda_[b * n + a] = l.second;
    }
}

void TournamentSimulator::play(Rng& rng, Replicate& out) const {
  const std::size_t n = spec_.teams.size();
  out.groups.rankings.clear();
  out.groups.thirds_order.clear();
  if (!spec_.groups.empty()) {
    std::vector<std::vector<Result>> by_group(spec_.groups.size());
    for (std::size_t k = 0; k < spec_.fixtures.size(); ++k) {
      const auto& f = spec_.fixtures[k];
      const auto [g1, g2] = simulate_match(group_lambdas_[k].first, group_lambdas_[k].second, rng);
      by_group[static_cast<std::size_t>(f.group)].push_back({f.first, f.second, g1, g2});
    }
    std::vector<Line> third_lines;
    for (std::size_t g = 0; g < spec_.groups.size(); ++g) {
      out.groups.rankings.push_back(order_group(spec_.groups[g], by_group[g], config_.tie_break, rng));
      if (spec_.with_thirds) third_lines.push_back(table(spec_.groups[g], by_group[g]).at(out.groups.rankings[g][2]));
    }
    if (spec_.with_thirds) {
      std::vector<int> order(spec_.groups.size());
      for (std::size_t g = 0; g < order.size(); ++g) order[g] = static_cast<int>(g);
      auto key = [&](int g) {
        const auto& l = third_lines[static_cast<std::size_t>(g)];
        return std::tuple(l.points, l.gd, l.gf);
      };
      sort_desc(order, key);
      for_tied_runs(order, key, [&](std::size_t lo, std::size_t hi) { lot(order, lo, hi, rng); });
      out.groups.thirds_order = std::move(order);
    }
  }
  out.reached.assign(n, 0);
  out.champion = bracket::play_knockout(
      spec_, out.groups,
      [&](int a, int b, int) {
        const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
        return simulate_knockout_match(knockout_lambda_[ua * n + ub], knockout_lambda_[ub * n + ua],
                                       config_.extra_time_factor, rng)
                   ? a
                   : b;
      },
      out.reached);
}

Replicate TournamentSimulator::simulate_once(std::uint64_t index) const {
  Rng rng(derive_seed(config_.seed, index));
  Replicate out;
  play(rng, out);
  return out;
}

bracket::StageProbabilities TournamentSimulator::run() const {
  const unsigned workers = config_.workers ? config_.workers : bracket::default_workers();
  auto counts = bracket::run_replicates(spec_.teams.size(), spec_.rounds.size() + 1, config_.runs, config_.seed,
                                        workers, [&](Rng& rng, std::vector<int>& reached) {
                                          Replicate r;
                                          play(rng, r);
                                          reached = std::move(r.reached);
                                        });
  return bracket::make_stage_probabilities(spec_, std::move(counts), config_.runs);
}

bracket::StageProbabilities run_tournament(const SimConfig& config, const TournamentSpec& spec,
                                           const IntensitySource& source) {
  return TournamentSimulator(spec, source, config).run();
}

}  // namespace hybridcast::sim
