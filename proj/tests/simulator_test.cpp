#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "hybridcast/consensus.hpp"
#include "hybridcast/simulator.hpp"
#include "support.hpp"

using namespace hybridcast;
using namespace hybridcast::sim;
namespace ts = testing_support;

namespace {

const char* kFourTeam =
    "edition = 1\nteams = a, b, c, d\n[round sf]\nS1 = a v b\nS2 = c v d\n[round final]\nF = W(S1) v W(S2)\n";
const char* kSingleGroup = "edition = 1\nqualification = top2\n[groups]\nA = a, b, c, d\n[round final]\nF = 1A v 2A\n";

std::vector<MatchScore> all_draws() {
  return {{"a", "b", 0, 0}, {"c", "d", 0, 0}, {"a", "c", 0, 0}, {"b", "d", 0, 0}, {"a", "d", 0, 0}, {"b", "c", 0, 0}};
}

IntensitySource constant(double l) {
  return [l](const std::string&, const std::string&, const MatchContext&) { return std::pair{l, l}; };
}

}  // namespace

TEST(SimulateMatch, ZeroIntensityAndDeterminism) {
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) EXPECT_EQ(simulate_match(0.0, 1.0, rng).first, 0);
  Rng a(42), b(42);
  for (int k = 0; k < 1000; ++k) EXPECT_EQ(simulate_match(1.4, 0.9, a), simulate_match(1.4, 0.9, b));
}

TEST(SimulateMatch, MeanWithinThreeStandardErrors) {
  Rng rng(7);
  const int n = 1000000;
  double sum = 0.0;
  for (int k = 0; k < n; ++k) sum += simulate_match(1.5, 1.0, rng).first;
  EXPECT_NEAR(sum / n, 1.5, 3 * std::sqrt(1.5 / n));
}

TEST(SimulateMatch, PoissonFrequencies) {
  // Large intensities take the split path.
  for (double l : {0.4, 3.0, 12.5}) {
    Rng rng(11);
    const int n = 200000;
    std::vector<int> hist(80, 0);
    for (int k = 0; k < n; ++k) ++hist[static_cast<std::size_t>(std::min(79, rng.poisson(l)))];
    for (int k = 0; k < 25; ++k) {
      const double p = ts::pois(k, l);
      EXPECT_NEAR(hist[static_cast<std::size_t>(k)] / double(n), p, 4 * std::sqrt(p * (1 - p) / n) + 1e-6) << l << " " << k;
    }
  }
}

TEST(KnockoutMatch, StrongFavourite) {
  Rng rng(3);
  const int n = 100000;
  int wins = 0;
  for (int k = 0; k < n; ++k) wins += simulate_knockout_match(5, 0.1, 1.0 / 3, rng);
  EXPECT_GE(wins / double(n), 0.97);
  const double exact = ts::knockout_win(5, 0.1, 1.0 / 3);
  EXPECT_NEAR(wins / double(n), exact, 3 * std::sqrt(exact * (1 - exact) / n));
}

TEST(KnockoutMatch, SymmetricAndExtraTimeScaling) {
  Rng rng(4);
  const int n = 100000;
  int wins = 0;
  for (int k = 0; k < n; ++k) wins += simulate_knockout_match(1.3, 1.3, 1.0 / 3, rng);
  EXPECT_NEAR(wins / double(n), 0.5, 3 * std::sqrt(0.25 / n));
  // At 1.8 the extra-time intensities are 0.6; check against the oracle.
  Rng r2(5);
  int w2 = 0;
  for (int k = 0; k < n; ++k) w2 += simulate_knockout_match(1.8, 0.9, 1.0 / 3, r2);
  const double exact = ts::knockout_win(1.8, 0.9, 1.0 / 3);
  EXPECT_NEAR(w2 / double(n), exact, 3 * std::sqrt(exact * (1 - exact) / n));
  const auto et = ts::brute_outcome(0.6, 0.3);
  EXPECT_NEAR(exact, ts::brute_outcome(1.8, 0.9)[0] + ts::brute_outcome(1.8, 0.9)[1] * (et[0] + 0.5 * et[1]), 1e-15);
}

TEST(GroupTable, PointsDominance) {
  Rng rng(1);
  const std::vector<MatchScore> r{{"a", "b", 1, 0}, {"c", "d", 5, 0}, {"a", "c", 1, 0}, {"b", "d", 5, 0}, {"a", "d", 1, 0}, {"b", "c", 0, 0}};
  for (int k = 0; k < 20; ++k) EXPECT_EQ(group_table(r, rng).front(), "a");
}

TEST(GroupTable, GoalsScoredBreaksTie) {
  // d 6 points; a and b 4 points with goal difference +1, a scored 5 and b 4; c 3.
  const std::vector<MatchScore> r{{"a", "b", 1, 1}, {"c", "d", 2, 0}, {"a", "c", 4, 2},
                                  {"b", "d", 0, 1}, {"a", "d", 0, 1}, {"b", "c", 3, 1}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    EXPECT_EQ(group_table(r, rng), (std::vector<std::string>{"d", "a", "b", "c"}));
  }
}

TEST(GroupTable, AllDrawsUniformLot) {
  const int n = 40000;
  std::map<std::string, int> first;
  for (int k = 0; k < n; ++k) {
    Rng rng(derive_seed(99, static_cast<std::uint64_t>(k)));
    ++first[group_table(all_draws(), rng).front()];
  }
  for (const char* t : {"a", "b", "c", "d"}) EXPECT_NEAR(first[t] / double(n), 0.25, 4 * std::sqrt(0.25 * 0.75 / n)) << t;
}

TEST(GroupTable, HeadToHeadSubTable) {
  // a and b level on 4 points, goal difference 0 and 3 goals; a won the
  // mutual match. c has 4 points but fewer goals, d 3 points.
  const std::vector<MatchScore> r{{"a", "b", 2, 1}, {"c", "d", 0, 0}, {"a", "c", 0, 1},
                                  {"b", "d", 1, 1}, {"a", "d", 1, 1}, {"b", "c", 1, 0}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    EXPECT_EQ(group_table(r, rng), (std::vector<std::string>{"a", "b", "c", "d"}));
  }
}

TEST(GroupTable, RuleSwitchDiffers) {
  // a beats b head to head but b has the better goal difference.
  const std::vector<MatchScore> r{{"a", "b", 1, 0}, {"c", "d", 0, 0}, {"a", "c", 0, 1},
                                  {"b", "d", 5, 0}, {"a", "d", 1, 0}, {"b", "c", 1, 0}};
  Rng r1(1), r2(1);
  const auto foot = group_table(r, r1, TieBreak::footnote);
  const auto uefa = group_table(r, r2, TieBreak::uefa);
  EXPECT_EQ(foot[0], "b");
  EXPECT_EQ(uefa[0], "a");
}

TEST(GroupTable, IncompleteIsError) {
  Rng rng(1);
  auto r = all_draws();
  r.pop_back();
  EXPECT_THROW(group_table(r, rng), ValidationError);
}

TEST(Tournament, Euro2020StageIdentitiesPerReplicate) {
  const auto spec = parse_tournament_spec(ts::data_path("euro2020.spec"));
  auto source = [](const std::string& a, const std::string& b, const MatchContext& c) {
    const double s = static_cast<double>((a[0] * 7 + b[1]) % 5) * 0.2;
    return std::pair{0.6 + s + (c.team_at_home ? 0.3 : 0.0), 1.4 - s};
  };
  const TournamentSimulator sim(spec, source, {2000, 5, 1.0 / 3, 1, TieBreak::footnote});
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const auto rep = sim.simulate_once(i);
    std::vector<int> at_least(6, 0);
    for (int r : rep.reached)
      for (int s = 0; s < r; ++s) ++at_least[static_cast<std::size_t>(s)];
    EXPECT_EQ(at_least[0], 16);
    EXPECT_EQ(at_least[1], 8);
    EXPECT_EQ(at_least[2], 4);
    EXPECT_EQ(at_least[3], 2);
    EXPECT_EQ(at_least[4], 1);
    std::set<int> thirds(rep.groups.thirds_order.begin(), rep.groups.thirds_order.end());
    EXPECT_EQ(thirds.size(), 6u);
  }
}

TEST(Tournament, ColumnSumsAndMonotone) {
  const auto spec = parse_tournament_spec(ts::data_path("euro2020.spec"));
  const auto sp = run_tournament({20000, 3, 1.0 / 3, 2, TieBreak::footnote}, spec, constant(1.3));
  const std::vector<double> expected{16, 8, 4, 2, 1};
  ASSERT_EQ(sp.stages, (std::vector<std::string>{"r16", "qf", "sf", "final", "champion"}));
  for (std::size_t s = 0; s < 5; ++s) {
    std::uint64_t total = 0;
    for (std::size_t t = 0; t < sp.teams.size(); ++t) total += sp.counts[t][s];
    EXPECT_EQ(total, static_cast<std::uint64_t>(expected[s] * 20000));
  }
  for (std::size_t t = 0; t < sp.teams.size(); ++t)
    for (std::size_t s = 1; s < 5; ++s) EXPECT_LE(sp.probs[t][s], sp.probs[t][s - 1]);
}

TEST(Tournament, WorkerCountInvariant) {
  const auto spec = parse_tournament_spec(ts::data_path("euro2020.spec"));
  auto source = [](const std::string& a, const std::string& b, const MatchContext&) {
    return std::pair{0.5 + 0.05 * (a[0] % 13), 0.5 + 0.05 * (b[0] % 13)};
  };
  const auto one = run_tournament({10000, 77, 1.0 / 3, 1, TieBreak::footnote}, spec, source);
  const auto four = run_tournament({10000, 77, 1.0 / 3, 4, TieBreak::footnote}, spec, source);
  const auto eight = run_tournament({10000, 77, 1.0 / 3, 8, TieBreak::footnote}, spec, source);
  EXPECT_EQ(one.counts, four.counts);
  EXPECT_EQ(one.counts, eight.counts);
}

TEST(Tournament, SixteenTeamFormat) {
  const auto spec = parse_tournament_spec(ts::data_path("euro2004.spec"));
  const auto sp = run_tournament({5000, 1, 1.0 / 3, 1, TieBreak::footnote}, spec, constant(1.1));
  std::uint64_t qf = 0;
  for (std::size_t t = 0; t < sp.teams.size(); ++t) qf += sp.counts[t][0];
  EXPECT_EQ(sp.stages.front(), "qf");
  EXPECT_EQ(qf, 8u * 5000);
}

TEST(Tournament, ThirdPlaceMappingFollowsSpecTable) {
  // Replay each replicate's knockout entrants against the spec table row.
  const auto text = ts::read_file(ts::data_path("euro2020.spec"));
  const auto spec = parse_tournament_spec_text(text);
  const auto compiled = bracket::compile(spec);
  const TournamentSimulator sim(spec, constant(1.0), {500, 8, 1.0 / 3, 1, TieBreak::footnote});
  for (std::uint64_t i = 0; i < 500; ++i) {
    const auto rep = sim.simulate_once(i);
    std::vector<int> qualifying(rep.groups.thirds_order.begin(), rep.groups.thirds_order.begin() + 4);
    std::sort(qualifying.begin(), qualifying.end());
    std::string key;
    for (int g : qualifying) key += spec.groups[static_cast<std::size_t>(g)].name;
    const auto& row = spec.thirds.rows.at(key);
    // Slot k of the row holds the third-placed team of group row[k]; that
    // team must be among the round-of-16 entrants.
    for (const auto& g : row) {
      const auto gi = std::find(compiled.group_names.begin(), compiled.group_names.end(), g) - compiled.group_names.begin();
      const int third = rep.groups.rankings[static_cast<std::size_t>(gi)][2];
      EXPECT_GE(rep.reached[static_cast<std::size_t>(third)], 1);
    }
    // Thirds of the non-qualifying groups are out.
    for (std::size_t g = 0; g < spec.groups.size(); ++g)
      if (!std::binary_search(qualifying.begin(), qualifying.end(), static_cast<int>(g))) {
        EXPECT_EQ(rep.reached[static_cast<std::size_t>(rep.groups.rankings[g][2])], 0);
      }
  }
}

TEST(Tournament, SymmetricIntensitiesUniformChampion) {
  const auto spec = parse_tournament_spec(ts::data_path("euro2020.spec"));
  const auto sp = run_tournament({100000, 21, 1.0 / 3, 0, TieBreak::footnote}, spec, constant(1.3));
  const double p = 1.0 / 24, se = std::sqrt(p * (1 - p) / 100000);
  for (const auto& t : sp.teams) EXPECT_NEAR(sp.champion(t), p, 4 * se) << t;
}

TEST(Tournament, SingleGroupEnumeration) {
  // Low intensities keep the truncated score grid (goals <= 3) nearly exact;
  // the truncated mass is added to the tolerance.
  const auto spec = parse_tournament_spec_text(kSingleGroup);
  const std::array<double, 4> s{0.25, 0.1, -0.1, -0.25};
  std::array<std::array<double, 4>, 4> lambda{};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) lambda[i][j] = 0.18 * std::exp(s[i] - s[j]);
  const char* names[] = {"a", "b", "c", "d"};
  auto source = [&](const std::string& a, const std::string& b, const MatchContext&) {
    const auto i = static_cast<std::size_t>(a[0] - 'a'), j = static_cast<std::size_t>(b[0] - 'a');
    return std::pair{lambda[i][j], lambda[j][i]};
  };
  const auto oracle = ts::enumerate_group(lambda, 3);
  const double missing = 1.0 - oracle.mass;
  EXPECT_LT(missing, 1e-3);
  const std::uint64_t runs = 100000;
  const auto sp = run_tournament({runs, 31, 1.0 / 3, 0, TieBreak::footnote}, spec, source);
  for (std::size_t t = 0; t < 4; ++t) {
    double finalist = 0.0, champion = 0.0;
    for (std::size_t u = 0; u < 4; ++u) {
      if (u == t) continue;
      const double w = ts::knockout_win(lambda[t][u], lambda[u][t], 1.0 / 3);
      finalist += oracle.top_two[t][u] + oracle.top_two[u][t];
      champion += (oracle.top_two[t][u] + oracle.top_two[u][t]) * w;
    }
    const double se_f = std::sqrt(finalist * (1 - finalist) / static_cast<double>(runs));
    const double se_c = std::sqrt(champion * (1 - champion) / static_cast<double>(runs));
    EXPECT_NEAR(sp.prob(names[t], "final"), finalist, 3 * se_f + missing) << names[t];
    EXPECT_NEAR(sp.champion(names[t]), champion, 3 * se_c + missing) << names[t];
  }
}

TEST(Tournament, FourTeamBracketEnumeration) {
  const auto spec = parse_tournament_spec_text(kFourTeam);
  const std::array<double, 4> s{0.4, 0.1, 0.0, -0.5};
  auto lam = [&](int i, int j) { return 1.2 * std::exp(s[static_cast<std::size_t>(i)] - s[static_cast<std::size_t>(j)]); };
  auto source = [&](const std::string& a, const std::string& b, const MatchContext&) {
    return std::pair{lam(a[0] - 'a', b[0] - 'a'), lam(b[0] - 'a', a[0] - 'a')};
  };
  const auto exact = ts::enumerate_four_team_bracket([&](int i, int j) { return ts::knockout_win(lam(i, j), lam(j, i), 1.0 / 3); });
  const auto sp = run_tournament({100000, 5, 1.0 / 3, 0, TieBreak::footnote}, spec, source);
  const char* names[] = {"a", "b", "c", "d"};
  for (std::size_t t = 0; t < 4; ++t) {
    for (int k = 0; k < 2; ++k) {
      const double p = exact[t][static_cast<std::size_t>(k)];
      const double got = k == 0 ? sp.prob(names[t], "final") : sp.champion(names[t]);
      EXPECT_NEAR(got, p, 3 * std::sqrt(p * (1 - p) / 100000)) << names[t] << " " << k;
    }
  }
}

TEST(Tournament, BradleyTerryKernelMatchesBtSimulator) {
  // A Poisson kernel cannot reproduce Bradley-Terry, but the shared bracket
  // engine means a near-deterministic source sends the stronger team
  // through every time in both simulators.
  const auto spec = parse_tournament_spec_text(kFourTeam);
  const std::vector<double> ab{1000, 1, 1, 1e-3};
  const auto bt = consensus::simulate_tournament_bt(ab, spec, {20000, 3, 1});
  auto source = [&](const std::string& a, const std::string& b, const MatchContext&) {
    const double ra = ab[static_cast<std::size_t>(a[0] - 'a')], rb = ab[static_cast<std::size_t>(b[0] - 'a')];
    return ra > rb ? std::pair{8.0, 1e-9} : std::pair{1e-9, 8.0};
  };
  const auto po = run_tournament({20000, 3, 1.0 / 3, 1, TieBreak::footnote}, spec, source);
  EXPECT_NEAR(bt.champion("a"), 1.0, 0.01);
  EXPECT_NEAR(po.champion("a"), 1.0, 0.01);
}

TEST(Tournament, RejectsBadInput) {
  const auto spec = parse_tournament_spec_text(kFourTeam);
  EXPECT_THROW(run_tournament({0, 1, 1.0 / 3, 1, TieBreak::footnote}, spec, constant(1)), ValidationError);
  EXPECT_THROW(run_tournament({10, 1, 1.0 / 3, 1, TieBreak::footnote}, spec, constant(-1)), ValidationError);
}
