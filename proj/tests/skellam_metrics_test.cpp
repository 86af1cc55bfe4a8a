#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hybridcast/evaluation.hpp"
#include "hybridcast/metrics.hpp"
#include "support.hpp"

using namespace hybridcast;
using namespace hybridcast::metrics;
namespace ts = testing_support;

TEST(Skellam, PointValues) {
  EXPECT_NEAR(skellam_pmf(0, 1, 1), 0.308508, 1e-6);
  EXPECT_NEAR(skellam_pmf(0, 1, 1), ts::brute_skellam(0, 1, 1), 1e-15);
  for (int k = -6; k <= 6; ++k) EXPECT_NEAR(skellam_pmf(k, 2.2, 2.2), skellam_pmf(-k, 2.2, 2.2), 1e-16);
}

TEST(Skellam, DegenerateLimits) {
  for (int k = -8; k <= 3; ++k) {
    EXPECT_NEAR(skellam_pmf(k, 0.0, 2.0), k <= 0 ? ts::pois(-k, 2.0) : 0.0, 1e-15) << k;
    EXPECT_NEAR(skellam_pmf(-k, 2.0, 0.0), k <= 0 ? ts::pois(-k, 2.0) : 0.0, 1e-15) << k;
  }
  EXPECT_EQ(skellam_pmf(0, 0.0, 0.0), 1.0);
  EXPECT_NEAR(skellam_pmf(0, 1e-12, 2.0), std::exp(-2.0), 1e-10);
}

TEST(Skellam, AgreesWithBruteForceAndSumsToOne) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.05, 6.0);
  for (int rep = 0; rep < 60; ++rep) {
    const double a = u(gen), b = u(gen);
    double total = 0.0;
    for (int k = -40; k <= 40; ++k) {
      const double p = skellam_pmf(k, a, b);
      EXPECT_NEAR(p, ts::brute_skellam(k, a, b), 1e-10);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(OutcomeProbs, ValuesAndSymmetry) {
  const auto p = outcome_probs(1, 1);
  EXPECT_NEAR(p.p_draw, 0.308508, 1e-6);
  EXPECT_NEAR(p.p_win, 0.345746, 1e-6);
  EXPECT_NEAR(p.p_loss, 0.345746, 1e-6);
  const auto z = outcome_probs(1e-300, 2);
  EXPECT_LT(z.p_win, 1e-299);
  EXPECT_NEAR(z.p_draw, std::exp(-2.0), 1e-12);
  const auto z0 = outcome_probs(0.0, 2);
  EXPECT_EQ(z0.p_win, 0.0);
  EXPECT_NEAR(z0.p_draw, std::exp(-2.0), 1e-15);
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int rep = 0; rep < 50; ++rep) {
    const double a = u(gen), b = u(gen);
    const auto x = outcome_probs(a, b), y = outcome_probs(b, a);
    EXPECT_NEAR(x.p_win, y.p_loss, 1e-14);
    EXPECT_NEAR(x.p_draw, y.p_draw, 1e-14);
    EXPECT_NEAR(x.p_win + x.p_draw + x.p_loss, 1.0, 1e-14);
    const auto bf = ts::brute_outcome(a, b);
    EXPECT_NEAR(x.p_win, bf[0], 1e-10);
    EXPECT_NEAR(x.p_draw, bf[1], 1e-10);
  }
  EXPECT_NEAR(outcome_probs(1.3, 1.3).p_win, outcome_probs(1.3, 1.3).p_loss, 1e-15);
}

TEST(Rps, Values) {
  EXPECT_NEAR(rps({1, 0, 0}, 1), 0.0, 1e-12);
  EXPECT_NEAR(rps({1.0 / 3, 1.0 / 3, 1.0 / 3}, 1), 5.0 / 18, 1e-12);
  EXPECT_NEAR(rps({0.6, 0.3, 0.1}, 1), 0.085, 1e-12);
}

TEST(Rps, RangeAndPropriety) {
  std::mt19937_64 gen(3);
  std::gamma_distribution<double> g(1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::array<double, 3> p{g(gen), g(gen), g(gen)}, q{g(gen), g(gen), g(gen)};
    const double sp = p[0] + p[1] + p[2], sq = q[0] + q[1] + q[2];
    for (auto& v : p) v /= sp;
    for (auto& v : q) v /= sq;
    double own = 0.0, other = 0.0;
    for (int y = 1; y <= 3; ++y) {
      const double r = rps({p[0], p[1], p[2]}, y);
      EXPECT_NEAR(r, ts::rps_formula(p, y), 1e-14);
      EXPECT_GE(r, 0.0);
      EXPECT_LE(r, 1.0);
      own += p[static_cast<std::size_t>(y - 1)] * r;
      other += p[static_cast<std::size_t>(y - 1)] * rps({q[0], q[1], q[2]}, y);
    }
    EXPECT_LE(own, other + 1e-15);
  }
}

TEST(Likelihood, AndClassification) {
  const OutcomeProbs p{0.6, 0.3, 0.1};
  EXPECT_DOUBLE_EQ(multinomial_likelihood(p, 2), 0.3);
  EXPECT_EQ(is_correct(p, 2), 0);
  EXPECT_EQ(is_correct({1, 0, 0}, 1), 1);
  EXPECT_DOUBLE_EQ(multinomial_likelihood({1, 0, 0}, 1), 1.0);
  const OutcomeProbs u{1.0 / 3, 1.0 / 3, 1.0 / 3};
  for (int y = 1; y <= 3; ++y) EXPECT_DOUBLE_EQ(multinomial_likelihood(u, y), 1.0 / 3);
  EXPECT_EQ(argmax_outcome(u), 1);
  EXPECT_EQ(is_correct(u, 1), 1);
  EXPECT_EQ(is_correct(u, 2), 0);
  EXPECT_EQ(argmax_outcome({0.2, 0.4, 0.4}), 2);
  EXPECT_EQ(outcome_of(2, 1), 1);
  EXPECT_EQ(outcome_of(1, 1), 2);
  EXPECT_EQ(outcome_of(0, 1), 3);
}

TEST(Threeway, Normalization) {
  const auto fair = threeway_from_odds(2, 3, 6);
  EXPECT_NEAR(fair.p_win, 0.5, 1e-15);
  EXPECT_NEAR(fair.p_draw, 1.0 / 3, 1e-15);
  EXPECT_NEAR(fair.p_loss, 1.0 / 6, 1e-15);
  const auto b = threeway_from_odds(1.8, 3.6, 4.5);
  EXPECT_NEAR(b.p_win, 0.5263, 1e-4);
  EXPECT_NEAR(b.p_draw, 0.2632, 1e-4);
  EXPECT_NEAR(b.p_loss, 0.2105, 1e-4);
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(1.01, 20);
  for (int rep = 0; rep < 50; ++rep) {
    const auto p = threeway_from_odds(u(gen), u(gen), u(gen));
    EXPECT_NEAR(p.p_win + p.p_draw + p.p_loss, 1.0, 1e-15);
  }
}

TEST(Mae, Values) {
  const std::vector<double> perfect{1, 2, 0};
  const std::vector<int> actual{1, 2, 0};
  EXPECT_EQ(mae_goals(perfect, actual), 0.0);
  const std::vector<double> ones{1.0, 1.0};
  const std::vector<int> scores{0, 2};
  EXPECT_DOUBLE_EQ(mae_goals(ones, scores), 1.0);
  const std::vector<GoalPair> pred{{1.5, 0.5}, {1.0, 1.0}};
  const std::vector<ScorePair> act{{2, 0}, {0, 3}};
  EXPECT_DOUBLE_EQ(mae_goal_diff(pred, act), (1.0 + 3.0) / 2);
}

namespace {

std::vector<predict::FeatureRow> fixture_rows(const std::vector<std::array<int, 3>>& matches) {
  // {edition, goals1, goals2}
  std::vector<predict::FeatureRow> rows;
  int k = 0;
  for (const auto& [edition, g1, g2] : matches) {
    predict::FeatureRow a, b;
    a.edition = b.edition = edition;
    a.match_id = b.match_id = "m" + std::to_string(k++);
    a.date = b.date = Date(edition, 6, 15);
    a.as_of = b.as_of = Date(edition, 6, 1);
    a.team = b.opponent = "x";
    a.opponent = b.team = "y";
    a.goals = g1;
    b.goals = g2;
    a.differences.assign(predict::feature_names().size(), 0.0);
    b.differences = a.differences;
    rows.push_back(a);
    rows.push_back(b);
  }
  return rows;
}

Method constant_method(double l) {
  return {"const", [l](const std::vector<predict::FeatureRow>&, const std::vector<predict::FeatureRow>& test) {
            Forecasts f;
            for (const auto& r : test) f[r.match_id] = from_intensities(l, l);
            return f;
          }};
}

}  // namespace

TEST(Evaluation, ConstantPredictorHandComputed) {
  const auto rows = fixture_rows({{2000, 1, 0}, {2000, 1, 1}, {2004, 0, 2}});
  const auto report = loto_evaluate(rows, {constant_method(1.2)});
  ASSERT_EQ(report.overall.size(), 1u);
  const auto& s = report.overall[0];
  EXPECT_EQ(s.matches, 3u);
  const auto bf = ts::brute_outcome(1.2, 1.2);
  const std::array<double, 3> p{bf[0], bf[1], bf[2]};
  EXPECT_NEAR(s.likelihood, (p[0] + p[1] + p[2]) / 3, 1e-10);
  EXPECT_NEAR(s.rps, (ts::rps_formula(p, 1) + ts::rps_formula(p, 2) + ts::rps_formula(p, 3)) / 3, 1e-10);
  // Win and loss tie as most probable; the tie goes to "win".
  EXPECT_NEAR(s.classification, 1.0 / 3, 1e-15);
  EXPECT_NEAR(s.mae_goals, (0.2 + 1.2 + 0.2 + 0.2 + 1.2 + 0.8) / 6, 1e-12);
  EXPECT_NEAR(s.mae_goal_diff, (1.0 + 0.0 + 2.0) / 3, 1e-12);
}

TEST(Evaluation, FoldStructure) {
  const auto rows = fixture_rows({{2004, 1, 0}, {2008, 0, 0}, {2008, 2, 1}, {2012, 0, 1}, {2016, 3, 3}, {2016, 1, 2}});
  std::map<std::string, int> scored;
  Method counting{"count", [&](const std::vector<predict::FeatureRow>& train, const std::vector<predict::FeatureRow>& test) {
                    for (const auto& r : train)
                      for (const auto& t : test) EXPECT_NE(r.edition, t.edition);
                    Forecasts f;
                    for (const auto& r : test) {
                      f[r.match_id] = from_intensities(1, 1);
                    }
                    for (std::size_t i = 0; i < test.size(); i += 2) ++scored[test[i].match_id];
                    return f;
                  }};
  const auto report = loto_evaluate(rows, {counting});
  EXPECT_EQ(report.folds.size(), 4u);
  EXPECT_EQ(scored.size(), 6u);
  for (const auto& [m, n] : scored) EXPECT_EQ(n, 1) << m;
}

TEST(Evaluation, LeakageAndEditionErrors) {
  auto rows = fixture_rows({{2000, 1, 0}, {2004, 0, 0}});
  rows[0].as_of = Date(2000, 7, 1);
  EXPECT_THROW(loto_evaluate(rows, {constant_method(1)}), LeakageError);
  const auto single = fixture_rows({{2000, 1, 0}, {2000, 0, 0}});
  EXPECT_THROW(loto_evaluate(single, {constant_method(1)}), ValidationError);
}

TEST(Evaluation, OutcomeMethodScoredLikeModels) {
  const auto rows = fixture_rows({{2000, 1, 0}, {2000, 1, 1}, {2004, 0, 2}});
  std::map<std::string, OutcomeProbs> probs;
  const auto p = outcome_probs(1.2, 1.2);
  for (const char* m : {"m0", "m1", "m2"}) probs[m] = p;
  const auto report = loto_evaluate(rows, {constant_method(1.2), outcome_method("books", probs)});
  ASSERT_EQ(report.overall.size(), 2u);
  EXPECT_NEAR(report.overall[0].likelihood, report.overall[1].likelihood, 1e-15);
  EXPECT_NEAR(report.overall[0].rps, report.overall[1].rps, 1e-15);
  EXPECT_EQ(report.overall[0].classification, report.overall[1].classification);
  EXPECT_TRUE(std::isnan(report.overall[1].mae_goals));
}

TEST(Evaluation, ClassificationEqualsRecount) {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> goals(0, 3);
  std::vector<std::array<int, 3>> ms;
  for (int k = 0; k < 40; ++k) ms.push_back({2000 + 4 * (k % 3), goals(gen), goals(gen)});
  const auto rows = fixture_rows(ms);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  std::map<std::string, predict::MatchIntensity> li;
  for (std::size_t i = 0; i < rows.size(); i += 2) li[rows[i].match_id] = {u(gen), u(gen)};
  const auto report = loto_evaluate(rows, {intensity_method("x", li)});
  int correct = 0;
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    const auto& l = li.at(rows[i].match_id);
    const auto bf = ts::brute_outcome(l.lambda_home, l.lambda_away);
    const int best = bf[0] >= bf[1] && bf[0] >= bf[2] ? 1 : bf[1] >= bf[2] ? 2 : 3;
    correct += best == outcome_of(rows[i].goals, rows[i + 1].goals);
  }
  EXPECT_NEAR(report.overall[0].classification, correct / 40.0, 1e-15);
  EXPECT_GE(report.overall[0].classification, 0.0);
  EXPECT_LE(report.overall[0].classification, 1.0);
}
