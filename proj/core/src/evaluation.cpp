#include "hybridcast/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "hybridcast/csv.hpp"

namespace hybridcast::metrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MatchPair {
  const predict::FeatureRow* first = nullptr;
  const predict::FeatureRow* second = nullptr;
};

std::vector<std::pair<std::string, MatchPair>> pair_rows(const std::vector<predict::FeatureRow>& rows) {
  std::vector<std::pair<std::string, MatchPair>> out;
  std::map<std::string, std::size_t> at;
  for (const auto& r : rows) {
    const auto it = at.find(r.match_id);
    if (it == at.end()) {
      at[r.match_id] = out.size();
      out.push_back({r.match_id, {&r, nullptr}});
    } else if (!out[it->second].second.second) {
      out[it->second].second.second = &r;
    } else {
      throw ValidationError("match " + r.match_id + " has more than two rows");
    }
  }
  for (const auto& [id, p] : out)
    if (!p.second) throw ValidationError("match " + id + " has a single row");
  return out;
}

std::string fmt(double v) { return std::isnan(v) ? "NA" : csv::fixed(v, 6); }

}  // namespace

Forecast from_intensities(double lambda1, double lambda2) {
  return {outcome_probs(lambda1, lambda2), predict::MatchIntensity{lambda1, lambda2}};
}

Method lasso_method(std::string name, predict::LassoOptions options) {
  return {std::move(name), [options](const auto& train, const auto& test) {
            const auto fit = predict::fit_lasso_poisson(train, options);
            Forecasts out;
            for (const auto& [id, m] : predict::predict_matches(fit, test))
              out[id] = from_intensities(m.lambda_home, m.lambda_away);
            return out;
          }};
}

Method intensity_method(std::string name, std::map<std::string, predict::MatchIntensity> intensities) {
  return {std::move(name), [intensities = std::move(intensities)](const auto&, const auto& test) {
            Forecasts out;
            for (const auto& r : test) {
              const auto it = intensities.find(r.match_id);
              if (it != intensities.end()) out[r.match_id] = from_intensities(it->second.lambda_home, it->second.lambda_away);
            }
            return out;
          }};
}

Method outcome_method(std::string name, std::map<std::string, OutcomeProbs> probs) {
  return {std::move(name), [probs = std::move(probs)](const auto&, const auto& test) {
            Forecasts out;
            for (const auto& r : test) {
              const auto it = probs.find(r.match_id);
              if (it != probs.end()) out[r.match_id] = Forecast{it->second, std::nullopt};
            }
            return out;
          }};
}

std::map<std::string, OutcomeProbs> parse_threeway_odds_text(std::string_view text, const std::string& source) {
  const auto t = csv::parse(text, source);
  t.require_header({"match_id", "odds_win", "odds_draw", "odds_loss"});
  std::map<std::string, OutcomeProbs> out;
  for (const auto& row : t.rows) {
    const auto id = normalize_id(row.fields[0]);
    const double a = csv::to_double(row, 1, t), b = csv::to_double(row, 2, t), c = csv::to_double(row, 3, t);
    const auto where = "row " + std::to_string(row.line) + ": ";
    if (id.empty()) throw ParseError(t.source, row.line, where + "empty match id");
    if (!(a > 1.0) || !(b > 1.0) || !(c > 1.0)) throw ParseError(t.source, row.line, where + "odds must exceed 1");
    if (!out.emplace(id, threeway_from_odds(a, b, c)).second)
      throw ParseError(t.source, row.line, where + "duplicate match " + id);
  }
  return out;
}

std::map<std::string, OutcomeProbs> parse_threeway_odds(const std::filesystem::path& path) {
  return parse_threeway_odds_text(csv::read_text(path), path.string());
}

MethodScores score(const std::string& method, const std::vector<predict::FeatureRow>& rows,
                   const Forecasts& forecasts) {
  MethodScores s;
  s.method = method;
  double mae = 0.0, mae_diff = 0.0;
  bool have_goals = true;
  for (const auto& [id, pair] : pair_rows(rows)) {
    const auto it = forecasts.find(id);
    if (it == forecasts.end()) throw ValidationError("method " + method + " has no forecast for match " + id);
    const auto& f = it->second;
    const int outcome = outcome_of(pair.first->goals, pair.second->goals);
    s.likelihood += multinomial_likelihood(f.probs, outcome);
    s.classification += is_correct(f.probs, outcome);
    s.rps += rps(f.probs, outcome);
    if (f.intensities) {
      const auto& l = *f.intensities;
      mae += std::abs(pair.first->goals - l.lambda_home) + std::abs(pair.second->goals - l.lambda_away);
      mae_diff += std::abs((pair.first->goals - pair.second->goals) - (l.lambda_home - l.lambda_away));
    } else {
      have_goals = false;
    }
    ++s.matches;
  }
  if (s.matches == 0) throw ValidationError("no matches to score");
  const double n = static_cast<double>(s.matches);
  s.likelihood /= n;
  s.classification /= n;
  s.rps /= n;
  s.mae_goals = have_goals ? mae / (2.0 * n) : kNaN;
  s.mae_goal_diff = have_goals ? mae_diff / n : kNaN;
  return s;
}

EvaluationReport loto_evaluate(const std::vector<predict::FeatureRow>& rows, const std::vector<Method>& methods) {
  std::map<int, std::vector<predict::FeatureRow>> by_edition;
  for (const auto& r : rows) by_edition[r.edition].push_back(r);
  if (by_edition.size() < 2) throw ValidationError("leave-one-tournament-out needs at least two editions");
  if (methods.empty()) throw ValidationError("no methods to evaluate");
  for (const auto& [edition, rs] : by_edition) {
    Date start = rs.front().date;
    for (const auto& r : rs) start = std::min(start, r.date);
    for (const auto& r : rs)
      if (r.as_of > start)
        throw LeakageError("features of " + r.team + " in match " + r.match_id + " are dated " + r.as_of.to_string() +
                           ", after the " + std::to_string(edition) + " start " + start.to_string());
  }

  EvaluationReport report;
  // Pooled forecasts per method over all held-out editions.
  std::vector<Forecasts> pooled(methods.size());
  for (const auto& [edition, test] : by_edition) {
    std::vector<predict::FeatureRow> train;
    for (const auto& [other, rs] : by_edition)
      if (other != edition) train.insert(train.end(), rs.begin(), rs.end());
    FoldReport fold;
    fold.edition = edition;
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const auto forecasts = methods[m].forecast(train, test);
      fold.methods.push_back(score(methods[m].name, test, forecasts));
      for (const auto& [id, f] : forecasts)
        if (std::any_of(test.begin(), test.end(), [&](const auto& r) { return r.match_id == id; })) pooled[m][id] = f;
    }
    report.folds.push_back(std::move(fold));
  }
  for (std::size_t m = 0; m < methods.size(); ++m) report.overall.push_back(score(methods[m].name, rows, pooled[m]));
  return report;
}

void write_report(std::ostream& out, const EvaluationReport& report) {
  csv::write_row(out, {"method", "edition", "matches", "likelihood", "classification_rate", "rps", "mae_goals",
                       "mae_goal_diff"});
  auto line = [&](const MethodScores& s, const std::string& scope) {
    csv::write_row(out, {s.method, scope, std::to_string(s.matches), fmt(s.likelihood), fmt(s.classification),
                         fmt(s.rps), fmt(s.mae_goals), fmt(s.mae_goal_diff)});
  };
  for (const auto& s : report.overall) line(s, "all");
  for (const auto& f : report.folds)
    for (const auto& s : f.methods) line(s, std::to_string(f.edition));
}

}  // namespace hybridcast::metrics
