#include "hybridcast/plus_minus.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "hybridcast/poisson_rank.hpp"

namespace hybridcast::pm {

PMDesign build_design(const std::vector<SegmentRecord>& segments, const DesignOptions& options) {
  if (!(options.half_period_days > 0.0)) throw ValidationError("half period must be positive");
  if (!(options.red_card_factor > 0.0)) throw ValidationError("red-card factor must be positive");
  validate_segments(segments);

  std::set<std::string> players, countries;
  int max_red = 0;
  for (const auto& s : segments) {
    if (s.match_date > options.as_of)
      throw ValidationError("segment " + s.match_id + "/" + std::to_string(s.segment_id) + " is dated after " +
                            options.as_of.to_string());
    players.insert(s.home_players.begin(), s.home_players.end());
    players.insert(s.away_players.begin(), s.away_players.end());
    if (!s.neutral) countries.insert(s.venue_country);
    max_red = std::max({max_red, s.home_red_at_start, s.away_red_at_start});
  }

  PMDesign d;
  d.players.assign(players.begin(), players.end());
  d.home_countries.assign(countries.begin(), countries.end());
  d.red_columns = max_red;
  d.teammates.resize(d.players.size());
  auto player_col = [&](const std::string& p) {
    return static_cast<int>(std::lower_bound(d.players.begin(), d.players.end(), p) - d.players.begin());
  };
  const int home_base = static_cast<int>(d.players.size());
  const int red_base = home_base + static_cast<int>(d.home_countries.size());

  auto multiplier = [&](const std::string& p) {
    double m = 1.0;
    if (options.age_slope != 0.0) {
      const auto it = options.player_age.find(p);
      if (it != options.player_age.end())
        m *= 1.0 + options.age_slope * (it->second - options.peak_age) / options.peak_age;
    }
    const auto lf = options.player_league_factor.find(p);
    if (lf != options.player_league_factor.end()) m *= lf->second;
    return m;
  };

  // Goal difference at the start of each segment, per match in segment order.
  std::vector<std::size_t> order(segments.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    if (segments[a].match_id != segments[b].match_id) return segments[a].match_id < segments[b].match_id;
    return segments[a].segment_id < segments[b].segment_id;
  });
  std::vector<int> gd_at_start(segments.size(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& s = segments[order[k]];
    if (k > 0 && segments[order[k - 1]].match_id == s.match_id) {
      const auto& prev = segments[order[k - 1]];
      gd_at_start[order[k]] = gd_at_start[order[k - 1]] + prev.home_goals_during - prev.away_goals_during;
    }
  }

  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    const int row = static_cast<int>(i);
    const double home_scale = std::pow(options.red_card_factor, s.home_red_at_start);
    const double away_scale = std::pow(options.red_card_factor, s.away_red_at_start);
    for (const auto& p : s.home_players) triplets.emplace_back(row, player_col(p), home_scale * multiplier(p));
    for (const auto& p : s.away_players) triplets.emplace_back(row, player_col(p), -away_scale * multiplier(p));
    if (!s.neutral) {
      const auto c = std::lower_bound(d.home_countries.begin(), d.home_countries.end(), s.venue_country) -
                     d.home_countries.begin();
      triplets.emplace_back(row, home_base + static_cast<int>(c), 1.0);
    }
    for (int k = 1; k <= max_red; ++k) {
      const double v = (s.home_red_at_start >= k ? 1.0 : 0.0) - (s.away_red_at_start >= k ? 1.0 : 0.0);
      if (v != 0.0) triplets.emplace_back(row, red_base + k - 1, v);
    }
    d.y.push_back(s.home_goals_during - s.away_goals_during);
    const double recency =
        rank::time_weight(static_cast<double>(days_between(s.match_date, options.as_of)), options.half_period_days);
    const double duration = s.duration() / 90.0;
    const double closeness = std::max(1.0 / (1.0 + std::abs(gd_at_start[i])), options.closeness_floor);
    const double w = recency * duration * closeness;
    d.weight.push_back(w);
    for (const auto* side : {&s.home_players, &s.away_players})
      for (const auto& a : *side)
        for (const auto& b : *side)
          if (a != b) d.teammates[static_cast<std::size_t>(player_col(a))][player_col(b)] += w;
  }
  d.x.resize(static_cast<Eigen::Index>(segments.size()), static_cast<Eigen::Index>(d.columns()));
  d.x.setFromTriplets(triplets.begin(), triplets.end());
  return d;
}

PMRatings fit_pm(const PMDesign& design, const FitOptions& options, Date as_of) {
  if (!(options.ridge > 0.0)) throw ValidationError("ridge strength must be positive");
  if (options.prior_passes < 0) throw ValidationError("prior passes must be nonnegative");
  const auto p = static_cast<Eigen::Index>(design.columns());
  const auto n = static_cast<Eigen::Index>(design.rows());
  Eigen::Map<const Eigen::VectorXd> y(design.y.data(), n);
  Eigen::Map<const Eigen::VectorXd> w(design.weight.data(), n);

  const Eigen::SparseMatrix<double> xt = design.x.transpose();
  Eigen::SparseMatrix<double> gram = xt * w.asDiagonal() * design.x;
  Eigen::SparseMatrix<double> ridge(p, p);
  ridge.setIdentity();
  gram += options.ridge * ridge;
  const Eigen::VectorXd xty = xt * w.cwiseProduct(y);

  const bool dense = static_cast<std::size_t>(p) <= options.dense_limit;
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  if (dense) {
    ldlt.compute(Eigen::MatrixXd(gram));
  } else {
    cg.setTolerance(1e-12);
    cg.compute(gram);
  }
  auto solve = [&](const Eigen::VectorXd& rhs) -> Eigen::VectorXd {
    return dense ? Eigen::VectorXd(ldlt.solve(rhs)) : Eigen::VectorXd(cg.solve(rhs));
  };

  const std::size_t np = design.players.size();
  // Each player's most common teammates and their co-occurrence weights.
  std::vector<std::vector<std::pair<int, double>>> top(np);
  for (std::size_t j = 0; j < np; ++j) {
    std::vector<std::pair<int, double>> all(design.teammates[j].begin(), design.teammates[j].end());
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (all.size() > static_cast<std::size_t>(options.teammates)) all.resize(static_cast<std::size_t>(options.teammates));
    top[j] = std::move(all);
  }

  Eigen::VectorXd prior = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd beta = solve(xty);
  for (int pass = 0; pass < options.prior_passes; ++pass) {
    for (std::size_t j = 0; j < np; ++j) {
      double num = 0.0, den = 0.0;
      for (const auto& [k, c] : top[j]) {
        num += c * beta[k];
        den += c;
      }
      prior[static_cast<Eigen::Index>(j)] = den > 0.0 ? num / den : 0.0;
    }
    beta = solve(xty + options.ridge * prior);
  }

  PMRatings out;
  out.ridge = options.ridge;
  out.as_of = as_of;
  for (std::size_t j = 0; j < np; ++j) out.ratings[design.players[j]] = beta[static_cast<Eigen::Index>(j)];
  for (std::size_t c = 0; c < design.home_countries.size(); ++c)
    out.home_advantage[design.home_countries[c]] = beta[static_cast<Eigen::Index>(np + c)];
  for (int k = 0; k < design.red_columns; ++k)
    out.red_card.push_back(beta[static_cast<Eigen::Index>(np + design.home_countries.size()) + k]);
  return out;
}

SquadFeatures squad_features(const PMRatings& ratings, const std::vector<std::string>& squad,
                             const std::vector<std::string>& pool) {
  const std::set<std::string> members(squad.begin(), squad.end());
  if (members.size() < 11)
    throw ValidationError("squad has " + std::to_string(members.size()) + " players, at least 11 required");
  SquadFeatures f;
  std::vector<double> values;
  for (const auto& p : members) {
    const auto it = ratings.ratings.find(p);
    if (it == ratings.ratings.end()) f.unrated.push_back(p);
    else values.push_back(it->second);
  }
  if (values.empty()) throw ValidationError("no squad player has a rating");
  const double rated_mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  values.insert(values.end(), f.unrated.size(), rated_mean);

  std::sort(values.begin(), values.end(), std::greater<>());
  const std::size_t n = values.size();
  f.mean_pm = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  f.median_pm = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  f.top11_pm = std::accumulate(values.begin(), values.begin() + 11, 0.0) / 11.0;
  const double eleventh = values[10];
  std::set<std::string> counted;
  for (const auto& p : pool) {
    if (members.count(p) || !counted.insert(p).second) continue;
    const auto it = ratings.ratings.find(p);
    if (it != ratings.ratings.end() && it->second > eleventh) ++f.missing_players;
  }
  return f;
}

std::vector<std::string> national_pool(const std::vector<PoolEntry>& pool, const std::string& team, Date as_of,
                                       long window_days) {
  std::set<std::string> out;
  for (const auto& e : pool) {
    const long back = days_between(e.last_appearance, as_of);
    if (e.team == team && back >= 0 && back <= window_days) out.insert(e.player);
  }
  return {out.begin(), out.end()};
}

}  // namespace hybridcast::pm
