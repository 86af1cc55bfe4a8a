#pragma once

#include <Eigen/SparseCore>
#include <map>
#include <string>
#include <vector>

#include "hybridcast/common.hpp"
#include "hybridcast/ingest.hpp"

namespace hybridcast::pm {

struct DesignOptions {
  Date as_of;
  double half_period_days = 730.0;
  double red_card_factor = 10.0 / 11.0;  // per missing player on the short-handed side
  double closeness_floor = 0.25;
  // Age adjustment 1 + age_slope * (age - peak_age) / peak_age; off by default.
  double age_slope = 0.0;
  double peak_age = 27.0;
  std::map<std::string, double> player_age;
  // League multiplier per player; players not listed get 1.
  std::map<std::string, double> player_league_factor;
};

// Weighted regression design over segments. Columns: players (sorted), one
// home-advantage column per venue country, then one column per potential red
// card. Response is the home-minus-away goal difference of the segment.
struct PMDesign {
  std::vector<std::string> players;
  std::vector<std::string> home_countries;
  int red_columns = 0;
  Eigen::SparseMatrix<double, Eigen::RowMajor> x;
  std::vector<double> y;
  std::vector<double> weight;
  // Same-side co-occurrence weight between players, indexed like `players`.
  std::vector<std::map<int, double>> teammates;

  std::size_t rows() const { return y.size(); }
  std::size_t columns() const { return players.size() + home_countries.size() + static_cast<std::size_t>(red_columns); }
};

/// Throws ValidationError for segments after `as_of`, a player on both sides
/// of one segment, or invalid segment data.
PMDesign build_design(const std::vector<SegmentRecord>& segments, const DesignOptions& options);

struct FitOptions {
  double ridge = 1.0;
  int prior_passes = 2;  // refits with teammate-prior shrinkage targets
  int teammates = 5;     // most common teammates forming a player's prior
  // Dense factorization up to this many columns, conjugate gradient beyond.
  std::size_t dense_limit = 4000;
};

struct PMRatings {
  std::map<std::string, double> ratings;
  std::map<std::string, double> home_advantage;
  std::vector<double> red_card;
  double ridge = 0.0;
  Date as_of;
};

/// Minimizes sum_i w_i (y_i - x_i b)^2 + ridge * |b - mu|^2, where mu is zero
/// on the first pass and, for players, the co-occurrence-weighted mean rating
/// of their most common teammates on later passes.
PMRatings fit_pm(const PMDesign& design, const FitOptions& options, Date as_of = {});

struct SquadFeatures {
  double mean_pm = 0.0;
  double median_pm = 0.0;
  double top11_pm = 0.0;
  int missing_players = 0;
  std::vector<std::string> unrated;  // squad players given the squad-mate mean
};

/// Aggregates of a squad's ratings. `pool` holds the nation's players with a
/// recent appearance; those outside the squad rated above the squad's
/// 11th-best rating count as missing. Throws ValidationError for squads
/// smaller than 11 or squads without any rated player.
SquadFeatures squad_features(const PMRatings& ratings, const std::vector<std::string>& squad,
                             const std::vector<std::string>& pool);

/// Players of `team` with an appearance within `window_days` before `as_of`.
std::vector<std::string> national_pool(const std::vector<PoolEntry>& pool, const std::string& team, Date as_of,
                                       long window_days = 730);

}  // namespace hybridcast::pm
