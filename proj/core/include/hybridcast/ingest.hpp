#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "hybridcast/common.hpp"

namespace hybridcast {

/// One historic international match. `neutral == false` means the match was
/// played in the country of exactly one of the two teams.
struct MatchRecord {
  Date date;
  std::string home_team;
  std::string away_team;
  int home_goals = 0;
  int away_goals = 0;
  std::string venue_country;
  bool neutral = false;

  bool home_team_at_home() const { return !neutral && venue_country == home_team; }
  bool away_team_at_home() const { return !neutral && venue_country == away_team; }

  friend bool operator==(const MatchRecord&, const MatchRecord&) = default;
};

struct OddsQuote {
  std::string bookmaker;
  std::string team;
  double quoted_odds = 0.0;  // decimal odds, stake included
};

// Quoted outright odds of several bookmakers over a common team list.
// Every bookmaker quotes every team; order is first appearance in the input.
class OddsTable {
 public:
  OddsTable() = default;
  /// Groups quotes by bookmaker. Throws ValidationError on coverage gaps,
  /// duplicate quotes or odds <= 1.
  static OddsTable from_quotes(const std::vector<OddsQuote>& quotes);

  const std::vector<std::string>& bookmakers() const { return bookmakers_; }
  const std::vector<std::string>& teams() const { return teams_; }
  double quoted(std::size_t bookmaker, std::size_t team) const { return odds_[bookmaker][team]; }
  const std::vector<double>& quotes_for(std::size_t bookmaker) const { return odds_[bookmaker]; }
  std::vector<OddsQuote> quotes() const;

  friend bool operator==(const OddsTable&, const OddsTable&) = default;

 private:
  std::vector<std::string> bookmakers_;
  std::vector<std::string> teams_;
  std::vector<std::vector<double>> odds_;
};

/// A maximal match interval with a constant set of players on the pitch.
struct SegmentRecord {
  std::string match_id;
  int segment_id = 0;
  int start_minute = 0;
  int end_minute = 0;
  std::vector<std::string> home_players;  // sorted, unique
  std::vector<std::string> away_players;
  int home_red_at_start = 0;
  int away_red_at_start = 0;
  int home_goals_during = 0;
  int away_goals_during = 0;
  Date match_date;
  bool neutral = false;
  std::string venue_country;

  int duration() const { return end_minute - start_minute; }

  friend bool operator==(const SegmentRecord&, const SegmentRecord&) = default;
};

// Per-team covariates for one tournament edition. `raw_values` hold the file
// content; `values` hold the model inputs, where squad-count covariates are
// rescaled to a 23-player squad by 23 / squad_size.
struct CovariateRecord {
  int tournament_year = 0;
  std::string team;
  int squad_size = 23;
  std::map<std::string, double> raw_values;
  std::map<std::string, double> values;

  double value(const std::string& name) const;

  friend bool operator==(const CovariateRecord&, const CovariateRecord&) = default;
};

namespace covariates {
/// Covariate columns in file order.
const std::vector<std::string>& names();
/// Columns counted over squad members; rescaled by 23 / squad_size.
bool is_squad_count(std::string_view name);
/// 0/1 dummy columns.
bool is_dummy(std::string_view name);
}  // namespace covariates

// ---- Parsing. Every parser either returns a fully valid dataset or throws.

std::vector<MatchRecord> parse_matches(const std::filesystem::path& path);
std::vector<MatchRecord> parse_matches_text(std::string_view text, const std::string& source = "matches.csv");
void write_matches(std::ostream& out, const std::vector<MatchRecord>& matches);
void validate(const MatchRecord& match);

OddsTable parse_odds(const std::filesystem::path& path);
OddsTable parse_odds_text(std::string_view text, const std::string& source = "odds.csv");
void write_odds(std::ostream& out, const OddsTable& table);

std::vector<SegmentRecord> parse_segments(const std::filesystem::path& path);
std::vector<SegmentRecord> parse_segments_text(std::string_view text, const std::string& source = "segments.csv");
void write_segments(std::ostream& out, const std::vector<SegmentRecord>& segments);
/// Checks per-segment invariants and per-match contiguity. Throws ValidationError.
void validate_segments(const std::vector<SegmentRecord>& segments);

std::vector<CovariateRecord> parse_covariates(const std::filesystem::path& path);
std::vector<CovariateRecord> parse_covariates_text(std::string_view text,
                                                   const std::string& source = "covariates.csv");
void write_covariates(std::ostream& out, const std::vector<CovariateRecord>& records);
/// Builds a record from raw file values, applying the squad rescaling.
CovariateRecord make_covariate_record(int year, std::string team, int squad_size,
                                      std::map<std::string, double> raw_values);

/// (team, player) pairs, e.g. squads.csv.
std::vector<std::pair<std::string, std::string>> parse_team_players(const std::filesystem::path& path);

struct PoolEntry {
  std::string team;
  std::string player;
  Date last_appearance;
};
std::vector<PoolEntry> parse_pool(const std::filesystem::path& path);

}  // namespace hybridcast
