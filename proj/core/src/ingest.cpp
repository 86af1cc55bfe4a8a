#include "hybridcast/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "hybridcast/csv.hpp"

namespace hybridcast {

namespace {

const std::vector<std::string> kMatchHeader = {"date",       "home_team",     "away_team", "home_goals",
                                               "away_goals", "venue_country", "neutral"};
const std::vector<std::string> kMatchScoreHeader = {"date",  "home_team",     "away_team",
                                                    "score", "venue_country", "neutral"};
const std::vector<std::string> kOddsHeader = {"bookmaker", "team", "quoted_odds"};
const std::vector<std::string> kSegmentHeader = {
    "match_id", "segment_id", "start_min", "end_min",   "home_players", "away_players", "home_red",
    "away_red", "home_goals", "away_goals", "match_date", "neutral",      "venue_country"};

std::string identifier(const csv::Row& row, std::size_t col, const csv::Table& table) {
  auto id = normalize_id(row.fields.at(col));
  if (id.empty())
    throw ParseError(table.source, row.line,
                     "row " + std::to_string(row.line) + ", column '" + table.header[col] + "': empty identifier");
  return id;
}

std::vector<std::string> player_list(const csv::Row& row, std::size_t col, const csv::Table& table) {
  std::vector<std::string> players;
  std::string_view rest = row.fields.at(col);
  while (!rest.empty()) {
    const auto cut = rest.find(';');
    const auto item = normalize_id(rest.substr(0, cut));
    if (!item.empty()) players.push_back(item);
    if (cut == std::string_view::npos) break;
    rest.remove_prefix(cut + 1);
  }
  std::sort(players.begin(), players.end());
  if (std::adjacent_find(players.begin(), players.end()) != players.end())
    throw ParseError(table.source, row.line, "row " + std::to_string(row.line) + ": player listed twice");
  return players;
}

std::string join_players(const std::vector<std::string>& players) {
  std::string out;
  for (const auto& p : players) out += (out.empty() ? "" : ";") + p;
  return out;
}

std::pair<int, int> parse_score(const csv::Row& row, std::size_t col, const csv::Table& table) {
  const std::string& f = row.fields.at(col);
  const auto dash = f.find('-');
  auto bad = [&]() -> std::pair<int, int> {
    throw ParseError(table.source, row.line, "row " + std::to_string(row.line) + ": malformed score '" + f + "'");
  };
  if (dash == std::string::npos) return bad();
  const auto lhs = trim(std::string_view(f).substr(0, dash));
  const auto rhs = trim(std::string_view(f).substr(dash + 1));
  int a = 0, b = 0;
  if (lhs.empty() || rhs.empty()) return bad();
  auto r1 = std::from_chars(lhs.data(), lhs.data() + lhs.size(), a);
  auto r2 = std::from_chars(rhs.data(), rhs.data() + rhs.size(), b);
  if (r1.ec != std::errc{} || r1.ptr != lhs.data() + lhs.size() || r2.ec != std::errc{} ||
      r2.ptr != rhs.data() + rhs.size() || a < 0 || b < 0)
    return bad();
  return {a, b};
}

template <class Fn>
auto with_row_context(const csv::Table& table, const csv::Row& row, Fn&& fn) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ParseError(table.source, row.line, "row " + std::to_string(row.line) + ": " + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------- matches

void validate(const MatchRecord& m) {
  if (m.home_team.empty() || m.away_team.empty()) throw ValidationError("empty team identifier");
  if (m.home_team == m.away_team) throw ValidationError("team '" + m.home_team + "' plays itself");
  if (m.home_goals < 0 || m.away_goals < 0) throw ValidationError("negative goals");
  if (!m.neutral && m.venue_country != m.home_team && m.venue_country != m.away_team)
    throw ValidationError("non-neutral match in '" + m.venue_country + "' is not in either team's country");
}

std::vector<MatchRecord> parse_matches_text(std::string_view text, const std::string& source) {
  const auto table = csv::parse(text, source);
  const bool score_form = table.header == kMatchScoreHeader;
  if (!score_form) table.require_header(kMatchHeader);

  std::vector<MatchRecord> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    MatchRecord m;
    m.date = csv::to_date(row, 0, table);
    m.home_team = identifier(row, 1, table);
    m.away_team = identifier(row, 2, table);
    std::size_t col = 3;
    if (score_form) {
      std::tie(m.home_goals, m.away_goals) = parse_score(row, col++, table);
    } else {
      m.home_goals = csv::to_count(row, col++, table);
      m.away_goals = csv::to_count(row, col++, table);
    }
    m.venue_country = identifier(row, col++, table);
    m.neutral = csv::to_bool(row, col, table);
    with_row_context(table, row, [&] { validate(m); });
    out.push_back(std::move(m));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
  return out;
}

std::vector<MatchRecord> parse_matches(const std::filesystem::path& path) {
  return parse_matches_text(csv::read_text(path), path.string());
}

void write_matches(std::ostream& out, const std::vector<MatchRecord>& matches) {
  csv::write_row(out, kMatchHeader);
  for (const auto& m : matches)
    csv::write_row(out, {m.date.to_string(), m.home_team, m.away_team, std::to_string(m.home_goals),
                         std::to_string(m.away_goals), m.venue_country, m.neutral ? "yes" : "no"});
}

// ---------------------------------------------------------------- odds

OddsTable OddsTable::from_quotes(const std::vector<OddsQuote>& quotes) {
  OddsTable t;
  std::map<std::string, std::size_t> bk_index, team_index;
  for (const auto& q : quotes) {
    if (!(q.quoted_odds > 1.0))
      throw ValidationError("bookmaker '" + q.bookmaker + "' quotes '" + q.team + "' at " +
                            csv::exact(q.quoted_odds) + " (odds must exceed 1)");
    if (bk_index.emplace(q.bookmaker, t.bookmakers_.size()).second) t.bookmakers_.push_back(q.bookmaker);
    if (team_index.emplace(q.team, t.teams_.size()).second) t.teams_.push_back(q.team);
  }
  if (t.teams_.size() < 2) throw ValidationError("odds table needs at least two teams");
  t.odds_.assign(t.bookmakers_.size(), std::vector<double>(t.teams_.size(), 0.0));
  for (const auto& q : quotes) {
    double& slot = t.odds_[bk_index[q.bookmaker]][team_index[q.team]];
    if (slot != 0.0)
      throw ValidationError("bookmaker '" + q.bookmaker + "' quotes '" + q.team + "' more than once");
    slot = q.quoted_odds;
  }
  for (std::size_t b = 0; b < t.bookmakers_.size(); ++b)
    for (std::size_t i = 0; i < t.teams_.size(); ++i)
      if (t.odds_[b][i] == 0.0)
        throw ValidationError("bookmaker '" + t.bookmakers_[b] + "' has no quote for team '" + t.teams_[i] + "'");
  return t;
}

std::vector<OddsQuote> OddsTable::quotes() const {
  std::vector<OddsQuote> out;
  for (std::size_t b = 0; b < bookmakers_.size(); ++b)
    for (std::size_t i = 0; i < teams_.size(); ++i) out.push_back({bookmakers_[b], teams_[i], odds_[b][i]});
  return out;
}

OddsTable parse_odds_text(std::string_view text, const std::string& source) {
  const auto table = csv::parse(text, source);
  table.require_header(kOddsHeader);
  std::vector<OddsQuote> quotes;
  for (const auto& row : table.rows) {
    OddsQuote q{identifier(row, 0, table), identifier(row, 1, table), csv::to_double(row, 2, table)};
    if (!(q.quoted_odds > 1.0))
      throw ParseError(table.source, row.line,
                       "row " + std::to_string(row.line) + ": quoted odds must exceed 1, got " + row.fields[2]);
    quotes.push_back(std::move(q));
  }
  try {
    return OddsTable::from_quotes(quotes);
  } catch (const ValidationError& e) {
    throw ValidationError(table.source + ": " + e.what());
  }
}

OddsTable parse_odds(const std::filesystem::path& path) { return parse_odds_text(csv::read_text(path), path.string()); }

void write_odds(std::ostream& out, const OddsTable& t) {
  csv::write_row(out, kOddsHeader);
  for (const auto& q : t.quotes()) csv::write_row(out, {q.bookmaker, q.team, csv::exact(q.quoted_odds)});
}

// ---------------------------------------------------------------- segments

void validate_segments(const std::vector<SegmentRecord>& segments) {
  std::map<std::string, std::vector<const SegmentRecord*>> by_match;
  for (const auto& s : segments) {
    const std::string where = "segment " + s.match_id + "/" + std::to_string(s.segment_id);
    if (s.start_minute < 0) throw ValidationError(where + ": negative start minute");
    if (s.end_minute <= s.start_minute) throw ValidationError(where + ": end minute must exceed start minute");
    if (s.home_red_at_start < 0 || s.away_red_at_start < 0 || s.home_goals_during < 0 || s.away_goals_during < 0)
      throw ValidationError(where + ": negative count");
    if (s.home_players.empty() || s.away_players.empty()) throw ValidationError(where + ": empty line-up");
    std::vector<std::string> both;
    std::set_intersection(s.home_players.begin(), s.home_players.end(), s.away_players.begin(),
                          s.away_players.end(), std::back_inserter(both));
    if (!both.empty()) throw ValidationError(where + ": player '" + both.front() + "' appears for both teams");
    by_match[s.match_id].push_back(&s);
  }
  for (auto& [id, segs] : by_match) {
    std::sort(segs.begin(), segs.end(), [](auto* a, auto* b) { return a->segment_id < b->segment_id; });
    for (std::size_t k = 1; k < segs.size(); ++k) {
      const auto& prev = *segs[k - 1];
      const auto& cur = *segs[k];
      const std::string where = "match " + id + " segment " + std::to_string(cur.segment_id);
      if (cur.segment_id == prev.segment_id) throw ValidationError(where + ": duplicate segment id");
      if (cur.start_minute != prev.end_minute)
        throw ValidationError(where + ": segments are not contiguous (starts at " +
                              std::to_string(cur.start_minute) + ", previous ends at " +
                              std::to_string(prev.end_minute) + ")");
      if (cur.match_date != prev.match_date || cur.neutral != prev.neutral || cur.venue_country != prev.venue_country)
        throw ValidationError(where + ": match date or venue differs between segments");
    }
  }
}

std::vector<SegmentRecord> parse_segments_text(std::string_view text, const std::string& source) {
  const auto table = csv::parse(text, source);
  table.require_header(kSegmentHeader);
  std::vector<SegmentRecord> out;
  for (const auto& row : table.rows) {
    SegmentRecord s;
    s.match_id = identifier(row, 0, table);
    s.segment_id = static_cast<int>(csv::to_long(row, 1, table));
    s.start_minute = csv::to_count(row, 2, table);
    s.end_minute = csv::to_count(row, 3, table);
    s.home_players = player_list(row, 4, table);
    s.away_players = player_list(row, 5, table);
    s.home_red_at_start = csv::to_count(row, 6, table);
    s.away_red_at_start = csv::to_count(row, 7, table);
    s.home_goals_during = csv::to_count(row, 8, table);
    s.away_goals_during = csv::to_count(row, 9, table);
    s.match_date = csv::to_date(row, 10, table);
    s.neutral = csv::to_bool(row, 11, table);
    s.venue_country = identifier(row, 12, table);
    with_row_context(table, row, [&] { validate_segments({s}); });
    out.push_back(std::move(s));
  }
  try {
    validate_segments(out);
  } catch (const ValidationError& e) {
    throw ValidationError(table.source + ": " + e.what());
  }
  return out;
}

std::vector<SegmentRecord> parse_segments(const std::filesystem::path& path) {
  return parse_segments_text(csv::read_text(path), path.string());
}

void write_segments(std::ostream& out, const std::vector<SegmentRecord>& segments) {
  csv::write_row(out, kSegmentHeader);
  for (const auto& s : segments)
    csv::write_row(out, {s.match_id, std::to_string(s.segment_id), std::to_string(s.start_minute),
                         std::to_string(s.end_minute), join_players(s.home_players), join_players(s.away_players),
                         std::to_string(s.home_red_at_start), std::to_string(s.away_red_at_start),
                         std::to_string(s.home_goals_during), std::to_string(s.away_goals_during),
                         s.match_date.to_string(), s.neutral ? "yes" : "no", s.venue_country});
}

// ---------------------------------------------------------------- covariates

namespace covariates {

const std::vector<std::string>& names() {
  static const std::vector<std::string> kNames = {
      "gdp",           "population",   "host",       "neighbor",           "market_value",
      "fifa_rank",     "uefa_points",  "uefa_places", "max_teammates",     "second_max_teammates",
      "age_distance",  "cl_players",   "el_players", "legionnaires",       "coach_age_distance",
      "coach_nationality"};
  return kNames;
}

bool is_squad_count(std::string_view name) {
  return name == "max_teammates" || name == "second_max_teammates" || name == "cl_players" ||
         name == "el_players" || name == "legionnaires";
}

bool is_dummy(std::string_view name) { return name == "host" || name == "neighbor" || name == "coach_nationality"; }

}  // namespace covariates

double CovariateRecord::value(const std::string& name) const {
  const auto it = values.find(name);
  if (it == values.end()) throw ValidationError("no covariate '" + name + "' for " + team);
  return it->second;
}

CovariateRecord make_covariate_record(int year, std::string team, int squad_size,
                                      std::map<std::string, double> raw_values) {
  if (squad_size <= 0) throw ValidationError("squad size must be positive");
  CovariateRecord r;
  r.tournament_year = year;
  r.team = std::move(team);
  r.squad_size = squad_size;
  for (const auto& name : covariates::names()) {
    const auto it = raw_values.find(name);
    if (it == raw_values.end()) throw ValidationError("missing covariate '" + name + "'");
    if (covariates::is_dummy(name) && it->second != 0.0 && it->second != 1.0)
      throw ValidationError("dummy covariate '" + name + "' must be 0 or 1");
  }
  if (raw_values.size() != covariates::names().size()) throw ValidationError("unknown covariate column");
  r.raw_values = std::move(raw_values);
  r.values = r.raw_values;
  const double scale = 23.0 / squad_size;
  for (auto& [name, v] : r.values)
    if (covariates::is_squad_count(name)) v *= scale;
  return r;
}

std::vector<CovariateRecord> parse_covariates_text(std::string_view text, const std::string& source) {
  const auto table = csv::parse(text, source);
  std::vector<std::string> header = {"year", "team", "squad_size"};
  header.insert(header.end(), covariates::names().begin(), covariates::names().end());
  table.require_header(header);
  std::vector<CovariateRecord> out;
  std::set<std::pair<int, std::string>> seen;
  for (const auto& row : table.rows) {
    const int year = static_cast<int>(csv::to_long(row, 0, table));
    auto team = identifier(row, 1, table);
    const int squad = csv::to_count(row, 2, table);
    std::map<std::string, double> raw;
    for (std::size_t c = 3; c < header.size(); ++c) raw[header[c]] = csv::to_double(row, c, table);
    auto rec = with_row_context(table, row, [&] { return make_covariate_record(year, team, squad, raw); });
    if (!seen.emplace(year, rec.team).second)
      throw ParseError(table.source, row.line, "row " + std::to_string(row.line) + ": duplicate team-year");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<CovariateRecord> parse_covariates(const std::filesystem::path& path) {
  return parse_covariates_text(csv::read_text(path), path.string());
}

void write_covariates(std::ostream& out, const std::vector<CovariateRecord>& records) {
  std::vector<std::string> header = {"year", "team", "squad_size"};
  header.insert(header.end(), covariates::names().begin(), covariates::names().end());
  csv::write_row(out, header);
  for (const auto& r : records) {
    std::vector<std::string> row = {std::to_string(r.tournament_year), r.team, std::to_string(r.squad_size)};
    for (const auto& name : covariates::names()) row.push_back(csv::exact(r.raw_values.at(name)));
    csv::write_row(out, row);
  }
}

// ---------------------------------------------------------------- squads / pool

std::vector<std::pair<std::string, std::string>> parse_team_players(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  table.require_header({"team", "player"});
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& row : table.rows) {
    auto entry = std::make_pair(identifier(row, 0, table), identifier(row, 1, table));
    if (!seen.insert(entry).second)
      throw ParseError(table.source, row.line, "row " + std::to_string(row.line) + ": duplicate entry");
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<PoolEntry> parse_pool(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  table.require_header({"team", "player", "last_appearance"});
  std::vector<PoolEntry> out;
  for (const auto& row : table.rows)
    out.push_back({identifier(row, 0, table), identifier(row, 1, table), csv::to_date(row, 2, table)});
  return out;
}

}  // namespace hybridcast
