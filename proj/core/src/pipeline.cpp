#include "hybridcast/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hybridcast/csv.hpp"
#include "hybridcast/evaluation.hpp"

namespace hybridcast::pipeline {

namespace fs = std::filesystem;

namespace {

std::string stage_name(sim::Stage s) { return s == sim::Stage::group ? "group" : "knockout"; }

sim::Stage stage_from(const std::string& s) {
  if (s == "group") return sim::Stage::group;
  if (s == "knockout") return sim::Stage::knockout;
  throw std::invalid_argument("stage must be group or knockout, got '" + s + "'");
}

const fs::path& require(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ValidationError("no " + what + " file configured");
  return p;
}

// Comment lines "# key=value" at the top of an artifact.
std::map<std::string, std::string> comment_block(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t.front() != '#') break;
    const auto body = trim(t.substr(1));
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) continue;
    out[std::string(trim(body.substr(0, eq)))] = std::string(trim(body.substr(eq + 1)));
  }
  return out;
}

class Artifacts {
 public:
  Artifacts(fs::path dir, std::string digest) : dir_(std::move(dir)), digest_(std::move(digest)) {}

  template <class Fn>
  void write(const std::string& name, Fn&& fn) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    fn(out);
    out.close();
    if (!out) throw Error("failed writing " + path.string());
    files_.push_back(path);
  }

  const std::string& digest() const { return digest_; }
  const std::vector<fs::path>& files() const { return files_; }

 private:
  fs::path dir_;
  std::string digest_;
  std::vector<fs::path> files_;
};

}  // namespace

StageError::StageError(std::string stage, const std::string& message)
    : Error("[" + stage + "] " + message), stage_(std::move(stage)) {}

std::string RunConfig::canonical() const {
  std::ostringstream o;
  auto p = [&](const char* key, const fs::path& v) { o << key << '=' << v.generic_string() << '\n'; };
  auto v = [&](const char* key, const std::string& value) { o << key << '=' << value << '\n'; };
  p("spec", spec);
  p("matches", matches);
  p("odds", odds);
  p("segments", segments);
  p("squads", squads);
  p("pool", pool);
  p("covariates", covariates);
  p("train_covariates", train_covariates);
  p("train_team_features", train_team_features);
  p("train_matches", train_matches);
  p("threeway_odds", threeway_odds);
  p("external_predictions", external_predictions);
  v("as_of", as_of ? as_of->to_string() : "");
  v("half_period_days", csv::exact(half_period_days));
  v("model", rank::to_string(model));
  v("pm_half_period_days", csv::exact(pm_half_period_days));
  v("ridge", csv::exact(ridge));
  v("pm_prior_passes", std::to_string(pm_prior_passes));
  v("folds", std::to_string(folds));
  v("grid_size", std::to_string(grid_size));
  v("min_ratio", csv::exact(min_ratio));
  v("one_se_rule", one_se_rule ? "1" : "0");
  v("runs", std::to_string(runs));
  v("consensus_runs", std::to_string(consensus_runs));
  v("inversion_tolerance", csv::exact(inversion_tolerance));
  v("inversion_max_iterations", std::to_string(inversion_max_iterations));
  v("seed", seed ? std::to_string(*seed) : "");
  v("extra_time_factor", csv::exact(extra_time_factor));
  v("tie_break", tie_break == sim::TieBreak::footnote ? "footnote" : "uefa");
  v("zero_host_dummies", zero_host_dummies ? "1" : "0");
  return o.str();
}

std::string RunConfig::digest() const { return hex64(fnv1a64(canonical())); }

// ------------------------------------------------------------ artifacts

void write_digest(std::ostream& out, const std::string& digest) { out << "# config=" << digest << '\n'; }

void write_ratings(std::ostream& out, const rank::RatingSet& r, const std::string& digest) {
  write_digest(out, digest);
  out << "# model=" << rank::to_string(r.model_kind) << '\n';
  out << "# as_of=" << r.fitted_as_of.to_string() << '\n';
  out << "# intercept=" << csv::exact(r.intercept) << '\n';
  out << "# home_effect=" << csv::exact(r.home_effect) << '\n';
  out << "# covariance=" << csv::exact(r.covariance) << '\n';
  out << "# log_likelihood=" << csv::exact(r.diagnostics.log_likelihood) << '\n';
  csv::write_row(out, {"team", "strength", "exp_strength"});
  for (const auto& [team, s] : r.strengths) csv::write_row(out, {team, csv::exact(s), csv::exact(std::exp(s))});
}

rank::RatingSet parse_ratings(const fs::path& path) {
  const auto text = csv::read_text(path);
  const auto meta = comment_block(text);
  rank::RatingSet r;
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = meta.find(key);
    if (it == meta.end()) throw ParseError(path.string(), 1, "missing '# " + key + "=' header line");
    return it->second;
  };
  try {
    r.model_kind = rank::model_kind_from_string(get("model"));
    r.fitted_as_of = Date::parse(get("as_of"));
    r.intercept = std::stod(get("intercept"));
    r.home_effect = std::stod(get("home_effect"));
    r.covariance = std::stod(get("covariance"));
    if (meta.count("log_likelihood")) r.diagnostics.log_likelihood = std::stod(meta.at("log_likelihood"));
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(path.string(), 1, std::string("bad header value: ") + e.what());
  }
  const auto t = csv::parse(text, path.string());
  t.require_header({"team", "strength", "exp_strength"});
  for (const auto& row : t.rows) r.strengths[normalize_id(row.fields[0])] = csv::to_double(row, 1, t);
  if (r.strengths.empty()) throw ParseError(path.string(), t.header_line, "no teams");
  return r;
}

void write_consensus(std::ostream& out, const consensus::ConsensusResult& c, const std::string& digest) {
  write_digest(out, digest);
  csv::write_row(out, {"team", "consensus_prob", "log_ability"});
  for (std::size_t i = 0; i < c.teams.size(); ++i)
    csv::write_row(out, {c.teams[i], csv::fixed(c.probs[i], 6), csv::exact(c.inversion.log_abilities[i])});
}

void write_overrounds(std::ostream& out, const std::vector<consensus::BookmakerMargin>& margins,
                      const std::string& digest) {
  write_digest(out, digest);
  csv::write_row(out, {"bookmaker", "delta", "overround"});
  for (const auto& m : margins) csv::write_row(out, {m.bookmaker, csv::fixed(m.delta, 6), csv::fixed(m.overround, 6)});
}

std::map<std::string, std::pair<double, double>> parse_consensus(const fs::path& path) {
  const auto t = csv::read_file(path);
  t.require_header({"team", "consensus_prob", "log_ability"});
  std::map<std::string, std::pair<double, double>> out;
  for (const auto& row : t.rows)
    if (!out.emplace(normalize_id(row.fields[0]), std::pair{csv::to_double(row, 1, t), csv::to_double(row, 2, t)})
             .second)
      throw ParseError(t.source, row.line, "duplicate team " + row.fields[0]);
  return out;
}

void write_pm_players(std::ostream& out, const pm::PMRatings& r, const std::string& digest) {
  write_digest(out, digest);
  csv::write_row(out, {"player", "rating"});
  for (const auto& [player, v] : r.ratings) csv::write_row(out, {player, csv::exact(v)});
}

void write_pm_squads(std::ostream& out, const std::map<std::string, pm::SquadFeatures>& squads,
                     const std::string& digest) {
  write_digest(out, digest);
  csv::write_row(out, {"team", "mean_pm", "median_pm", "top11_pm", "missing_players", "unrated"});
  for (const auto& [team, s] : squads) {
    std::string unrated;
    for (const auto& p : s.unrated) unrated += (unrated.empty() ? "" : ";") + p;
    csv::write_row(out, {team, csv::exact(s.mean_pm), csv::exact(s.median_pm), csv::exact(s.top11_pm),
                         std::to_string(s.missing_players), unrated});
  }
}

std::map<std::string, pm::SquadFeatures> parse_pm_squads(const fs::path& path) {
  const auto t = csv::read_file(path);
  t.require_header({"team", "mean_pm", "median_pm", "top11_pm", "missing_players", "unrated"});
  std::map<std::string, pm::SquadFeatures> out;
  for (const auto& row : t.rows) {
    pm::SquadFeatures s;
    s.mean_pm = csv::to_double(row, 1, t);
    s.median_pm = csv::to_double(row, 2, t);
    s.top11_pm = csv::to_double(row, 3, t);
    s.missing_players = csv::to_count(row, 4, t);
    std::string_view rest = row.fields[5];
    while (!rest.empty()) {
      const auto cut = rest.find(';');
      const auto name = normalize_id(rest.substr(0, cut));
      if (!name.empty()) s.unrated.push_back(name);
      rest = cut == std::string_view::npos ? std::string_view{} : rest.substr(cut + 1);
    }
    if (!out.emplace(normalize_id(row.fields[0]), s).second)
      throw ParseError(t.source, row.line, "duplicate team " + row.fields[0]);
  }
  return out;
}

std::map<std::string, pm::SquadFeatures> compute_squad_features(
    const pm::PMRatings& ratings, const std::vector<std::pair<std::string, std::string>>& squads,
    const std::vector<PoolEntry>& pool, Date as_of) {
  std::map<std::string, std::vector<std::string>> by_team;
  for (const auto& [team, player] : squads) by_team[team].push_back(player);
  std::map<std::string, pm::SquadFeatures> out;
  for (const auto& [team, squad] : by_team) {
    try {
      out[team] = pm::squad_features(ratings, squad, pm::national_pool(pool, team, as_of));
    } catch (const ValidationError& e) {
      throw ValidationError("squad of " + team + ": " + e.what());
    }
  }
  return out;
}

predict::HybridTable hybrid_features(int edition, Date as_of, const std::vector<std::string>& teams,
                                     const rank::RatingSet& ratings,
                                     const std::map<std::string, double>& log_abilities,
                                     const std::map<std::string, pm::SquadFeatures>& squads) {
  predict::HybridTable out;
  for (const auto& team : teams) {
    const auto ability = log_abilities.find(team);
    if (ability == log_abilities.end()) throw ValidationError("no bookmaker ability for " + team);
    const auto squad = squads.find(team);
    if (squad == squads.end()) throw ValidationError("no squad features for " + team);
    predict::HybridFeatures h;
    h.as_of = as_of;
    h.hist_ability = ratings.strength(team);
    h.bookmaker_log_ability = ability->second;
    h.avg_pm = squad->second.mean_pm;
    h.missing_pm_players = squad->second.missing_players;
    out[{edition, team}] = h;
  }
  return out;
}

void write_stage_probs(std::ostream& out, const bracket::StageProbabilities& p, const std::string& digest) {
  write_digest(out, digest);
  std::vector<std::string> header{"team"};
  header.insert(header.end(), p.stages.begin(), p.stages.end());
  header.push_back("se_champion");
  csv::write_row(out, header);
  const std::size_t champ = p.stages.size() - 1;
  for (std::size_t t = 0; t < p.teams.size(); ++t) {
    std::vector<std::string> row{p.teams[t]};
    for (const double v : p.probs[t]) row.push_back(csv::fixed(v, 6));
    row.push_back(csv::fixed(p.standard_errors[t][champ], 6));
    csv::write_row(out, row);
  }
}

std::vector<PairIntensity> pair_intensities(const TournamentSpec& spec, const sim::IntensitySource& source) {
  const auto compiled = bracket::compile(spec);
  std::vector<PairIntensity> out;
  const auto& teams = compiled.teams;
  for (const auto& f : compiled.fixtures) {
    const sim::MatchContext ctx{sim::Stage::group, f.host == f.first, f.host == f.second};
    const auto& a = teams[static_cast<std::size_t>(f.first)];
    const auto& b = teams[static_cast<std::size_t>(f.second)];
    const auto [la, lb] = source(a, b, ctx);
    out.push_back({a, b, sim::Stage::group, la, lb});
  }
  for (std::size_t i = 0; i < teams.size(); ++i)
    for (std::size_t j = i + 1; j < teams.size(); ++j) {
      const auto [la, lb] = source(teams[i], teams[j], sim::MatchContext{sim::Stage::knockout, false, false});
      out.push_back({teams[i], teams[j], sim::Stage::knockout, la, lb});
    }
  for (const auto& p : out)
    if (!(p.lambda_team > 0.0) || !(p.lambda_opponent > 0.0) || !std::isfinite(p.lambda_team) ||
        !std::isfinite(p.lambda_opponent))
      throw ValidationError("nonpositive intensity for " + p.team + " v " + p.opponent);
  return out;
}

void write_pair_intensities(std::ostream& out, const std::vector<PairIntensity>& pairs, const std::string& digest) {
  write_digest(out, digest);
  csv::write_row(out, {"team", "opponent", "stage", "lambda_team", "lambda_opponent"});
  for (const auto& p : pairs)
    csv::write_row(out, {p.team, p.opponent, stage_name(p.stage), csv::exact(p.lambda_team),
                         csv::exact(p.lambda_opponent)});
}

std::vector<PairIntensity> parse_pair_intensities(const fs::path& path) {
  const auto t = csv::read_file(path);
  t.require_header({"team", "opponent", "stage", "lambda_team", "lambda_opponent"});
  std::vector<PairIntensity> out;
  std::set<std::tuple<std::string, std::string, sim::Stage>> seen;
  for (const auto& row : t.rows) {
    PairIntensity p;
    p.team = normalize_id(row.fields[0]);
    p.opponent = normalize_id(row.fields[1]);
    try {
      p.stage = stage_from(to_lower(row.fields[2]));
    } catch (const std::invalid_argument& e) {
      throw ParseError(t.source, row.line, e.what());
    }
    p.lambda_team = csv::to_double(row, 3, t);
    p.lambda_opponent = csv::to_double(row, 4, t);
    if (!(p.lambda_team > 0.0) || !(p.lambda_opponent > 0.0))
      throw ParseError(t.source, row.line, "intensities must be positive");
    if (p.team == p.opponent) throw ParseError(t.source, row.line, "team plays itself");
    const auto key = p.team < p.opponent ? std::tuple{p.team, p.opponent, p.stage}
                                         : std::tuple{p.opponent, p.team, p.stage};
    if (!seen.insert(key).second) throw ParseError(t.source, row.line, "duplicate pair");
    out.push_back(std::move(p));
  }
  return out;
}

sim::IntensitySource pair_source(std::vector<PairIntensity> pairs) {
  std::map<std::tuple<std::string, std::string, sim::Stage>, std::pair<double, double>> table;
  for (const auto& p : pairs) {
    table[{p.team, p.opponent, p.stage}] = {p.lambda_team, p.lambda_opponent};
    table[{p.opponent, p.team, p.stage}] = {p.lambda_opponent, p.lambda_team};
  }
  return [table = std::move(table)](const std::string& a, const std::string& b, const sim::MatchContext& ctx) {
    const auto it = table.find({a, b, ctx.stage});
    if (it == table.end())
      throw ValidationError("no " + stage_name(ctx.stage) + " intensities for " + a + " v " + b);
    return it->second;
  };
}

sim::IntensitySource lasso_source(const predict::LassoFit& fit, const std::vector<CovariateRecord>& covariates,
                                  const predict::HybridTable& hybrid, int edition, bool zero_host_dummies) {
  std::map<std::string, CovariateRecord> cov;
  for (auto c : covariates) {
    if (c.tournament_year != edition) continue;
    if (zero_host_dummies) {
      c.values["host"] = 0.0;
      c.values["neighbor"] = 0.0;
    }
    cov[c.team] = std::move(c);
  }
  std::map<std::string, predict::HybridFeatures> hyb;
  for (const auto& [key, h] : hybrid)
    if (key.first == edition) hyb[key.second] = h;
  return [fit, cov = std::move(cov), hyb = std::move(hyb), edition](const std::string& a, const std::string& b,
                                                                    const sim::MatchContext& ctx) {
    auto find = [&](const auto& m, const std::string& team, const char* what) -> const auto& {
      const auto it = m.find(team);
      if (it == m.end())
        throw ValidationError(std::string("no ") + what + " for " + team + " in " + std::to_string(edition));
      return it->second;
    };
    predict::FeatureRow row;
    row.edition = edition;
    row.team = a;
    row.opponent = b;
    row.groupstage = ctx.stage == sim::Stage::group ? 1 : 0;
    const auto& ca = find(cov, a, "covariates");
    const auto& cb = find(cov, b, "covariates");
    const auto& ha = find(hyb, a, "rating features");
    const auto& hb = find(hyb, b, "rating features");
    row.differences = predict::difference_vector(ca, cb, ha, hb);
    const double la = predict::predict_intensity(fit, row);
    for (auto& v : row.differences) v = -v;
    row.team = b;
    row.opponent = a;
    const double lb = predict::predict_intensity(fit, row);
    return std::pair{la, lb};
  };
}

sim::IntensitySource rating_source(const rank::RatingSet& ratings) {
  return [ratings](const std::string& a, const std::string& b, const sim::MatchContext& ctx) {
    const auto venue = ctx.team_at_home       ? rank::Venue::first_at_home
                       : ctx.opponent_at_home ? rank::Venue::second_at_home
                                              : rank::Venue::neutral;
    const auto m = rank::predict_match(ratings, a, b, venue);
    return std::pair{m.lambda1, m.lambda2};
  };
}

std::string human_report(const bracket::StageProbabilities& p, const std::map<std::string, double>& consensus) {
  std::vector<std::size_t> order(p.teams.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t champ = p.stages.size() - 1;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p.probs[a][champ] > p.probs[b][champ]; });
  std::ostringstream o;
  o << "Tournament forecast from " << p.runs << " simulated tournaments (percent)\n\n";
  auto cell = [&](const std::string& s, std::size_t w) { o << std::string(w > s.size() ? w - s.size() : 0, ' ') << s; };
  cell("team", 8);
  for (const auto& s : p.stages) cell(s, 10);
  if (!consensus.empty()) cell("bookmakers", 12);
  o << '\n';
  for (const auto t : order) {
    cell(p.teams[t], 8);
    for (const double v : p.probs[t]) cell(csv::fixed(100.0 * v, 1), 10);
    if (!consensus.empty()) {
      const auto it = consensus.find(p.teams[t]);
      cell(it == consensus.end() ? "-" : csv::fixed(100.0 * it->second, 1), 12);
    }
    o << '\n';
  }
  return o.str();
}

void write_manifest(const fs::path& dir, const std::vector<fs::path>& files, const std::string& digest) {
  std::ofstream out(dir / "manifest.csv", std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + (dir / "manifest.csv").string());
  write_digest(out, digest);
  csv::write_row(out, {"file", "bytes", "fnv1a64"});
  for (const auto& f : files) {
    const auto bytes = csv::read_text(f);
    csv::write_row(out, {f.filename().generic_string(), std::to_string(bytes.size()), hex64(fnv1a64(bytes))});
  }
  if (!out) throw Error("failed writing manifest");
}

// ------------------------------------------------------------ orchestration

std::string ingest_check(const RunConfig& c) {
  return in_stage("ingest", [&] {
    std::ostringstream o;
    auto line = [&](const char* what, const fs::path& p, const std::string& detail) {
      o << what << ": " << p.generic_string() << ": " << detail << '\n';
    };
    if (!c.spec.empty()) {
      const auto s = parse_tournament_spec(c.spec);
      line("spec", c.spec,
           "edition " + std::to_string(s.edition) + ", " + std::to_string(s.teams.size()) + " teams, " +
               std::to_string(s.groups.size()) + " groups, " + std::to_string(s.rounds.size()) + " knockout rounds");
    }
    if (!c.matches.empty()) line("matches", c.matches, std::to_string(parse_matches(c.matches).size()) + " matches");
    if (!c.odds.empty()) {
      const auto t = parse_odds(c.odds);
      line("odds", c.odds,
           std::to_string(t.bookmakers().size()) + " bookmakers, " + std::to_string(t.teams().size()) + " teams");
    }
    if (!c.segments.empty())
      line("segments", c.segments, std::to_string(parse_segments(c.segments).size()) + " segments");
    if (!c.squads.empty())
      line("squads", c.squads, std::to_string(parse_team_players(c.squads).size()) + " squad players");
    if (!c.pool.empty()) line("pool", c.pool, std::to_string(parse_pool(c.pool).size()) + " pool entries");
    if (!c.covariates.empty())
      line("covariates", c.covariates, std::to_string(parse_covariates(c.covariates).size()) + " team records");
    if (!c.train_covariates.empty())
      line("train_covariates", c.train_covariates,
           std::to_string(parse_covariates(c.train_covariates).size()) + " team records");
    if (!c.train_team_features.empty())
      line("train_team_features", c.train_team_features,
           std::to_string(predict::parse_team_features(c.train_team_features).size()) + " team records");
    if (!c.train_matches.empty())
      line("train_matches", c.train_matches,
           std::to_string(predict::parse_tournament_matches(c.train_matches).size()) + " matches");
    if (!c.threeway_odds.empty())
      line("threeway_odds", c.threeway_odds,
           std::to_string(metrics::parse_threeway_odds(c.threeway_odds).size()) + " matches");
    if (!c.external_predictions.empty())
      line("external_predictions", c.external_predictions,
           std::to_string(predict::load_external_predictions(c.external_predictions).size()) + " models");
    return o.str();
  });
}

RunSummary run_pipeline(const RunConfig& c) {
  RunSummary summary;
  const std::uint64_t seed = in_stage("config", [&] {
    if (!c.seed) throw ValidationError("a seed is required");
    return *c.seed;
  });
  const auto digest = c.digest();
  Artifacts art(c.out_dir, digest);

  // ingest
  const auto [spec, as_of] = in_stage("ingest", [&] {
    auto spec = parse_tournament_spec(require(c.spec, "tournament spec"));
    Date as_of;
    if (c.as_of) as_of = *c.as_of;
    else if (spec.start_date) as_of = spec.start_date->plus_days(-1);
    else throw ValidationError("no as-of date configured and the spec has no start date");
    fs::create_directories(c.out_dir);
    return std::pair{std::move(spec), as_of};
  });
  summary.stages.push_back("ingest");

  const auto ratings = in_stage("rank", [&] {
    const auto all = parse_matches(require(c.matches, "matches"));
    const auto used = rank::matches_up_to(all, as_of);
    auto r = rank::fit_ratings(used, {c.half_period_days, as_of}, c.model);
    if (!r.diagnostics.identifiable)
      summary.warnings.push_back("[rank] match graph has " + std::to_string(r.diagnostics.components) +
                                 " disconnected components; strengths are only comparable within one");
    art.write("ratings.csv", [&](std::ostream& o) { write_ratings(o, r, digest); });
    return r;
  });
  summary.stages.push_back("rank");

  const auto cons = in_stage("consensus", [&] {
    const auto table = parse_odds(require(c.odds, "odds"));
    consensus::InversionOptions opt;
    opt.runs = c.consensus_runs;
    opt.seed = derive_seed(seed, "consensus");
    opt.workers = c.workers;
    opt.tolerance = c.inversion_tolerance;
    opt.max_iterations = c.inversion_max_iterations;
    auto result = consensus::run(table, spec, opt);
    art.write("consensus.csv", [&](std::ostream& o) { write_consensus(o, result, digest); });
    art.write("overrounds.csv", [&](std::ostream& o) { write_overrounds(o, result.margins, digest); });
    return result;
  });
  summary.stages.push_back("consensus");

  const auto squads = in_stage("pm", [&] {
    std::vector<SegmentRecord> segments;
    for (auto& s : parse_segments(require(c.segments, "segments")))
      if (s.match_date <= as_of) segments.push_back(std::move(s));
    pm::DesignOptions dopt;
    dopt.as_of = as_of;
    dopt.half_period_days = c.pm_half_period_days;
    pm::FitOptions fopt;
    fopt.ridge = c.ridge;
    fopt.prior_passes = c.pm_prior_passes;
    const auto r = pm::fit_pm(pm::build_design(segments, dopt), fopt, as_of);
    const auto sq = compute_squad_features(r, parse_team_players(require(c.squads, "squads")),
                                           parse_pool(require(c.pool, "pool")), as_of);
    art.write("pm_players.csv", [&](std::ostream& o) { write_pm_players(o, r, digest); });
    art.write("pm_squads.csv", [&](std::ostream& o) { write_pm_squads(o, sq, digest); });
    return sq;
  });
  summary.stages.push_back("pm");

  const bool training = !c.train_covariates.empty() || !c.train_team_features.empty() || !c.train_matches.empty();
  const auto [hybrid, train_rows] = in_stage("features", [&] {
    std::map<std::string, double> abilities;
    for (std::size_t i = 0; i < cons.teams.size(); ++i) abilities[cons.teams[i]] = cons.inversion.log_abilities[i];
    auto h = hybrid_features(spec.edition, as_of, spec.teams, ratings, abilities, squads);
    art.write("team_features.csv", [&](std::ostream& o) {
      write_digest(o, digest);
      predict::write_team_features(o, h);
    });
    std::vector<predict::FeatureRow> rows;
    if (training) {
      rows = predict::assemble_features(parse_covariates(require(c.train_covariates, "training covariates")),
                                        predict::parse_team_features(require(c.train_team_features, "training team features")),
                                        predict::parse_tournament_matches(require(c.train_matches, "training matches")));
      art.write("features.csv", [&](std::ostream& o) {
        write_digest(o, digest);
        predict::write_features(o, rows);
      });
    }
    return std::pair{std::move(h), std::move(rows)};
  });
  summary.stages.push_back("features");

  auto lasso_options = [&](std::string_view stage) {
    predict::LassoOptions o;
    o.folds = c.folds;
    o.seed = derive_seed(seed, stage);
    o.grid_size = c.grid_size;
    o.min_ratio = c.min_ratio;
    o.one_se_rule = c.one_se_rule;
    o.workers = c.workers;
    return o;
  };

  std::optional<predict::LassoFit> fit;
  if (training) {
    fit = in_stage("fit", [&] {
      auto f = predict::fit_lasso_poisson(train_rows, lasso_options("fit"));
      art.write("model.csv", [&](std::ostream& o) {
        write_digest(o, digest);
        predict::write_model(o, f);
      });
      art.write("cvcurve.csv", [&](std::ostream& o) {
        write_digest(o, digest);
        predict::write_cv_curve(o, f);
      });
      return f;
    });
    summary.stages.push_back("fit");
  }

  const auto probs = in_stage("simulate", [&] {
    const auto source = fit ? lasso_source(*fit, parse_covariates(require(c.covariates, "covariates")), hybrid,
                                           spec.edition, c.zero_host_dummies)
                            : rating_source(ratings);
    const auto pairs = pair_intensities(spec, source);
    art.write("pair_intensities.csv", [&](std::ostream& o) { write_pair_intensities(o, pairs, digest); });
    sim::SimConfig sc;
    sc.runs = c.runs;
    sc.seed = derive_seed(seed, "simulate");
    sc.extra_time_factor = c.extra_time_factor;
    sc.workers = c.workers;
    sc.tie_break = c.tie_break;
    auto p = sim::run_tournament(sc, spec, pair_source(pairs));
    art.write("stage_probs.csv", [&](std::ostream& o) { write_stage_probs(o, p, digest); });
    return p;
  });
  summary.stages.push_back("simulate");

  if (training) {
    in_stage("evaluate", [&] {
      std::set<int> editions;
      for (const auto& r : train_rows) editions.insert(r.edition);
      if (editions.size() < 2) return 0;
      std::vector<metrics::Method> methods{metrics::lasso_method("lasso", lasso_options("evaluate"))};
      if (!c.external_predictions.empty()) {
        std::vector<std::string> ids;
        for (const auto& r : train_rows) ids.push_back(r.match_id);
        for (auto& [name, m] : predict::load_external_predictions(c.external_predictions, ids))
          methods.push_back(metrics::intensity_method(name, std::move(m)));
      }
      if (!c.threeway_odds.empty())
        methods.push_back(metrics::outcome_method("bookmakers", metrics::parse_threeway_odds(c.threeway_odds)));
      const auto report = metrics::loto_evaluate(train_rows, methods);
      art.write("report.csv", [&](std::ostream& o) {
        write_digest(o, digest);
        metrics::write_report(o, report);
      });
      return 0;
    });
    summary.stages.push_back("evaluate");
  }

  in_stage("report", [&] {
    std::map<std::string, double> consensus;
    for (std::size_t i = 0; i < cons.teams.size(); ++i) consensus[cons.teams[i]] = cons.probs[i];
    art.write("report.txt", [&](std::ostream& o) {
      write_digest(o, digest);
      o << "edition " << spec.edition << ", data as of " << as_of.to_string() << "\n";
      std::vector<double> over;
      for (const auto& m : cons.margins) over.push_back(m.overround);
      std::sort(over.begin(), over.end());
      if (!over.empty()) {
        const std::size_t n = over.size();
        const double median = n % 2 ? over[n / 2] : 0.5 * (over[n / 2 - 1] + over[n / 2]);
        o << "median bookmaker overround " << csv::fixed(100.0 * median, 1) << "%\n";
      }
      o << "intensities from " << (fit ? "the lasso model" : "the rating model") << "\n\n";
      o << human_report(probs, consensus);
    });
    write_manifest(c.out_dir, art.files(), digest);
    return 0;
  });
  summary.files = art.files();
  summary.files.push_back(c.out_dir / "manifest.csv");
  return summary;
}

}  // namespace hybridcast::pipeline
