#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hybridcast/csv.hpp"
#include "hybridcast/evaluation.hpp"
#include "hybridcast/pipeline.hpp"

namespace hc = hybridcast;
namespace pl = hybridcast::pipeline;
namespace fs = std::filesystem;

namespace {

// Digest of every option that can change an output; worker counts and the
// config path itself are left out.
std::string digest_of(const CLI::App& app) {
  std::string canonical;
  for (const CLI::Option* opt : app.get_options()) {
    const auto name = opt->get_name();
    if (name == "--help" || name == "--config" || name == "--workers") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += r + ";";
    } else {
      value = opt->get_default_str();
    }
    canonical += name + "=" + value + "\n";
  }
  return hc::hex64(hc::fnv1a64(canonical));
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw hc::Error("cannot write " + path.string());
  fn(out);
  out.close();
  if (!out) throw hc::Error("failed writing " + path.string());
}

std::optional<hc::Date> parse_date(const std::string& s, const char* flag) {
  if (s.empty()) return std::nullopt;
  const auto d = hc::Date::try_parse(s);
  if (!d) throw hc::ValidationError(std::string(flag) + " must be YYYY-MM-DD, got '" + s + "'");
  return d;
}

std::uint64_t require_seed(const CLI::Option* opt, std::uint64_t seed) {
  if (opt->count() == 0) throw hc::ValidationError("a seed is required (--seed)");
  return seed;
}

const fs::path& need(const fs::path& p, const char* flag) {
  if (p.empty()) throw hc::ValidationError(std::string("missing ") + flag);
  return p;
}

hc::sim::TieBreak tie_break_from(const std::string& s) {
  return s == "uefa" ? hc::sim::TieBreak::uefa : hc::sim::TieBreak::footnote;
}

std::map<std::string, double> log_abilities_of(const std::map<std::string, std::pair<double, double>>& consensus) {
  std::map<std::string, double> out;
  for (const auto& [team, v] : consensus) out[team] = v.second;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid football tournament forecasting"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  // Config files hold one [section] per subcommand; command line flags override them.
  app.set_config("--config", "", "Config file (TOML or INI)");
  app.fallthrough();

  std::function<void()> action;
  std::map<std::string, std::string> stage_of;
  auto sub = [&](const std::string& name, const std::string& description, const std::string& stage_name) {
    auto* s = app.add_subcommand(name, description);
    stage_of[name] = stage_name;
    return s;
  };

  // ---------------------------------------------------------------- ingest-check
  pl::RunConfig check;
  {
    auto* s = sub("ingest-check", "Parse and validate input files", "ingest");
    s->add_option("--spec", check.spec, "Tournament spec");
    s->add_option("--matches", check.matches, "Historic matches CSV");
    s->add_option("--odds", check.odds, "Outright odds CSV");
    s->add_option("--segments", check.segments, "Match segments CSV");
    s->add_option("--squads", check.squads, "Squads CSV (team,player)");
    s->add_option("--pool", check.pool, "Player pool CSV (team,player,last_appearance)");
    s->add_option("--covariates", check.covariates, "Team covariates CSV");
    s->add_option("--train-covariates", check.train_covariates, "Covariates of past editions");
    s->add_option("--train-team-features", check.train_team_features, "Rating features of past editions");
    s->add_option("--train-matches", check.train_matches, "Tournament matches of past editions");
    s->add_option("--threeway-odds", check.threeway_odds, "Three-way match odds CSV");
    s->add_option("--predictions", check.external_predictions, "External predictions CSV");
    s->final_callback([&] { action = [&] { std::cout << pl::ingest_check(check); }; });
  }

  // ---------------------------------------------------------------- rank-poisson
  struct {
    fs::path matches, out = "ratings.csv";
    std::string as_of, model = "bivariate";
    double half_period = 1095.0;
  } rk;
  {
    auto* s = sub("rank-poisson", "Fit Poisson team ratings", "rank");
    s->add_option("--matches", rk.matches, "Historic matches CSV");
    s->add_option("--as-of", rk.as_of, "Fit date (YYYY-MM-DD)");
    s->add_option("--half-period-days", rk.half_period, "Half-period of the time weights")->capture_default_str();
    s->add_option("--model", rk.model, "independent or bivariate")
        ->check(CLI::IsMember({"independent", "bivariate"}))
        ->capture_default_str();
    s->add_option("--out", rk.out, "Ratings output")->capture_default_str();
    s->final_callback([&, s] {
      action = [&, s] {
        const auto as_of = parse_date(rk.as_of, "--as-of");
        if (!as_of) throw hc::ValidationError("missing --as-of");
        const auto all = hc::parse_matches(need(rk.matches, "--matches"));
        const auto used = hc::rank::matches_up_to(all, *as_of);
        const auto r =
            hc::rank::fit_ratings(used, {rk.half_period, *as_of}, hc::rank::model_kind_from_string(rk.model));
        if (!r.diagnostics.identifiable)
          std::cerr << "warning: [rank] match graph has " << r.diagnostics.components
                    << " disconnected components; strengths are only comparable within one\n";
        write_file(rk.out, [&](std::ostream& o) { pl::write_ratings(o, r, digest_of(*s)); });
        std::cout << "rated " << r.strengths.size() << " teams from " << used.size() << " matches, log-likelihood "
                  << hc::csv::fixed(r.diagnostics.log_likelihood, 4) << " after " << r.diagnostics.iterations
                  << " iterations\n";
      };
    });
  }

  // ---------------------------------------------------------------- consensus
  struct {
    fs::path odds, spec, out = "consensus.csv", overrounds = "overrounds.csv";
    std::uint64_t runs = 100000, seed = 0;
    double tolerance = 1e-3;
    int max_iterations = 60;
    unsigned workers = 0;
  } cs;
  {
    auto* s = sub("consensus", "Bookmaker consensus and implied abilities", "consensus");
    s->add_option("--odds", cs.odds, "Outright odds CSV");
    s->add_option("--spec", cs.spec, "Tournament spec");
    s->add_option("--runs", cs.runs, "Simulated tournaments per inversion step")->capture_default_str();
    auto* seed = s->add_option("--seed", cs.seed, "Master seed");
    s->add_option("--tolerance", cs.tolerance, "Inversion tolerance")->capture_default_str();
    s->add_option("--max-iterations", cs.max_iterations, "Inversion iteration limit")->capture_default_str();
    s->add_option("--workers", cs.workers, "Worker threads (0: all cores)");
    s->add_option("--out", cs.out, "Consensus output")->capture_default_str();
    s->add_option("--overrounds", cs.overrounds, "Overround output")->capture_default_str();
    s->final_callback([&, s, seed] {
      action = [&, s, seed] {
        hc::consensus::InversionOptions opt;
        opt.seed = hc::derive_seed(require_seed(seed, cs.seed), "consensus");
        opt.runs = cs.runs;
        opt.tolerance = cs.tolerance;
        opt.max_iterations = cs.max_iterations;
        opt.workers = cs.workers;
        const auto table = hc::parse_odds(need(cs.odds, "--odds"));
        const auto spec = hc::parse_tournament_spec(need(cs.spec, "--spec"));
        const auto r = hc::consensus::run(table, spec, opt);
        const auto d = digest_of(*s);
        write_file(cs.out, [&](std::ostream& o) { pl::write_consensus(o, r, d); });
        write_file(cs.overrounds, [&](std::ostream& o) { pl::write_overrounds(o, r.margins, d); });
        std::cout << r.margins.size() << " bookmakers, inversion residual " << hc::csv::fixed(r.inversion.residual, 6)
                  << (r.inversion.converged ? "" : " (not converged)") << '\n';
      };
    });
  }

  // ---------------------------------------------------------------- pm
  struct {
    fs::path segments, squads, pool, out = "pm_players.csv", squads_out = "pm_squads.csv";
    std::string as_of;
    double ridge = 1.0, half_period = 730.0;
    int prior_passes = 2;
  } pmo;
  {
    auto* s = sub("pm", "Plus-minus player ratings and squad features", "pm");
    s->add_option("--segments", pmo.segments, "Match segments CSV");
    s->add_option("--as-of", pmo.as_of, "Rating date (YYYY-MM-DD)");
    s->add_option("--ridge", pmo.ridge, "Ridge strength")->capture_default_str();
    s->add_option("--half-period-days", pmo.half_period, "Half-period of the recency weights")->capture_default_str();
    s->add_option("--prior-passes", pmo.prior_passes, "Teammate-prior refits")->capture_default_str();
    s->add_option("--squads", pmo.squads, "Squads CSV (team,player)");
    s->add_option("--pool", pmo.pool, "Player pool CSV (team,player,last_appearance)");
    s->add_option("--out", pmo.out, "Player ratings output")->capture_default_str();
    s->add_option("--squads-out", pmo.squads_out, "Squad features output")->capture_default_str();
    s->final_callback([&, s] {
      action = [&, s] {
        const auto as_of = parse_date(pmo.as_of, "--as-of");
        if (!as_of) throw hc::ValidationError("missing --as-of");
        std::vector<hc::SegmentRecord> segments;
        for (auto& seg : hc::parse_segments(need(pmo.segments, "--segments")))
          if (seg.match_date <= *as_of) segments.push_back(std::move(seg));
        hc::pm::DesignOptions dopt;
        dopt.as_of = *as_of;
        dopt.half_period_days = pmo.half_period;
        hc::pm::FitOptions fopt;
        fopt.ridge = pmo.ridge;
        fopt.prior_passes = pmo.prior_passes;
        const auto design = hc::pm::build_design(segments, dopt);
        const auto r = hc::pm::fit_pm(design, fopt, *as_of);
        const auto d = digest_of(*s);
        write_file(pmo.out, [&](std::ostream& o) { pl::write_pm_players(o, r, d); });
        std::cout << "rated " << r.ratings.size() << " players from " << design.rows() << " segments\n";
        if (!pmo.squads.empty()) {
          const auto sq = pl::compute_squad_features(r, hc::parse_team_players(pmo.squads),
                                                     hc::parse_pool(need(pmo.pool, "--pool")), *as_of);
          write_file(pmo.squads_out, [&](std::ostream& o) { pl::write_pm_squads(o, sq, d); });
        }
      };
    });
  }

  // ---------------------------------------------------------------- features
  struct {
    fs::path spec, ratings, consensus, pm_squads, team_features_out = "team_features.csv";
    fs::path covariates, team_features, tournament_matches, out = "features.csv";
    std::string as_of;
  } ft;
  {
    auto* s = sub("features", "Rating features per team and difference features per match", "features");
    s->add_option("--spec", ft.spec, "Tournament spec of the edition to rate");
    s->add_option("--as-of", ft.as_of, "Feature date (default: day before the spec's start)");
    s->add_option("--ratings", ft.ratings, "ratings.csv from rank-poisson");
    s->add_option("--consensus", ft.consensus, "consensus.csv from consensus");
    s->add_option("--pm-squads", ft.pm_squads, "pm_squads.csv from pm");
    s->add_option("--team-features-out", ft.team_features_out, "Rating features output")->capture_default_str();
    s->add_option("--covariates", ft.covariates, "Team covariates CSV");
    s->add_option("--team-features", ft.team_features, "Rating features of the editions in --tournament-matches");
    s->add_option("--tournament-matches", ft.tournament_matches, "Tournament matches CSV");
    s->add_option("--out", ft.out, "Difference features output")->capture_default_str();
    s->final_callback([&, s] {
      action = [&, s] {
        const auto d = digest_of(*s);
        hc::predict::HybridTable table;
        if (!ft.ratings.empty()) {
          const auto spec = hc::parse_tournament_spec(need(ft.spec, "--spec"));
          auto as_of = parse_date(ft.as_of, "--as-of");
          if (!as_of && spec.start_date) as_of = spec.start_date->plus_days(-1);
          if (!as_of) throw hc::ValidationError("missing --as-of");
          table = pl::hybrid_features(spec.edition, *as_of, spec.teams, pl::parse_ratings(ft.ratings),
                                      log_abilities_of(pl::parse_consensus(need(ft.consensus, "--consensus"))),
                                      pl::parse_pm_squads(need(ft.pm_squads, "--pm-squads")));
          write_file(ft.team_features_out, [&](std::ostream& o) {
            pl::write_digest(o, d);
            hc::predict::write_team_features(o, table);
          });
          std::cout << "rating features for " << table.size() << " teams\n";
        }
        if (!ft.tournament_matches.empty()) {
          if (!ft.team_features.empty())
            for (const auto& [k, v] : hc::predict::parse_team_features(ft.team_features)) table.emplace(k, v);
          const auto rows =
              hc::predict::assemble_features(hc::parse_covariates(need(ft.covariates, "--covariates")), table,
                                             hc::predict::parse_tournament_matches(ft.tournament_matches));
          write_file(ft.out, [&](std::ostream& o) {
            pl::write_digest(o, d);
            hc::predict::write_features(o, rows);
          });
          std::cout << rows.size() << " feature rows\n";
        }
        if (ft.ratings.empty() && ft.tournament_matches.empty())
          throw hc::ValidationError("nothing to do: give --ratings or --tournament-matches");
      };
    });
  }

  // ---------------------------------------------------------------- fit
  struct {
    fs::path features, out = "model.csv", cv_out = "cvcurve.csv";
    int folds = 10, grid_size = 50;
    double min_ratio = 1e-4;
    bool one_se = false;
    std::uint64_t seed = 0;
    unsigned workers = 0;
  } fo;
  {
    auto* s = sub("fit", "Lasso Poisson regression with cross-validated penalty", "fit");
    s->add_option("--features", fo.features, "features.csv");
    s->add_option("--folds", fo.folds, "Cross-validation folds")->capture_default_str();
    s->add_option("--grid-size", fo.grid_size, "Penalty grid points")->capture_default_str();
    s->add_option("--min-ratio", fo.min_ratio, "Smallest penalty relative to the largest")->capture_default_str();
    s->add_flag("--one-se", fo.one_se, "Pick the largest penalty within one standard error of the best");
    auto* seed = s->add_option("--seed", fo.seed, "Master seed");
    s->add_option("--workers", fo.workers, "Worker threads (0: all cores)");
    s->add_option("--out", fo.out, "Model output")->capture_default_str();
    s->add_option("--cv-out", fo.cv_out, "Cross-validation curve output")->capture_default_str();
    s->final_callback([&, s, seed] {
      action = [&, s, seed] {
        hc::predict::LassoOptions opt;
        opt.seed = hc::derive_seed(require_seed(seed, fo.seed), "fit");
        opt.folds = fo.folds;
        opt.grid_size = fo.grid_size;
        opt.min_ratio = fo.min_ratio;
        opt.one_se_rule = fo.one_se;
        opt.workers = fo.workers;
        const auto fit = hc::predict::fit_lasso_poisson(hc::predict::parse_features(need(fo.features, "--features")), opt);
        const auto d = digest_of(*s);
        write_file(fo.out, [&](std::ostream& o) {
          pl::write_digest(o, d);
          hc::predict::write_model(o, fit);
        });
        write_file(fo.cv_out, [&](std::ostream& o) {
          pl::write_digest(o, d);
          hc::predict::write_cv_curve(o, fit);
        });
        const auto nz = std::count_if(fit.coefficients.begin(), fit.coefficients.end(), [](double c) { return c != 0.0; });
        std::cout << "lambda " << hc::csv::exact(fit.lambda) << ", " << nz << " nonzero coefficients\n";
      };
    });
  }

  // ---------------------------------------------------------------- predict
  struct {
    fs::path model, features, out = "intensities.csv";
    fs::path spec, covariates, team_features, pairs_out = "pair_intensities.csv";
    bool keep_host = false;
  } pr;
  {
    auto* s = sub("predict", "Goal intensities from a fitted model", "predict");
    s->add_option("--model", pr.model, "model.csv from fit");
    s->add_option("--features", pr.features, "features.csv of played matches");
    s->add_option("--out", pr.out, "Per-match intensities output")->capture_default_str();
    s->add_option("--spec", pr.spec, "Tournament spec: predict every possible pairing");
    s->add_option("--covariates", pr.covariates, "Team covariates of the spec's edition");
    s->add_option("--team-features", pr.team_features, "Rating features of the spec's edition");
    s->add_option("--pairs-out", pr.pairs_out, "Pairwise intensities output")->capture_default_str();
    s->add_flag("--keep-host-dummies", pr.keep_host, "Use the host and neighbor covariates as given");
    s->final_callback([&, s] {
      action = [&, s] {
        const auto fit = hc::predict::parse_model(need(pr.model, "--model"));
        const auto d = digest_of(*s);
        if (!pr.features.empty()) {
          const auto m = hc::predict::predict_matches(fit, hc::predict::parse_features(pr.features));
          write_file(pr.out, [&](std::ostream& o) {
            pl::write_digest(o, d);
            hc::predict::write_intensities(o, m);
          });
          std::cout << "intensities for " << m.size() << " matches\n";
        }
        if (!pr.spec.empty()) {
          const auto spec = hc::parse_tournament_spec(pr.spec);
          const auto source =
              pl::lasso_source(fit, hc::parse_covariates(need(pr.covariates, "--covariates")),
                               hc::predict::parse_team_features(need(pr.team_features, "--team-features")),
                               spec.edition, !pr.keep_host);
          const auto pairs = pl::pair_intensities(spec, source);
          write_file(pr.pairs_out, [&](std::ostream& o) { pl::write_pair_intensities(o, pairs, d); });
          std::cout << "intensities for " << pairs.size() << " pairings\n";
        }
        if (pr.features.empty() && pr.spec.empty())
          throw hc::ValidationError("nothing to do: give --features or --spec");
      };
    });
  }

  // ---------------------------------------------------------------- simulate
  struct {
    fs::path spec, intensities, ratings, out = "stage_probs.csv", report;
    std::uint64_t runs = 100000, seed = 0;
    double extra_time = 1.0 / 3.0;
    std::string tie_break = "footnote";
    unsigned workers = 0;
  } sm;
  {
    auto* s = sub("simulate", "Monte Carlo tournament simulation", "simulate");
    s->add_option("--spec", sm.spec, "Tournament spec");
    s->add_option("--intensities", sm.intensities, "Pairwise intensities (team,opponent,stage,lambda_team,lambda_opponent)");
    s->add_option("--ratings", sm.ratings, "ratings.csv, used when no --intensities are given");
    s->add_option("--runs", sm.runs, "Simulated tournaments")->capture_default_str();
    auto* seed = s->add_option("--seed", sm.seed, "Master seed");
    s->add_option("--extra-time-factor", sm.extra_time, "Extra-time share of the 90-minute intensity")
        ->capture_default_str();
    s->add_option("--tie-break", sm.tie_break, "footnote or uefa")
        ->check(CLI::IsMember({"footnote", "uefa"}))
        ->capture_default_str();
    s->add_option("--workers", sm.workers, "Worker threads (0: all cores)");
    s->add_option("--out", sm.out, "Stage probabilities output")->capture_default_str();
    s->add_option("--report", sm.report, "Optional human-readable report");
    s->final_callback([&, s, seed] {
      action = [&, s, seed] {
        hc::sim::SimConfig sc;
        sc.seed = hc::derive_seed(require_seed(seed, sm.seed), "simulate");
        sc.runs = sm.runs;
        sc.extra_time_factor = sm.extra_time;
        sc.workers = sm.workers;
        sc.tie_break = tie_break_from(sm.tie_break);
        const auto spec = hc::parse_tournament_spec(need(sm.spec, "--spec"));
        const auto source = !sm.intensities.empty() ? pl::pair_source(pl::parse_pair_intensities(sm.intensities))
                            : !sm.ratings.empty()   ? pl::rating_source(pl::parse_ratings(sm.ratings))
                                                    : throw hc::ValidationError("missing --intensities or --ratings");
        const auto probs = hc::sim::run_tournament(sc, spec, source);
        const auto d = digest_of(*s);
        write_file(sm.out, [&](std::ostream& o) { pl::write_stage_probs(o, probs, d); });
        if (!sm.report.empty())
          write_file(sm.report, [&](std::ostream& o) {
            pl::write_digest(o, d);
            o << pl::human_report(probs, {});
          });
        std::cout << pl::human_report(probs, {});
      };
    });
  }

  // ---------------------------------------------------------------- evaluate
  struct {
    fs::path features, threeway, out = "report.csv";
    std::vector<std::string> predictions;
    bool by_edition = true, no_lasso = false;
    int folds = 10, grid_size = 50;
    std::uint64_t seed = 0;
    unsigned workers = 0;
  } ev;
  {
    auto* s = sub("evaluate", "Leave-one-tournament-out evaluation", "evaluate");
    s->add_option("--features", ev.features, "features.csv covering at least two editions");
    s->add_flag("--folds-by-edition,!--no-folds-by-edition", ev.by_edition,
                "Hold out one edition at a time (the only supported scheme)");
    s->add_option("--predictions", ev.predictions,
                  "External predictions: model,match_id,lambda_home,lambda_away, or label=intensities.csv");
    s->add_option("--threeway-odds", ev.threeway, "Three-way match odds benchmark");
    s->add_flag("--no-lasso", ev.no_lasso, "Do not evaluate the lasso model");
    s->add_option("--folds", ev.folds, "Inner cross-validation folds of the lasso")->capture_default_str();
    s->add_option("--grid-size", ev.grid_size, "Penalty grid points")->capture_default_str();
    auto* seed = s->add_option("--seed", ev.seed, "Master seed");
    s->add_option("--workers", ev.workers, "Worker threads (0: all cores)");
    s->add_option("--out", ev.out, "Report output")->capture_default_str();
    s->final_callback([&, s, seed] {
      action = [&, s, seed] {
        if (!ev.by_edition) throw hc::ValidationError("only leave-one-edition-out folds are supported");
        const auto rows = hc::predict::parse_features(need(ev.features, "--features"));
        std::vector<std::string> ids;
        for (const auto& r : rows) ids.push_back(r.match_id);
        std::vector<hc::metrics::Method> methods;
        if (!ev.no_lasso) {
          hc::predict::LassoOptions opt;
          opt.seed = hc::derive_seed(require_seed(seed, ev.seed), "evaluate");
          opt.folds = ev.folds;
          opt.grid_size = ev.grid_size;
          opt.workers = ev.workers;
          methods.push_back(hc::metrics::lasso_method("lasso", opt));
        }
        for (const auto& arg : ev.predictions) {
          const auto eq = arg.find('=');
          if (eq != std::string::npos) {
            methods.push_back(hc::metrics::intensity_method(arg.substr(0, eq),
                                                            hc::predict::parse_intensities(arg.substr(eq + 1))));
          } else {
            for (auto& [name, m] : hc::predict::load_external_predictions(arg, ids))
              methods.push_back(hc::metrics::intensity_method(name, std::move(m)));
          }
        }
        if (!ev.threeway.empty())
          methods.push_back(hc::metrics::outcome_method("bookmakers", hc::metrics::parse_threeway_odds(ev.threeway)));
        const auto report = hc::metrics::loto_evaluate(rows, methods);
        write_file(ev.out, [&](std::ostream& o) {
          pl::write_digest(o, digest_of(*s));
          hc::metrics::write_report(o, report);
        });
        for (const auto& m : report.overall)
          std::cout << m.method << ": likelihood " << hc::csv::fixed(m.likelihood, 4) << ", classification "
                    << hc::csv::fixed(m.classification, 4) << ", rps " << hc::csv::fixed(m.rps, 4) << '\n';
      };
    });
  }

  // ---------------------------------------------------------------- pipeline
  pl::RunConfig rc;
  struct {
    std::string as_of, model = "bivariate", tie_break = "footnote";
    std::uint64_t seed = 0;
    bool keep_host = false;
  } pp;
  {
    auto* s = sub("pipeline", "Run every stage and write an artifact directory", "pipeline");
    s->add_option("--spec", rc.spec, "Tournament spec");
    s->add_option("--matches", rc.matches, "Historic matches CSV");
    s->add_option("--odds", rc.odds, "Outright odds CSV");
    s->add_option("--segments", rc.segments, "Match segments CSV");
    s->add_option("--squads", rc.squads, "Squads CSV");
    s->add_option("--pool", rc.pool, "Player pool CSV");
    s->add_option("--covariates", rc.covariates, "Team covariates of the forecast edition");
    s->add_option("--train-covariates", rc.train_covariates, "Covariates of past editions");
    s->add_option("--train-team-features", rc.train_team_features, "Rating features of past editions");
    s->add_option("--train-matches", rc.train_matches, "Tournament matches of past editions");
    s->add_option("--threeway-odds", rc.threeway_odds, "Three-way match odds benchmark");
    s->add_option("--predictions", rc.external_predictions, "External predictions CSV");
    s->add_option("--out-dir", rc.out_dir, "Artifact directory")->capture_default_str();
    s->add_option("--as-of", pp.as_of, "Data cut-off (default: day before the tournament)");
    s->add_option("--half-period-days", rc.half_period_days, "Rating time-weight half-period")->capture_default_str();
    s->add_option("--model", pp.model, "independent or bivariate")
        ->check(CLI::IsMember({"independent", "bivariate"}))
        ->capture_default_str();
    s->add_option("--pm-half-period-days", rc.pm_half_period_days, "Plus-minus recency half-period")
        ->capture_default_str();
    s->add_option("--ridge", rc.ridge, "Plus-minus ridge strength")->capture_default_str();
    s->add_option("--folds", rc.folds, "Lasso cross-validation folds")->capture_default_str();
    s->add_option("--grid-size", rc.grid_size, "Lasso penalty grid points")->capture_default_str();
    s->add_option("--min-ratio", rc.min_ratio, "Smallest penalty relative to the largest")->capture_default_str();
    s->add_flag("--one-se", rc.one_se_rule, "One-standard-error penalty choice");
    s->add_option("--runs", rc.runs, "Simulated tournaments")->capture_default_str();
    s->add_option("--consensus-runs", rc.consensus_runs, "Simulated tournaments per inversion step")
        ->capture_default_str();
    s->add_option("--tolerance", rc.inversion_tolerance, "Inversion tolerance")->capture_default_str();
    auto* seed = s->add_option("--seed", pp.seed, "Master seed");
    s->add_option("--extra-time-factor", rc.extra_time_factor, "Extra-time share of the 90-minute intensity")
        ->capture_default_str();
    s->add_option("--tie-break", pp.tie_break, "footnote or uefa")
        ->check(CLI::IsMember({"footnote", "uefa"}))
        ->capture_default_str();
    s->add_flag("--keep-host-dummies", pp.keep_host, "Use the host and neighbor covariates as given");
    s->add_option("--workers", rc.workers, "Worker threads (0: all cores)");
    s->final_callback([&, seed] {
      action = [&, seed] {
        if (seed->count() > 0) rc.seed = pp.seed;
        rc.as_of = parse_date(pp.as_of, "--as-of");
        rc.model = hc::rank::model_kind_from_string(pp.model);
        rc.tie_break = tie_break_from(pp.tie_break);
        rc.zero_host_dummies = !pp.keep_host;
        const auto summary = pl::run_pipeline(rc);
        for (const auto& w : summary.warnings) std::cerr << "warning: " << w << '\n';
        std::cout << "stages:";
        for (const auto& st : summary.stages) std::cout << ' ' << st;
        std::cout << "\nwrote " << summary.files.size() << " files to " << rc.out_dir.generic_string() << '\n';
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const auto stage = stage_of.at(app.get_subcommands().front()->get_name());
  try {
    pl::in_stage(stage, [&] {
      action();
      return 0;
    });
  } catch (const pl::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
