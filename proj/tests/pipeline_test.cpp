#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "hybridcast/pipeline.hpp"
#include "support.hpp"

using namespace hybridcast;
namespace ts = testing_support;
namespace pl = hybridcast::pipeline;
namespace fs = std::filesystem;

namespace {

pl::RunConfig smoke_config(const fs::path& out) {
  pl::RunConfig c;
  const auto d = ts::data_path("euro2020_smoke");
  c.spec = ts::data_path("euro2020.spec");
  c.odds = ts::data_path("euro2020_odds.csv");
  c.matches = d / "matches.csv";
  c.segments = d / "segments.csv";
  c.squads = d / "squads.csv";
  c.pool = d / "pool.csv";
  c.covariates = d / "covariates.csv";
  c.train_covariates = d / "train_covariates.csv";
  c.train_team_features = d / "train_team_features.csv";
  c.train_matches = d / "train_matches.csv";
  c.threeway_odds = d / "threeway.csv";
  c.external_predictions = d / "predictions.csv";
  c.out_dir = out;
  c.runs = 2000;
  c.consensus_runs = 2000;
  c.inversion_tolerance = 0.01;
  c.grid_size = 10;
  c.folds = 5;
  c.seed = 2021;
  return c;
}

struct CliResult {
  int status = -1;
  std::string err;
};

#ifdef HYBRIDCAST_CLI_PATH
CliResult cli(const std::string& args, const fs::path& err_file) {
  // Config files use paths relative to the repository root.
  const auto root = fs::path(HYBRIDCAST_TEST_DATA_DIR).parent_path();
  const std::string cmd = "cd \"" + root.string() + "\" && \"" + std::string(HYBRIDCAST_CLI_PATH) + "\" " + args + " >/dev/null 2>\"" + err_file.string() + "\"";
  const int raw = std::system(cmd.c_str());
  CliResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.err = ts::read_file(err_file);
  return r;
}
#endif

}  // namespace

TEST(Pipeline, SmokeRunAndByteIdenticalRerun) {
  ts::TempDir a("pipe_a"), b("pipe_b");
  auto ca = smoke_config(a.path());
  auto cb = smoke_config(b.path());
  cb.workers = 3;
  const auto sa = pl::run_pipeline(ca);
  pl::run_pipeline(cb);
  EXPECT_EQ(sa.stages, (std::vector<std::string>{"ingest", "rank", "consensus", "pm", "features", "fit", "simulate", "evaluate"}));
  for (const char* f : {"ratings.csv", "consensus.csv", "overrounds.csv", "pm_players.csv", "pm_squads.csv",
                        "team_features.csv", "features.csv", "model.csv", "cvcurve.csv", "pair_intensities.csv",
                        "stage_probs.csv", "report.csv", "report.txt", "manifest.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(ts::read_file(a / f), ts::read_file(b / f)) << f;
  }
  // Every output carries the config digest; the manifest lists the others.
  const std::string digest = ca.digest();
  EXPECT_EQ(digest, cb.digest());
  for (const char* f : {"ratings.csv", "consensus.csv", "stage_probs.csv", "model.csv"})
    EXPECT_NE(ts::read_file(a / f).find(digest), std::string::npos) << f;
  const auto manifest = ts::read_file(a / "manifest.csv");
  EXPECT_NE(manifest.find("stage_probs.csv"), std::string::npos);
  EXPECT_NE(manifest.find(hex64(fnv1a64(ts::read_file(a / "stage_probs.csv")))), std::string::npos);
  const auto stage_probs = ts::read_file(a / "stage_probs.csv");
  EXPECT_NE(stage_probs.find("team,r16,qf,sf,final,champion,se_champion"), std::string::npos);
}

TEST(Pipeline, DigestTracksSettings) {
  ts::TempDir a("dig");
  auto c = smoke_config(a.path());
  const auto d = c.digest();
  c.workers = 7;
  EXPECT_EQ(c.digest(), d);
  c.runs = 2001;
  EXPECT_NE(c.digest(), d);
}

TEST(Pipeline, MissingOddsNamesConsensusStage) {
  ts::TempDir a("pipe_err");
  auto c = smoke_config(a.path());
  c.odds = a / "nope.csv";
  try {
    pl::run_pipeline(c);
    FAIL() << "expected a stage error";
  } catch (const pl::StageError& e) {
    EXPECT_EQ(e.stage(), "consensus");
  }
}

TEST(Pipeline, SeedIsMandatory) {
  ts::TempDir a("pipe_seed");
  auto c = smoke_config(a.path());
  c.seed.reset();
  EXPECT_THROW(pl::run_pipeline(c), pl::StageError);
}

TEST(Pipeline, RatingsAndConsensusRoundTrip) {
  ts::TempDir a("pipe_rt");
  const auto c = smoke_config(a.path());
  pl::run_pipeline(c);
  const auto r = pl::parse_ratings(a / "ratings.csv");
  std::ostringstream out;
  pl::write_ratings(out, r, c.digest());
  // Diagnostics other than the log-likelihood are not stored.
  EXPECT_EQ(out.str(), ts::read_file(a / "ratings.csv"));
  const auto cons = pl::parse_consensus(a / "consensus.csv");
  EXPECT_EQ(cons.size(), 24u);
  double total = 0.0;
  for (const auto& [t, v] : cons) total += v.first;
  EXPECT_NEAR(total, 1.0, 1e-5);
}

TEST(Pipeline, SquadFeaturesRoundTripWithUnrated) {
  ts::TempDir a("squads");
  pm::SquadFeatures s;
  s.mean_pm = 0.125;
  s.median_pm = -0.5;
  s.top11_pm = 0.25;
  s.missing_players = 2;
  s.unrated = {"p1", "p2"};
  const std::map<std::string, pm::SquadFeatures> in{{"fra", s}, {"ger", pm::SquadFeatures{}}};
  std::ostringstream out;
  pl::write_pm_squads(out, in, "d");
  ts::write_file(a / "sq.csv", out.str());
  const auto back = pl::parse_pm_squads(a / "sq.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.at("fra").unrated, s.unrated);
  EXPECT_EQ(back.at("fra").missing_players, 2);
  EXPECT_EQ(back.at("fra").median_pm, -0.5);
  EXPECT_TRUE(back.at("ger").unrated.empty());
}

#ifdef HYBRIDCAST_CLI_PATH

TEST(Cli, PipelineFromConfigWithOverrides) {
  ts::TempDir a("cli");
  const auto r = cli("pipeline --config data/euro2020_smoke/smoke.ini --runs 1000 --consensus-runs 1000 --tolerance 0.02 "
                     "--grid-size 8 --folds 4 --out-dir \"" + a.path().string() + "\"",
                     a / "err.txt");
  EXPECT_EQ(r.status, 0) << r.err;
  EXPECT_TRUE(fs::exists(a / "stage_probs.csv"));
  EXPECT_TRUE(fs::exists(a / "manifest.csv"));
}

TEST(Cli, MissingOddsFailsInConsensus) {
  ts::TempDir a("cli_err");
  const auto r = cli("consensus --odds \"" + (a / "nope.csv").string() +
                         "\" --spec data/euro2020.spec --seed 1 --out \"" + (a / "c.csv").string() + "\" --overrounds \"" +
                         (a / "o.csv").string() + "\"",
                     a / "err.txt");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("[consensus]"), std::string::npos) << r.err;
}

TEST(Cli, SeedRequired) {
  ts::TempDir a("cli_seed");
  const auto r = cli("simulate --spec data/euro2020.spec --ratings x.csv --out \"" + (a / "s.csv").string() + "\"",
                     a / "err.txt");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("seed"), std::string::npos) << r.err;
}

TEST(Cli, StagesRunStandalone) {
  ts::TempDir a("cli_iso");
  const auto d = ts::data_path("euro2020_smoke");
  auto p = [&](const std::string& f) { return "\"" + (a / f).string() + "\""; };
  auto in = [&](const std::string& f) { return "\"" + (d / f).string() + "\""; };
  EXPECT_EQ(cli("ingest-check --spec data/euro2020.spec --odds data/euro2020_odds.csv --matches " + in("matches.csv"), a / "e0").status, 0);
  EXPECT_EQ(cli("rank-poisson --matches " + in("matches.csv") + " --as-of 2021-06-10 --out " + p("ratings.csv"), a / "e1").status, 0);
  EXPECT_EQ(cli("consensus --odds data/euro2020_odds.csv --spec data/euro2020.spec --runs 2000 --tolerance 0.02 --seed 3 --out " +
                    p("consensus.csv") + " --overrounds " + p("overrounds.csv"),
                a / "e2")
                .status,
            0);
  EXPECT_EQ(cli("pm --segments " + in("segments.csv") + " --as-of 2021-06-10 --squads " + in("squads.csv") + " --pool " +
                    in("pool.csv") + " --out " + p("pm.csv") + " --squads-out " + p("pm_squads.csv"),
                a / "e3")
                .status,
            0);
  EXPECT_EQ(cli("features --spec data/euro2020.spec --as-of 2021-06-10 --ratings " + p("ratings.csv") + " --consensus " +
                    p("consensus.csv") + " --pm-squads " + p("pm_squads.csv") + " --team-features-out " + p("tf.csv") +
                    " --covariates " + in("train_covariates.csv") + " --team-features " + in("train_team_features.csv") +
                    " --tournament-matches " + in("train_matches.csv") + " --out " + p("features.csv"),
                a / "e4")
                .status,
            0)
      << ts::read_file(a / "e4");
  EXPECT_EQ(cli("fit --features " + p("features.csv") + " --folds 4 --grid-size 8 --seed 5 --out " + p("model.csv") + " --cv-out " + p("cv.csv"), a / "e5").status, 0);
  EXPECT_EQ(cli("predict --model " + p("model.csv") + " --spec data/euro2020.spec --covariates " + in("covariates.csv") +
                    " --team-features " + p("tf.csv") + " --pairs-out " + p("pairs.csv") + " --features " +
                    p("features.csv") + " --out " + p("intensities.csv"),
                a / "e6")
                .status,
            0)
      << ts::read_file(a / "e6");
  EXPECT_EQ(cli("simulate --spec data/euro2020.spec --intensities " + p("pairs.csv") + " --runs 2000 --seed 7 --out " +
                    p("stage_probs.csv"),
                a / "e7")
                .status,
            0)
      << ts::read_file(a / "e7");
  EXPECT_EQ(cli("evaluate --features " + p("features.csv") + " --predictions " + in("predictions.csv") + " --threeway-odds " +
                    in("threeway.csv") + " --folds 4 --grid-size 8 --seed 9 --out " + p("report.csv"),
                a / "e8")
                .status,
            0)
      << ts::read_file(a / "e8");
  EXPECT_TRUE(fs::exists(a / "stage_probs.csv"));
  EXPECT_TRUE(fs::exists(a / "report.csv"));
}

TEST(Cli, UnknownFlagIsNonzero) {
  ts::TempDir a("cli_flag");
  EXPECT_NE(cli("simulate --bogus", a / "err.txt").status, 0);
  EXPECT_NE(cli("", a / "err2.txt").status, 0);
}

#endif
