#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hybridcast/bracket.hpp"
#include "hybridcast/consensus.hpp"
#include "hybridcast/ingest.hpp"
#include "hybridcast/plus_minus.hpp"
#include "hybridcast/poisson_rank.hpp"
#include "hybridcast/predictor.hpp"
#include "hybridcast/simulator.hpp"

namespace hybridcast::pipeline {

// Failure inside a named pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message);
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Runs `fn`, rethrowing any exception as a StageError tagged with `stage`.
template <class Fn>
auto in_stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

struct RunConfig {
  // Inputs for the forecast edition. Empty paths are absent.
  std::filesystem::path spec;
  std::filesystem::path matches;
  std::filesystem::path odds;
  std::filesystem::path segments;
  std::filesystem::path squads;
  std::filesystem::path pool;
  std::filesystem::path covariates;
  // Past editions for training and evaluation.
  std::filesystem::path train_covariates;
  std::filesystem::path train_team_features;
  std::filesystem::path train_matches;
  std::filesystem::path threeway_odds;
  std::filesystem::path external_predictions;
  std::filesystem::path out_dir = "out";  // not part of the digest

  std::optional<Date> as_of;  // default: the day before the tournament starts
  double half_period_days = 1095.0;
  rank::ModelKind model = rank::ModelKind::bivariate;
  double pm_half_period_days = 730.0;
  double ridge = 1.0;
  int pm_prior_passes = 2;
  int folds = 10;
  int grid_size = 50;
  double min_ratio = 1e-4;
  bool one_se_rule = false;
  std::uint64_t runs = 100000;
  std::uint64_t consensus_runs = 100000;
  double inversion_tolerance = 1e-3;
  int inversion_max_iterations = 60;
  std::optional<std::uint64_t> seed;
  double extra_time_factor = 1.0 / 3.0;
  sim::TieBreak tie_break = sim::TieBreak::footnote;
  bool zero_host_dummies = true;
  unsigned workers = 0;  // not part of the digest: results do not depend on it

  /// key=value lines of every setting that can change an output.
  std::string canonical() const;
  /// FNV-1a digest of canonical(), in hex.
  std::string digest() const;
};

struct RunSummary {
  std::vector<std::string> stages;
  std::vector<std::filesystem::path> files;
  std::vector<std::string> warnings;  // "[stage] message"
};

/// ingest -> rank -> consensus -> pm -> features -> fit -> simulate ->
/// evaluate. Stages without their inputs are skipped; failures throw
/// StageError. Writes a manifest of every produced file.
RunSummary run_pipeline(const RunConfig& config);

/// Parses every configured input and summarizes it; throws StageError("ingest").
std::string ingest_check(const RunConfig& config);

// ------------------------------------------------------------ artifacts

/// "# config=<digest>" line that starts every output file.
void write_digest(std::ostream& out, const std::string& digest);

void write_ratings(std::ostream& out, const rank::RatingSet& ratings, const std::string& digest);
rank::RatingSet parse_ratings(const std::filesystem::path& path);

void write_consensus(std::ostream& out, const consensus::ConsensusResult& result, const std::string& digest);
void write_overrounds(std::ostream& out, const std::vector<consensus::BookmakerMargin>& margins,
                      const std::string& digest);
/// team -> (consensus probability, log-ability)
std::map<std::string, std::pair<double, double>> parse_consensus(const std::filesystem::path& path);

void write_pm_players(std::ostream& out, const pm::PMRatings& ratings, const std::string& digest);
void write_pm_squads(std::ostream& out, const std::map<std::string, pm::SquadFeatures>& squads,
                     const std::string& digest);
std::map<std::string, pm::SquadFeatures> parse_pm_squads(const std::filesystem::path& path);

/// Squad features of every team with a squad, using the pool of players with
/// an appearance within two years before `as_of`.
std::map<std::string, pm::SquadFeatures> compute_squad_features(
    const pm::PMRatings& ratings, const std::vector<std::pair<std::string, std::string>>& squads,
    const std::vector<PoolEntry>& pool, Date as_of);

/// Rating features of the given teams for one edition.
predict::HybridTable hybrid_features(int edition, Date as_of, const std::vector<std::string>& teams,
                                     const rank::RatingSet& ratings,
                                     const std::map<std::string, double>& log_abilities,
                                     const std::map<std::string, pm::SquadFeatures>& squads);

void write_stage_probs(std::ostream& out, const bracket::StageProbabilities& probs, const std::string& digest);

struct PairIntensity {
  std::string team;
  std::string opponent;
  sim::Stage stage = sim::Stage::group;
  double lambda_team = 0.0;
  double lambda_opponent = 0.0;
};

/// Intensities for every scheduled group match and every knockout pairing.
std::vector<PairIntensity> pair_intensities(const TournamentSpec& spec, const sim::IntensitySource& source);
void write_pair_intensities(std::ostream& out, const std::vector<PairIntensity>& pairs, const std::string& digest);
std::vector<PairIntensity> parse_pair_intensities(const std::filesystem::path& path);
/// Lookup source over a pair table; either orientation of a pair matches.
sim::IntensitySource pair_source(std::vector<PairIntensity> pairs);

/// exp of the lasso's linear predictor on the difference features; with
/// `zero_host_dummies` the host and neighbor covariates count as zero.
sim::IntensitySource lasso_source(const predict::LassoFit& fit, const std::vector<CovariateRecord>& covariates,
                                  const predict::HybridTable& hybrid, int edition, bool zero_host_dummies);
/// Rating-model intensities, with the home effect where a team plays at home.
sim::IntensitySource rating_source(const rank::RatingSet& ratings);

/// Percent table of stage probabilities, strongest champion first.
std::string human_report(const bracket::StageProbabilities& probs, const std::map<std::string, double>& consensus);

/// manifest.csv: file, bytes and FNV-1a checksum of each listed file.
void write_manifest(const std::filesystem::path& dir, const std::vector<std::filesystem::path>& files,
                    const std::string& digest);

}  // namespace hybridcast::pipeline
