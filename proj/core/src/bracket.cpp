#include "hybridcast/bracket.hpp"

#include <bit>
#include <cmath>
#include <map>

namespace hybridcast::bracket {

int CompiledSpec::team_index(const std::string& team) const {
  const auto it = std::find(teams.begin(), teams.end(), team);
  if (it == teams.end()) throw ValidationError("team '" + team + "' is not in the tournament");
  return static_cast<int>(it - teams.begin());
}

std::vector<std::string> CompiledSpec::stage_names() const {
  std::vector<std::string> out;
  for (const auto& r : rounds) out.push_back(r.name);
  out.emplace_back("champion");
  return out;
}

CompiledSpec compile(const TournamentSpec& spec) {
  validate(spec);
  CompiledSpec c;
  c.teams = spec.teams;
  std::map<std::string, int> group_index;
  for (const auto& g : spec.groups) {
    group_index[g.name] = static_cast<int>(c.groups.size());
    c.group_names.push_back(g.name);
    std::vector<int> members;
    for (const auto& t : g.teams) members.push_back(c.team_index(t));
    c.groups.push_back(std::move(members));
  }
  for (const auto& m : spec.schedule) {
    CompiledSpec::Fixture f;
    f.group = group_index.at(m.group);
    f.first = c.team_index(m.team1);
    f.second = c.team_index(m.team2);
    if (m.venue_country == m.team1) f.host = f.first;
    else if (m.venue_country == m.team2) f.host = f.second;
    c.fixtures.push_back(f);
  }

  std::map<std::string, int> slot_index;
  c.with_thirds = spec.qualification == Qualification::top_two_plus_best_thirds;
  if (c.with_thirds) {
    if (spec.groups.size() > 16) throw ValidationError("tournament spec: too many groups for a thirds table");
    c.best_thirds = spec.best_thirds;
    for (std::size_t k = 0; k < spec.thirds.slots.size(); ++k) slot_index[spec.thirds.slots[k]] = static_cast<int>(k);
    c.third_rows.assign(std::size_t{1} << spec.groups.size(), {});
    for (unsigned mask = 0; mask < c.third_rows.size(); ++mask) {
      if (std::popcount(mask) != spec.best_thirds) continue;
      std::string key;
      for (std::size_t g = 0; g < spec.groups.size(); ++g)
        if (mask & (1u << g)) key += spec.groups[g].name;
      for (const auto& name : spec.thirds.rows.at(key)) c.third_rows[mask].push_back(group_index.at(name));
    }
  }

  std::map<std::string, std::pair<int, int>> match_pos;
  for (std::size_t r = 0; r < spec.rounds.size(); ++r) {
    CompiledSpec::Round round;
    round.name = spec.rounds[r].name;
    for (std::size_t m = 0; m < spec.rounds[r].matches.size(); ++m) {
      const auto& bm = spec.rounds[r].matches[m];
      match_pos[bm.id] = {static_cast<int>(r), static_cast<int>(m)};
      auto source = [&](const SlotRef& s) {
        CompiledSpec::Source out;
        out.kind = s.kind;
        switch (s.kind) {
          case SlotRef::Kind::group_position:
            out.group = group_index.at(s.name);
            out.position = s.position;
            break;
          case SlotRef::Kind::third_slot: out.slot = slot_index.at(s.name); break;
          case SlotRef::Kind::winner_of:
            out.round = match_pos.at(s.name).first;
            out.match = match_pos.at(s.name).second;
            break;
          case SlotRef::Kind::team: out.team = c.team_index(s.name); break;
        }
        return out;
      };
      round.matches.push_back({bm.id, source(bm.first), source(bm.second)});
    }
    c.rounds.push_back(std::move(round));
  }
  return c;
}

std::size_t StageProbabilities::team_index(const std::string& team) const {
  const auto it = std::find(teams.begin(), teams.end(), team);
  if (it == teams.end()) throw ValidationError("no stage probabilities for team '" + team + "'");
  return static_cast<std::size_t>(it - teams.begin());
}

double StageProbabilities::champion(const std::string& team) const { return probs[team_index(team)].back(); }

double StageProbabilities::prob(const std::string& team, const std::string& stage) const {
  const auto it = std::find(stages.begin(), stages.end(), stage);
  if (it == stages.end()) throw ValidationError("unknown stage '" + stage + "'");
  return probs[team_index(team)][static_cast<std::size_t>(it - stages.begin())];
}

StageProbabilities make_stage_probabilities(const CompiledSpec& spec, std::vector<std::vector<std::uint64_t>> counts,
                                            std::uint64_t runs) {
  StageProbabilities out;
  out.teams = spec.teams;
  out.stages = spec.stage_names();
  out.runs = runs;
  out.probs.resize(counts.size());
  out.standard_errors.resize(counts.size());
  const double n = static_cast<double>(runs);
  for (std::size_t t = 0; t < counts.size(); ++t) {
    for (const auto c : counts[t]) {
      const double p = runs ? static_cast<double>(c) / n : 0.0;
      out.probs[t].push_back(p);
      out.standard_errors[t].push_back(runs ? std::sqrt(p * (1.0 - p) / n) : 0.0);
    }
  }
  out.counts = std::move(counts);
  return out;
}

unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace hybridcast::bracket
