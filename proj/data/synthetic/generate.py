#!/usr/bin/env python3
"""Synthetic inputs for the end-to-end smoke run on the EURO 2020 spec.

Everything except the spec and the outright odds is invented: historic
matches, line-up segments, squads, covariates and four past editions used
for training and evaluation. Output is deterministic for a given seed.
"""

import argparse
import csv
import datetime as dt
from pathlib import Path

import numpy as np

TEAMS_2020 = [
    "tur", "ita", "wal", "sui", "den", "fin", "bel", "rus", "ned", "ukr", "aut", "mkd",
    "eng", "cro", "sco", "cze", "esp", "swe", "pol", "svk", "hun", "por", "fra", "ger",
]
EXTRA = ["nor", "irl", "isl", "srb", "gre", "rou", "bih", "isr", "slo", "bul"]
HOSTS_2020 = {"eng", "ita", "ger", "rus", "ned", "den", "hun", "esp", "sco"}
NEIGHBORS_2020 = {"wal", "sui", "aut", "fin", "bel", "swe", "pol", "cze", "svk", "ukr", "fra", "por", "cro"}

# Rough prior strengths for the forecast edition, log scale.
STRENGTH = {
    "fra": 0.45, "eng": 0.42, "bel": 0.42, "esp": 0.38, "ger": 0.35, "por": 0.33, "ita": 0.35, "ned": 0.28,
    "den": 0.22, "cro": 0.2, "sui": 0.12, "swe": 0.08, "pol": 0.05, "aut": 0.05, "ukr": 0.04, "rus": 0.02,
    "tur": 0.02, "cze": 0.0, "wal": -0.02, "sco": -0.08, "svk": -0.1, "hun": -0.15, "fin": -0.2, "mkd": -0.3,
    "nor": 0.0, "irl": -0.1, "isl": -0.12, "srb": 0.02, "gre": -0.08, "rou": -0.1, "bih": -0.12, "isr": -0.2,
    "slo": -0.15, "bul": -0.25,
}

COVARIATES = [
    "gdp", "population", "host", "neighbor", "market_value", "fifa_rank", "uefa_points", "uefa_places",
    "max_teammates", "second_max_teammates", "age_distance", "cl_players", "el_players", "legionnaires",
    "coach_age_distance", "coach_nationality",
]
TRAIN_EDITIONS = {2004: "2004-06-12", 2008: "2008-06-07", 2012: "2012-06-08", 2016: "2016-06-10"}


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def day(d):
    return d.isoformat()


def historic_matches(rng, start, end):
    teams = TEAMS_2020 + EXTRA
    rows = []
    d = start
    while d < end:
        for _ in range(rng.integers(1, 4)):
            a, b = rng.choice(teams, 2, replace=False)
            neutral = rng.random() < 0.15
            la = np.exp(0.1 + STRENGTH[a] - STRENGTH[b] + (0 if neutral else 0.25))
            lb = np.exp(0.1 + STRENGTH[b] - STRENGTH[a])
            rows.append([day(d), a, b, rng.poisson(la), rng.poisson(lb), "qat" if neutral else a, "yes" if neutral else "no"])
        d += dt.timedelta(days=int(rng.integers(2, 6)))
    return rows


def player_names(team, n):
    return [f"{team}_p{k:02d}" for k in range(1, n + 1)]


def segments_and_pool(rng, start, end, truth):
    teams = TEAMS_2020
    rows = []
    last = {}
    match = 0
    d = start
    while d < end:
        a, b = rng.choice(teams, 2, replace=False)
        match += 1
        mid = f"m{match:04d}"
        neutral = rng.random() < 0.2
        venue = "qat" if neutral else a
        squads = {}
        for t in (a, b):
            pool = player_names(t, 30)
            # Better players start more often.
            w = np.array([truth[p] for p in pool]) + 0.6
            w = np.clip(w, 0.05, None)
            starters = list(rng.choice(pool, 11, replace=False, p=w / w.sum()))
            bench = [p for p in pool if p not in starters]
            squads[t] = (starters, bench)
        cuts = sorted(set([0, int(rng.integers(46, 70)), int(rng.integers(70, 89)), 90]))
        on = {t: list(squads[t][0]) for t in (a, b)}
        red = {a: 0, b: 0}
        for k in range(len(cuts) - 1):
            s0, s1 = cuts[k], cuts[k + 1]
            dur = (s1 - s0) / 90.0
            sa = sum(truth[p] for p in on[a]) / 11.0
            sb = sum(truth[p] for p in on[b]) / 11.0
            home = 0.0 if neutral else 0.2
            ga = rng.poisson(np.exp(0.15 + sa - sb + home) * dur)
            gb = rng.poisson(np.exp(0.15 + sb - sa) * dur)
            rows.append([mid, k + 1, s0, s1, ";".join(sorted(on[a])), ";".join(sorted(on[b])), red[a], red[b], ga, gb,
                         day(d), "yes" if neutral else "no", venue])
            for t in (a, b):
                for p in on[t]:
                    last[(t, p)] = d
                if k + 1 < len(cuts) - 1:
                    if rng.random() < 0.03 and len(on[t]) > 8:
                        on[t].pop(int(rng.integers(0, len(on[t]))))
                        red[t] += 1
                    else:
                        out = int(rng.integers(0, len(on[t])))
                        bench = [p for p in squads[t][1] if p not in on[t]]
                        on[t][out] = bench[int(rng.integers(0, len(bench)))]
        d += dt.timedelta(days=int(rng.integers(1, 4)))
    pool_rows = [[t, p, day(last_day)] for (t, p), last_day in sorted(last.items())]
    return rows, pool_rows


def covariate_row(rng, year, team, strength, squad, host, neighbor):
    base = {
        "gdp": rng.normal(35000, 12000),
        "population": rng.uniform(2, 80),
        "host": 1.0 if host else 0.0,
        "neighbor": 1.0 if neighbor else 0.0,
        "market_value": 200 + 900 * (strength + 0.4) + rng.normal(0, 60),
        "fifa_rank": max(1.0, 40 - 70 * strength + rng.normal(0, 5)),
        "uefa_points": 30000 + 20000 * strength + rng.normal(0, 2000),
        "uefa_places": float(rng.integers(1, 7)),
        "max_teammates": float(rng.integers(2, 8)) * squad / 23.0,
        "second_max_teammates": float(rng.integers(1, 5)) * squad / 23.0,
        "age_distance": abs(rng.normal(0, 1.5)),
        "cl_players": float(max(0, round(8 + 20 * strength + rng.normal(0, 2)))) * squad / 23.0,
        "el_players": float(rng.integers(0, 6)) * squad / 23.0,
        "legionnaires": float(rng.integers(3, squad)),
        "coach_age_distance": abs(rng.normal(0, 8)),
        "coach_nationality": 1.0 if rng.random() < 0.8 else 0.0,
    }
    return [year, team, squad] + [round(base[c], 4) for c in COVARIATES]


def past_edition(rng, year, start, teams, hosts):
    n = len(teams)
    groups = [teams[i:i + 4] for i in range(0, n, 4)]
    strength = {t: STRENGTH.get(t, 0.0) + rng.normal(0, 0.1) for t in teams}
    cov = [covariate_row(rng, year, t, strength[t], 23, t in hosts, False) for t in teams]
    feats = []
    as_of = start - dt.timedelta(days=1)
    for t in teams:
        feats.append([year, t, day(as_of), round(strength[t] + rng.normal(0, 0.05), 6),
                      round(1.5 * strength[t] + rng.normal(0, 0.1), 6), round(0.3 * strength[t] + rng.normal(0, 0.03), 6),
                      int(rng.integers(0, 4))])
    matches = []
    k = 0

    def play(a, b, d, stage):
        nonlocal k
        k += 1
        home_a = 0.3 if a in hosts else 0.0
        home_b = 0.3 if b in hosts else 0.0
        la = np.exp(0.15 + 1.2 * (strength[a] - strength[b]) + home_a - home_b)
        lb = np.exp(0.15 + 1.2 * (strength[b] - strength[a]) + home_b - home_a)
        matches.append([year, f"e{year}_{k:02d}", day(d), a, b, rng.poisson(la), rng.poisson(lb), stage])

    for gi, g in enumerate(groups):
        for i in range(4):
            for j in range(i + 1, 4):
                play(g[i], g[j], start + dt.timedelta(days=(i + j + gi) % 10), "group")
    for r in range(2):
        d = start + dt.timedelta(days=14 + 4 * r)
        pairs = rng.permutation(teams)[: 8 if r == 0 else 4]
        for i in range(0, len(pairs), 2):
            play(pairs[i], pairs[i + 1], d, "knockout")
    return cov, feats, matches


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=2021)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "euro2020_smoke")
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)

    write_csv(out / "matches.csv", ["date", "home_team", "away_team", "home_goals", "away_goals", "venue_country", "neutral"],
              historic_matches(rng, dt.date(2016, 9, 1), dt.date(2021, 6, 9)))

    truth = {}
    for t in TEAMS_2020:
        for k, p in enumerate(player_names(t, 30)):
            truth[p] = STRENGTH[t] + 0.25 * (1.0 - k / 15.0) + rng.normal(0, 0.05)
    segs, pool = segments_and_pool(rng, dt.date(2019, 6, 1), dt.date(2021, 6, 8), truth)
    write_csv(out / "segments.csv", ["match_id", "segment_id", "start_min", "end_min", "home_players", "away_players",
                                     "home_red", "away_red", "home_goals", "away_goals", "match_date", "neutral",
                                     "venue_country"], segs)
    write_csv(out / "pool.csv", ["team", "player", "last_appearance"], pool)
    squads = []
    for t in TEAMS_2020:
        for p in player_names(t, 30)[:26]:
            squads.append([t, p])
    write_csv(out / "squads.csv", ["team", "player"], squads)

    write_csv(out / "covariates.csv", ["year", "team", "squad_size"] + COVARIATES,
              [covariate_row(rng, 2020, t, STRENGTH[t], 26, t in HOSTS_2020, t in NEIGHBORS_2020) for t in TEAMS_2020])

    pool_teams = TEAMS_2020 + EXTRA
    cov_rows, feat_rows, match_rows = [], [], []
    for year, start in TRAIN_EDITIONS.items():
        n = 24 if year == 2016 else 16
        teams = list(rng.choice(pool_teams, n, replace=False))
        hosts = {teams[0]}
        c, f, m = past_edition(rng, year, dt.date.fromisoformat(start), teams, hosts)
        cov_rows += c
        feat_rows += f
        match_rows += m
    write_csv(out / "train_covariates.csv", ["year", "team", "squad_size"] + COVARIATES, cov_rows)
    write_csv(out / "train_team_features.csv", ["edition", "team", "as_of", "hist_ability", "bookmaker_log_ability",
                                                "avg_pm", "missing_pm_players"], feat_rows)
    write_csv(out / "train_matches.csv", ["edition", "match_id", "date", "team1", "team2", "goals1", "goals2", "stage"],
              match_rows)

    # Benchmarks: three-way odds with a 6% margin and a naive external model.
    three, ext = [], []
    for m in match_rows:
        la = np.exp(0.1 + rng.normal(0, 0.3))
        lb = np.exp(0.1 + rng.normal(0, 0.3))
        ext.append(["naive", m[1], round(la, 6), round(lb, 6)])
        pw = float(np.clip(0.38 + rng.normal(0, 0.1), 0.1, 0.65))
        pd = 0.27
        pl = max(0.05, 1 - pw - pd)
        s = pw + pd + pl
        three.append([m[1]] + [round(1 / (p / s * 1.06), 3) for p in (pw, pd, pl)])
    write_csv(out / "threeway.csv", ["match_id", "odds_win", "odds_draw", "odds_loss"], three)
    write_csv(out / "predictions.csv", ["model", "match_id", "lambda_home", "lambda_away"], ext)


if __name__ == "__main__":
    main()
