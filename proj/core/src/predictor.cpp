#include "hybridcast/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <thread>

#include "hybridcast/csv.hpp"
#include "hybridcast/rng.hpp"

namespace hybridcast::predict {

namespace {

const std::vector<std::string> kHybridNames = {"hist_ability", "bookmaker_log_ability", "avg_pm",
                                               "missing_pm_players"};
const std::vector<std::string> kMatchHeader = {"edition", "match_id", "date",   "team1",
                                               "team2",   "goals1",   "goals2", "stage"};
const std::vector<std::string> kTeamFeatureHeader = {"edition", "team",   "as_of", "hist_ability", "bookmaker_log_ability",
                                                     "avg_pm",  "missing_pm_players"};
const std::vector<std::string> kPredictionHeader = {"model", "match_id", "lambda_home", "lambda_away"};
const std::vector<std::string> kModelHeader = {"feature", "coefficient"};

std::vector<std::string> feature_header() {
  std::vector<std::string> h = {"edition", "match_id", "date", "team", "opponent", "goals", "groupstage", "as_of"};
  for (const auto& n : feature_names()) h.push_back(n);
  return h;
}

std::string id_field(const csv::Row& row, std::size_t col, const csv::Table& table) {
  auto id = normalize_id(row.fields.at(col));
  if (id.empty())
    throw ParseError(table.source, row.line,
                     "row " + std::to_string(row.line) + ", column '" + table.header[col] + "': empty identifier");
  return id;
}

// ---- standardized problem for coordinate descent

struct Problem {
  std::size_t n = 0, p = 0;
  std::vector<double> x;  // column-major n x p, standardized
  std::vector<double> y;
  std::vector<double> mean, sd;
  std::vector<bool> active;  // false for constant columns

  double at(std::size_t i, std::size_t j) const { return x[j * n + i]; }
};

std::vector<double> design_row(const FeatureRow& r) {
  std::vector<double> v = r.differences;
  v.push_back(r.groupstage);
  return v;
}

Problem make_problem(const std::vector<FeatureRow>& rows, const std::vector<std::size_t>& idx) {
  Problem pr;
  pr.n = idx.size();
  pr.p = feature_names().size() + 1;
  pr.x.assign(pr.n * pr.p, 0.0);
  pr.mean.assign(pr.p, 0.0);
  pr.sd.assign(pr.p, 0.0);
  pr.active.assign(pr.p, false);
  for (std::size_t i = 0; i < pr.n; ++i) {
    const auto& r = rows[idx[i]];
    const auto v = design_row(r);
    for (std::size_t j = 0; j < pr.p; ++j) pr.x[j * pr.n + i] = v[j];
    pr.y.push_back(r.goals);
  }
  for (std::size_t j = 0; j < pr.p; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < pr.n; ++i) m += pr.x[j * pr.n + i];
    m /= static_cast<double>(pr.n);
    double v = 0.0;
    for (std::size_t i = 0; i < pr.n; ++i) v += (pr.x[j * pr.n + i] - m) * (pr.x[j * pr.n + i] - m);
    const double sd = std::sqrt(v / static_cast<double>(pr.n));
    pr.mean[j] = m;
    pr.sd[j] = sd;
    pr.active[j] = sd > 1e-12 * std::max(1.0, std::abs(m));
    for (std::size_t i = 0; i < pr.n; ++i)
      pr.x[j * pr.n + i] = pr.active[j] ? (pr.x[j * pr.n + i] - m) / sd : 0.0;
  }
  return pr;
}

double soft_threshold(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}

struct State {
  double b0 = 0.0;
  std::vector<double> b;
  int sweeps = 0;
  bool converged = false;
};

// Exact objective -(1/N) loglik + lambda |b|_1 (up to a constant in y).
double objective(const Problem& pr, double lambda, double b0, const std::vector<double>& b) {
  double f = 0.0;
  for (std::size_t i = 0; i < pr.n; ++i) {
    double e = b0;
    for (std::size_t j = 0; j < pr.p; ++j)
      if (b[j] != 0.0) e += pr.at(i, j) * b[j];
    f += std::exp(e) - pr.y[i] * e;
  }
  f /= static_cast<double>(pr.n);
  for (const double v : b) f += lambda * std::abs(v);
  return f;
}

// Proximal Newton from a warm start. Each outer step minimizes the penalized
// quadratic model of the likelihood by coordinate descent on the weighted
// Gram matrix (the intercept is an unpenalized column), then backtracks
// along the step until the exact objective does not increase.
void descend(const Problem& pr, double lambda, State& st, const LassoOptions& opt) {
  const std::size_t n = pr.n, p = pr.p, q = p + 1;  // coordinate 0 is the intercept
  const double inv_n = 1.0 / static_cast<double>(n);
  const double ysum = std::accumulate(pr.y.begin(), pr.y.end(), 0.0);
  if (!(ysum > 0.0)) throw ValidationError("lasso: all responses are zero");
  if (st.b.empty()) {
    st.b.assign(p, 0.0);
    st.b0 = std::log(ysum * inv_n);
  }
  auto col = [&](std::size_t k, std::size_t i) { return k == 0 ? 1.0 : pr.at(i, k - 1); };
  std::vector<double> eta(n), w(n), z(n), gram(q * q), rhs(q), beta(q), s(q);
  double f = objective(pr, lambda, st.b0, st.b);
  st.converged = false;
  for (int outer = 0; outer < opt.max_sweeps; ++outer) {
    st.sweeps = outer + 1;
    for (std::size_t i = 0; i < n; ++i) {
      double e = st.b0;
      for (std::size_t j = 0; j < p; ++j)
        if (st.b[j] != 0.0) e += pr.at(i, j) * st.b[j];
      eta[i] = e;
      const double mu = std::exp(e);
      w[i] = mu * inv_n;
      z[i] = e + (pr.y[i] - mu) / mu;
    }
    for (std::size_t k = 0; k < q; ++k) {
      if (k > 0 && !pr.active[k - 1]) continue;
      double r = 0.0;
      for (std::size_t i = 0; i < n; ++i) r += w[i] * col(k, i) * z[i];
      rhs[k] = r;
      for (std::size_t l = 0; l <= k; ++l) {
        if (l > 0 && !pr.active[l - 1]) continue;
        double g = 0.0;
        for (std::size_t i = 0; i < n; ++i) g += w[i] * col(k, i) * col(l, i);
        gram[k * q + l] = gram[l * q + k] = g;
      }
    }
    beta[0] = st.b0;
    for (std::size_t j = 0; j < p; ++j) beta[j + 1] = st.b[j];
    for (std::size_t k = 0; k < q; ++k) {
      s[k] = 0.0;
      for (std::size_t l = 0; l < q; ++l)
        if (l == 0 || pr.active[l - 1]) s[k] += gram[k * q + l] * beta[l];
    }
    // Inner coordinate descent on the quadratic model.
    for (int inner = 0; inner < 100000; ++inner) {
      double change = 0.0;
      for (std::size_t k = 0; k < q; ++k) {
        if (k > 0 && !pr.active[k - 1]) continue;
        const double h = gram[k * q + k];
        if (!(h > 0.0)) continue;
        const double g = rhs[k] - s[k] + h * beta[k];
        const double next = k == 0 ? g / h : soft_threshold(g, lambda) / h;
        const double d = next - beta[k];
        if (d == 0.0) continue;
        beta[k] = next;
        for (std::size_t l = 0; l < q; ++l) s[l] += gram[l * q + k] * d;
        change = std::max(change, std::abs(d) * std::sqrt(h));
      }
      if (change < 1e-3 * opt.tolerance) break;
    }
    // Backtracking on the exact objective.
    const double d0 = beta[0] - st.b0;
    std::vector<double> d(p);
    double step = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      d[j] = beta[j + 1] - st.b[j];
      step = std::max(step, std::abs(d[j]) * std::sqrt(gram[(j + 1) * q + j + 1]));
    }
    step = std::max(step, std::abs(d0) * std::sqrt(gram[0]));
    double t = 1.0;
    bool accepted = false;
    std::vector<double> trial(p);
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t j = 0; j < p; ++j) trial[j] = st.b[j] + t * d[j];
      // Keep exact zeros where the model put them.
      for (std::size_t j = 0; j < p; ++j)
        if (beta[j + 1] == 0.0 && t == 1.0) trial[j] = 0.0;
      const double ft = objective(pr, lambda, st.b0 + t * d0, trial);
      if (ft <= f) {
        st.b0 += t * d0;
        st.b = trial;
        f = ft;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted || t * step < opt.tolerance) {
      st.converged = true;
      break;
    }
  }
}

PathPoint to_original(const Problem& pr, const State& st, double lambda) {
  PathPoint pt;
  pt.lambda = lambda;
  pt.intercept = st.b0;
  pt.coefficients.assign(pr.p, 0.0);
  for (std::size_t j = 0; j < pr.p; ++j) {
    if (!pr.active[j] || st.b[j] == 0.0) continue;
    pt.coefficients[j] = st.b[j] / pr.sd[j];
    pt.intercept -= st.b[j] * pr.mean[j] / pr.sd[j];
  }
  pt.sweeps = st.sweeps;
  pt.converged = st.converged;
  return pt;
}

double lambda_max_of(const Problem& pr) {
  const double ybar = std::accumulate(pr.y.begin(), pr.y.end(), 0.0) / static_cast<double>(pr.n);
  double best = 0.0;
  for (std::size_t j = 0; j < pr.p; ++j) {
    if (!pr.active[j]) continue;
    double g = 0.0;
    for (std::size_t i = 0; i < pr.n; ++i) g += pr.at(i, j) * (pr.y[i] - ybar);
    best = std::max(best, std::abs(g) / static_cast<double>(pr.n));
  }
  return best;
}

// Warm-started fits along a decreasing grid.
std::vector<PathPoint> path_fit(const Problem& pr, const std::vector<double>& grid, const LassoOptions& opt) {
  State st;
  std::vector<PathPoint> points;
  for (const double lambda : grid) {
    descend(pr, lambda, st, opt);
    points.push_back(to_original(pr, st, lambda));
  }
  return points;
}

double linear(const PathPoint& pt, const FeatureRow& r) {
  const auto v = design_row(r);
  double e = pt.intercept;
  for (std::size_t j = 0; j < v.size(); ++j) e += pt.coefficients[j] * v[j];
  return e;
}

void check_rows(const std::vector<FeatureRow>& rows) {
  if (rows.empty()) throw ValidationError("lasso: no feature rows");
  const auto p = feature_names().size();
  for (const auto& r : rows) {
    if (r.differences.size() != p)
      throw ValidationError("feature row " + r.match_id + "/" + r.team + " has " +
                            std::to_string(r.differences.size()) + " differences, expected " + std::to_string(p));
    if (r.goals < 0) throw ValidationError("negative goals in feature row " + r.match_id);
  }
}

}  // namespace

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    auto n = covariates::names();
    n.insert(n.end(), kHybridNames.begin(), kHybridNames.end());
    return n;
  }();
  return names;
}

std::vector<std::string> design_names() {
  auto n = feature_names();
  n.emplace_back("groupstage");
  return n;
}

// ---------------------------------------------------------------- files

std::vector<TournamentMatch> parse_tournament_matches_text(std::string_view text, const std::string& source) {
  const auto t = csv::parse(text, source);
  t.require_header(kMatchHeader);
  std::vector<TournamentMatch> out;
  std::set<std::string> ids;
  for (const auto& row : t.rows) {
    TournamentMatch m;
    m.edition = static_cast<int>(csv::to_long(row, 0, t));
    m.match_id = id_field(row, 1, t);
    m.date = csv::to_date(row, 2, t);
    m.team1 = id_field(row, 3, t);
    m.team2 = id_field(row, 4, t);
    m.goals1 = csv::to_count(row, 5, t);
    m.goals2 = csv::to_count(row, 6, t);
    const auto stage = to_lower(trim(row.fields[7]));
    if (stage.empty()) throw ParseError(t.source, row.line, "row " + std::to_string(row.line) + ": empty stage");
    m.groupstage = stage == "group";
    if (m.team1 == m.team2)
      throw ParseError(t.source, row.line, "row " + std::to_string(row.line) + ": team plays itself");
    if (!ids.insert(m.match_id).second)
      throw ParseError(t.source, row.line, "row " + std::to_string(row.line) + ": duplicate match id " + m.match_id);
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<TournamentMatch> parse_tournament_matches(const std::filesystem::path& path) {
  return parse_tournament_matches_text(csv::read_text(path), path.string());
}

HybridTable parse_team_features_text(std::string_view text, const std::string& source) {
  const auto t = csv::parse(text, source);
  t.require_header(kTeamFeatureHeader);
  HybridTable out;
  for (const auto& row : t.rows) {
    HybridFeatures h;
    const int edition = static_cast<int>(csv::to_long(row, 0, t));
    const auto team = id_field(row, 1, t);
    h.as_of = csv::to_date(row, 2, t);
    h.hist_ability = csv::to_double(row, 3, t);
    h.bookmaker_log_ability = csv::to_double(row, 4, t);
    h.avg_pm = csv::to_double(row, 5, t);
    h.missing_pm_players = csv::to_double(row, 6, t);
    if (h.missing_pm_players < 0)
      throw ParseError(t.source, row.line, "row " + std::to_string(row.line) + ": negative missing_pm_players");
    if (!out.emplace(std::pair(edition, team), h).second)
      throw ParseError(t.source, row.line, "row " + std::to_string(row.line) + ": duplicate team " + team);
  }
  return out;
}

HybridTable parse_team_features(const std::filesystem::path& path) {
  return parse_team_features_text(csv::read_text(path), path.string());
}

void write_team_features(std::ostream& out, const HybridTable& table) {
  csv::write_row(out, kTeamFeatureHeader);
  for (const auto& [key, h] : table)
    csv::write_row(out, {std::to_string(key.first), key.second, h.as_of.to_string(), csv::exact(h.hist_ability),
                         csv::exact(h.bookmaker_log_ability), csv::exact(h.avg_pm), csv::exact(h.missing_pm_players)});
}

std::vector<double> difference_vector(const CovariateRecord& team, const CovariateRecord& opponent,
                                      const HybridFeatures& th, const HybridFeatures& oh) {
  std::vector<double> d;
  for (const auto& name : covariates::names()) d.push_back(team.value(name) - opponent.value(name));
  d.push_back(th.hist_ability - oh.hist_ability);
  d.push_back(th.bookmaker_log_ability - oh.bookmaker_log_ability);
  d.push_back(th.avg_pm - oh.avg_pm);
  d.push_back(th.missing_pm_players - oh.missing_pm_players);
  return d;
}

std::vector<FeatureRow> assemble_features(const std::vector<CovariateRecord>& covariates, const HybridTable& hybrid,
                                          const std::vector<TournamentMatch>& matches) {
  std::map<std::pair<int, std::string>, const CovariateRecord*> cov;
  for (const auto& c : covariates) cov[{c.tournament_year, c.team}] = &c;
  auto find_cov = [&](int edition, const std::string& team) -> const CovariateRecord& {
    const auto it = cov.find({edition, team});
    if (it == cov.end()) throw ValidationError("no covariates for " + team + " in " + std::to_string(edition));
    return *it->second;
  };
  auto find_hybrid = [&](int edition, const std::string& team) -> const HybridFeatures& {
    const auto it = hybrid.find({edition, team});
    if (it == hybrid.end()) throw ValidationError("no rating features for " + team + " in " + std::to_string(edition));
    return it->second;
  };
  std::vector<FeatureRow> out;
  for (const auto& m : matches) {
    const auto& c1 = find_cov(m.edition, m.team1);
    const auto& c2 = find_cov(m.edition, m.team2);
    const auto& h1 = find_hybrid(m.edition, m.team1);
    const auto& h2 = find_hybrid(m.edition, m.team2);
    const Date as_of = std::max(h1.as_of, h2.as_of);
    FeatureRow a{m.edition, m.match_id, m.date, m.team1, m.team2, m.goals1, m.groupstage ? 1 : 0, as_of,
                 difference_vector(c1, c2, h1, h2)};
    FeatureRow b = a;
    b.team = m.team2;
    b.opponent = m.team1;
    b.goals = m.goals2;
    for (auto& v : b.differences) v = -v;
    // Avoid negative zeros in the mirrored row.
    for (auto& v : b.differences)
      if (v == 0.0) v = 0.0;
    out.push_back(std::move(a));
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<FeatureRow> parse_features_text(std::string_view text, const std::string& source) {
  const auto t = csv::parse(text, source);
  t.require_header(feature_header());
  std::vector<FeatureRow> out;
  const std::size_t p = feature_names().size();
  for (const auto& row : t.rows) {
    FeatureRow r;
    r.edition = static_cast<int>(csv::to_long(row, 0, t));
    r.match_id = id_field(row, 1, t);
    r.date = csv::to_date(row, 2, t);
    r.team = id_field(row, 3, t);
    r.opponent = id_field(row, 4, t);
    r.goals = csv::to_count(row, 5, t);
    const auto gs = csv::to_long(row, 6, t);
    if (gs != 0 && gs != 1)
      throw ParseError(t.source, row.line, "row " + std::to_string(row.line) + ": groupstage must be 0 or 1");
    r.groupstage = static_cast<int>(gs);
    r.as_of = csv::to_date(row, 7, t);
    for (std::size_t j = 0; j < p; ++j) r.differences.push_back(csv::to_double(row, 8 + j, t));
    out.push_back(std::move(r));
  }
  // Both rows of a match must mirror each other.
  std::map<std::string, std::vector<const FeatureRow*>> by_match;
  for (const auto& r : out) by_match[r.match_id].push_back(&r);
  for (const auto& [id, rs] : by_match) {
    if (rs.size() != 2) throw ValidationError(source + ": match " + id + " must have exactly two rows");
    const auto& a = *rs[0];
    const auto& b = *rs[1];
    if (a.team != b.opponent || a.opponent != b.team || a.groupstage != b.groupstage || a.edition != b.edition)
      throw ValidationError(source + ": rows of match " + id + " are not paired");
    for (std::size_t j = 0; j < p; ++j)
      if (std::abs(a.differences[j] + b.differences[j]) > 1e-9 * (1.0 + std::abs(a.differences[j])))
        throw ValidationError(source + ": match " + id + " differences are not antisymmetric in " +
                              feature_names()[j]);
  }
  return out;
}

std::vector<FeatureRow> parse_features(const std::filesystem::path& path) {
  return parse_features_text(csv::read_text(path), path.string());
}

void write_features(std::ostream& out, const std::vector<FeatureRow>& rows) {
  csv::write_row(out, feature_header());
  for (const auto& r : rows) {
    std::vector<std::string> f = {std::to_string(r.edition), r.match_id, r.date.to_string(), r.team, r.opponent,
                                  std::to_string(r.goals), std::to_string(r.groupstage), r.as_of.to_string()};
    for (const double v : r.differences) f.push_back(csv::exact(v));
    csv::write_row(out, f);
  }
}

// ---------------------------------------------------------------- lasso

double LassoFit::linear_predictor(const FeatureRow& row) const {
  const auto v = design_row(row);
  if (v.size() != coefficients.size()) throw ValidationError("feature row does not match the model's columns");
  double e = intercept;
  for (std::size_t j = 0; j < v.size(); ++j) e += coefficients[j] * v[j];
  return e;
}

double predict_intensity(const LassoFit& fit, const FeatureRow& row) { return std::exp(fit.linear_predictor(row)); }

double poisson_deviance(const std::vector<int>& y, const std::vector<double>& mu) {
  if (y.size() != mu.size()) throw std::invalid_argument("poisson_deviance: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double yi = y[i];
    d += (yi > 0 ? yi * std::log(yi / mu[i]) : 0.0) - (yi - mu[i]);
  }
  return 2.0 * d;
}

double lambda_max(const std::vector<FeatureRow>& rows) {
  check_rows(rows);
  std::vector<std::size_t> idx(rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  return lambda_max_of(make_problem(rows, idx));
}

PathPoint fit_lasso_at(const std::vector<FeatureRow>& rows, double lambda, const LassoOptions& options) {
  check_rows(rows);
  if (!(lambda >= 0.0)) throw ValidationError("lasso: lambda must be nonnegative");
  std::vector<std::size_t> idx(rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto pr = make_problem(rows, idx);
  State st;
  descend(pr, lambda, st, options);
  return to_original(pr, st, lambda);
}

std::vector<int> assign_folds(const std::vector<FeatureRow>& rows, int folds, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("at least two folds required");
  std::map<int, std::vector<std::string>> by_edition;
  std::set<std::string> seen;
  for (const auto& r : rows)
    if (seen.insert(r.match_id).second) by_edition[r.edition].push_back(r.match_id);
  if (static_cast<int>(seen.size()) < folds)
    throw ValidationError("only " + std::to_string(seen.size()) + " matches for " + std::to_string(folds) + " folds");
  std::map<std::string, int> fold_of;
  std::size_t counter = 0;
  for (auto& [edition, ids] : by_edition) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(edition)));
    rng.shuffle(ids.begin(), ids.end());
    for (const auto& id : ids) fold_of[id] = static_cast<int>(counter++ % static_cast<std::size_t>(folds));
  }
  std::vector<int> out;
  for (const auto& r : rows) out.push_back(fold_of.at(r.match_id));
  return out;
}

LassoFit fit_lasso_poisson(const std::vector<FeatureRow>& rows, const LassoOptions& options) {
  check_rows(rows);
  std::vector<std::size_t> all(rows.size());
  std::iota(all.begin(), all.end(), 0);
  const auto full = make_problem(rows, all);

  std::vector<double> grid;
  if (options.lambda_grid) {
    grid = *options.lambda_grid;
    std::sort(grid.begin(), grid.end(), std::greater<>());
  } else {
    if (options.grid_size < 2) throw ValidationError("lambda grid needs at least two points");
    const double top = std::max(lambda_max_of(full), 1e-12);
    for (int k = 0; k < options.grid_size; ++k)
      grid.push_back(top * std::pow(options.min_ratio, static_cast<double>(k) / (options.grid_size - 1)));
  }
  if (grid.empty()) throw ValidationError("empty lambda grid");

  LassoFit fit;
  fit.names = design_names();
  fit.path = path_fit(full, grid, options);

  const auto folds = assign_folds(rows, options.folds, options.seed);
  // deviance[k][g]: mean held-out deviance of fold k at grid point g.
  std::vector<std::vector<double>> deviance(static_cast<std::size_t>(options.folds));
  auto run_fold = [&](int k) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < rows.size(); ++i) (folds[i] == k ? test : train).push_back(i);
    const auto pr = make_problem(rows, train);
    const auto pts = path_fit(pr, grid, options);
    auto& dev = deviance[static_cast<std::size_t>(k)];
    for (const auto& pt : pts) {
      std::vector<int> y;
      std::vector<double> mu;
      for (auto i : test) {
        y.push_back(rows[i].goals);
        mu.push_back(std::exp(linear(pt, rows[i])));
      }
      dev.push_back(poisson_deviance(y, mu) / static_cast<double>(test.size()));
    }
  };
  const unsigned workers =
      std::min<unsigned>(options.workers ? options.workers : std::max(1u, std::thread::hardware_concurrency()),
                         static_cast<unsigned>(options.folds));
  if (workers <= 1) {
    for (int k = 0; k < options.folds; ++k) run_fold(k);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int k = static_cast<int>(w); k < options.folds; k += static_cast<int>(workers)) run_fold(k);
      });
    for (auto& t : pool) t.join();
  }

  std::size_t best = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double m = 0.0;
    for (const auto& d : deviance) m += d[g];
    m /= options.folds;
    double v = 0.0;
    for (const auto& d : deviance) v += (d[g] - m) * (d[g] - m);
    const double se = std::sqrt(v / (options.folds - 1) / options.folds);
    fit.cv.push_back({grid[g], m, se});
    if (m < fit.cv[best].mean_deviance) best = g;
  }
  std::size_t chosen = best;
  if (options.one_se_rule) {
    const double limit = fit.cv[best].mean_deviance + fit.cv[best].se_deviance;
    for (std::size_t g = 0; g < grid.size(); ++g)
      if (fit.cv[g].mean_deviance <= limit) {
        chosen = g;  // grid is decreasing, so the first hit is the largest lambda
        break;
      }
  }
  fit.lambda = grid[chosen];
  fit.intercept = fit.path[chosen].intercept;
  fit.coefficients = fit.path[chosen].coefficients;
  return fit;
}

void write_model(std::ostream& out, const LassoFit& fit) {
  out << "# lambda=" << csv::exact(fit.lambda) << '\n';
  csv::write_row(out, kModelHeader);
  csv::write_row(out, {"(intercept)", csv::exact(fit.intercept)});
  for (std::size_t j = 0; j < fit.names.size(); ++j) csv::write_row(out, {fit.names[j], csv::exact(fit.coefficients[j])});
}

LassoFit parse_model_text(std::string_view text, const std::string& source) {
  const auto t = csv::parse(text, source);
  t.require_header(kModelHeader);
  LassoFit fit;
  fit.lambda = std::numeric_limits<double>::quiet_NaN();
  fit.names = design_names();
  fit.coefficients.assign(fit.names.size(), 0.0);
  std::vector<bool> seen(fit.names.size(), false);
  bool have_intercept = false;
  for (const auto& row : t.rows) {
    const auto name = to_lower(trim(row.fields[0]));
    const double v = csv::to_double(row, 1, t);
    if (name == "(intercept)") {
      fit.intercept = v;
      have_intercept = true;
      continue;
    }
    const auto it = std::find(fit.names.begin(), fit.names.end(), name);
    if (it == fit.names.end())
      throw ParseError(t.source, row.line, "row " + std::to_string(row.line) + ": unknown feature '" + name + "'");
    const auto j = static_cast<std::size_t>(it - fit.names.begin());
    if (seen[j]) throw ParseError(t.source, row.line, "row " + std::to_string(row.line) + ": duplicate feature");
    seen[j] = true;
    fit.coefficients[j] = v;
  }
  if (!have_intercept) throw ParseError(t.source, t.header_line, "model has no (intercept) row");
  return fit;
}

LassoFit parse_model(const std::filesystem::path& path) { return parse_model_text(csv::read_text(path), path.string()); }

void write_cv_curve(std::ostream& out, const LassoFit& fit) {
  csv::write_row(out, {"lambda", "mean_deviance", "se_deviance", "nonzero", "chosen"});
  for (std::size_t g = 0; g < fit.cv.size(); ++g) {
    const auto nz = std::count_if(fit.path[g].coefficients.begin(), fit.path[g].coefficients.end(),
                                  [](double c) { return c != 0.0; });
    csv::write_row(out, {csv::exact(fit.cv[g].lambda), csv::exact(fit.cv[g].mean_deviance),
                         csv::exact(fit.cv[g].se_deviance), std::to_string(nz),
                         fit.cv[g].lambda == fit.lambda ? "1" : "0"});
  }
}

// ------------------------------------------------- external predictions

PredictionSets parse_predictions_text(std::string_view text, const std::vector<std::string>& known_matches,
                                      const std::string& source) {
  const auto t = csv::parse(text, source);
  t.require_header(kPredictionHeader);
  const std::set<std::string> known(known_matches.begin(), known_matches.end());
  PredictionSets out;
  for (const auto& row : t.rows) {
    const auto model = id_field(row, 0, t);
    const auto match = id_field(row, 1, t);
    const double lh = csv::to_double(row, 2, t);
    const double la = csv::to_double(row, 3, t);
    const auto where = "row " + std::to_string(row.line) + ": ";
    if (!(lh > 0.0) || !(la > 0.0)) throw ParseError(t.source, row.line, where + "intensities must be positive");
    if (!known.empty() && !known.count(match))
      throw ParseError(t.source, row.line, where + "unknown match '" + match + "'");
    if (!out[model].emplace(match, MatchIntensity{lh, la}).second)
      throw ParseError(t.source, row.line, where + "duplicate prediction for " + model + "/" + match);
  }
  return out;
}

PredictionSets load_external_predictions(const std::filesystem::path& path,
                                         const std::vector<std::string>& known_matches) {
  return parse_predictions_text(csv::read_text(path), known_matches, path.string());
}

void write_predictions(std::ostream& out, const PredictionSets& sets) {
  csv::write_row(out, kPredictionHeader);
  for (const auto& [model, matches] : sets)
    for (const auto& [id, m] : matches)
      csv::write_row(out, {model, id, csv::exact(m.lambda_home), csv::exact(m.lambda_away)});
}

std::map<std::string, MatchIntensity> predict_matches(const LassoFit& fit, const std::vector<FeatureRow>& rows) {
  std::map<std::string, MatchIntensity> out;
  std::map<std::string, int> seen;
  for (const auto& r : rows) {
    const double l = predict_intensity(fit, r);
    if (seen[r.match_id]++ == 0) out[r.match_id].lambda_home = l;
    else out[r.match_id].lambda_away = l;
  }
  return out;
}

void write_intensities(std::ostream& out, const std::map<std::string, MatchIntensity>& intensities) {
  csv::write_row(out, {"match_id", "lambda_home", "lambda_away"});
  for (const auto& [id, m] : intensities) csv::write_row(out, {id, csv::exact(m.lambda_home), csv::exact(m.lambda_away)});
}

std::map<std::string, MatchIntensity> parse_intensities(const std::filesystem::path& path) {
  const auto t = csv::read_file(path);
  t.require_header({"match_id", "lambda_home", "lambda_away"});
  std::map<std::string, MatchIntensity> out;
  for (const auto& row : t.rows) {
    const auto id = id_field(row, 0, t);
    const MatchIntensity m{csv::to_double(row, 1, t), csv::to_double(row, 2, t)};
    if (!(m.lambda_home > 0.0) || !(m.lambda_away > 0.0))
      throw ParseError(t.source, row.line, "intensities must be positive");
    if (!out.emplace(id, m).second) throw ParseError(t.source, row.line, "duplicate match " + id);
  }
  return out;
}

}  // namespace hybridcast::predict
