#include "hybridcast/poisson_rank.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace hybridcast::rank {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log of sum_k C(z,k) C(y,k) k! u^k and the weighted mean of k under the
// same terms, with log_u = log(lambda_c / (lambda1 * lambda2)).
struct CovarianceSum {
  double log_sum = 0.0;
  double mean_k = 0.0;
};

CovarianceSum covariance_sum(int z, int y, double log_u) {
  const int kmax = std::min(z, y);
  if (kmax == 0 || log_u == kNegInf) return {};
  // log a_k built incrementally: a_{k+1}/a_k = (z-k)(y-k)/(k+1) * u.
  double log_a = 0.0;
  double best = 0.0;
  std::vector<double> logs(static_cast<std::size_t>(kmax) + 1);
  logs[0] = 0.0;
  for (int k = 0; k < kmax; ++k) {
    log_a += std::log(static_cast<double>(z - k) * static_cast<double>(y - k) / (k + 1.0)) + log_u;
    logs[static_cast<std::size_t>(k) + 1] = log_a;
    best = std::max(best, log_a);
  }
  double sum = 0.0, ksum = 0.0;
  for (int k = 0; k <= kmax; ++k) {
    const double t = std::exp(logs[static_cast<std::size_t>(k)] - best);
    sum += t;
    ksum += k * t;
  }
  return {best + std::log(sum), ksum / sum};
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::independent ? "independent" : "bivariate"; }

ModelKind model_kind_from_string(std::string_view name) {
  const auto n = to_lower(name);
  if (n == "independent") return ModelKind::independent;
  if (n == "bivariate") return ModelKind::bivariate;
  throw std::invalid_argument("model must be 'independent' or 'bivariate', got '" + std::string(name) + "'");
}

double time_weight(double days_back, double half_period) {
  if (!(days_back >= 0.0)) throw std::invalid_argument("time_weight: days_back must be nonnegative");
  if (!(half_period > 0.0)) throw std::invalid_argument("time_weight: half period must be positive");
  return std::exp2(-days_back / half_period);
}

double log_bivariate_pmf(int z, int y, double lambda1, double lambda2, double lambda_c) {
  if (z < 0 || y < 0) throw std::invalid_argument("bivariate_pmf: negative count");
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0)) throw std::invalid_argument("bivariate_pmf: intensities must be positive");
  if (!(lambda_c >= 0.0)) throw std::invalid_argument("bivariate_pmf: covariance must be nonnegative");
  const double log_u = lambda_c > 0.0 ? std::log(lambda_c) - std::log(lambda1) - std::log(lambda2) : kNegInf;
  const auto cs = covariance_sum(z, y, log_u);
  return z * std::log(lambda1) + y * std::log(lambda2) - std::lgamma(z + 1.0) - std::lgamma(y + 1.0) -
         (lambda1 + lambda2 + lambda_c) + cs.log_sum;
}

double bivariate_pmf(int z, int y, double lambda1, double lambda2, double lambda_c) {
  return std::exp(log_bivariate_pmf(z, y, lambda1, lambda2, lambda_c));
}

double RatingSet::strength(const std::string& team) const {
  const auto it = strengths.find(team);
  if (it == strengths.end()) throw ValidationError("no rating for team '" + team + "'");
  return it->second;
}

double intensity(const RatingSet& ratings, const std::string& team_i, const std::string& team_j, bool i_at_home) {
  return std::exp(ratings.intercept + ratings.strength(team_i) - ratings.strength(team_j) +
                  (i_at_home ? ratings.home_effect : 0.0));
}

MatchIntensities predict_match(const RatingSet& ratings, const std::string& team_i, const std::string& team_j,
                               Venue venue) {
  return {intensity(ratings, team_i, team_j, venue == Venue::first_at_home),
          intensity(ratings, team_j, team_i, venue == Venue::second_at_home), ratings.covariance};
}

std::vector<MatchRecord> matches_up_to(std::span<const MatchRecord> matches, Date as_of) {
  std::vector<MatchRecord> out;
  for (const auto& m : matches)
    if (m.date <= as_of) out.push_back(m);
  return out;
}

// ------------------------------------------------------------ likelihood

Likelihood::Likelihood(std::span<const MatchRecord> matches, const DecayConfig& config, ModelKind kind) : kind_(kind) {
  if (!(config.half_period_days > 0.0)) throw ValidationError("half period must be positive");
  if (matches.empty()) throw ValidationError("no matches to fit");
  std::set<std::string> names;
  for (const auto& m : matches) {
    if (m.date > config.as_of)
      throw ValidationError("match " + m.home_team + " v " + m.away_team + " on " + m.date.to_string() +
                            " is after the as-of date " + config.as_of.to_string());
    names.insert(m.home_team);
    names.insert(m.away_team);
  }
  teams_.assign(names.begin(), names.end());
  if (teams_.size() < 2) throw ValidationError("need at least two teams");
  auto index = [&](const std::string& t) {
    return static_cast<std::size_t>(std::lower_bound(teams_.begin(), teams_.end(), t) - teams_.begin());
  };
  obs_.reserve(matches.size());
  for (const auto& m : matches) {
    obs_.push_back({index(m.home_team), index(m.away_team), m.home_goals, m.away_goals, m.home_team_at_home(),
                    m.away_team_at_home(),
                    time_weight(static_cast<double>(days_between(m.date, config.as_of)), config.half_period_days)});
  }
}

std::size_t Likelihood::parameter_count() const {
  return 2 + (teams_.size() - 1) + (kind_ == ModelKind::bivariate ? 1 : 0);
}

std::vector<double> Likelihood::strengths(const std::vector<double>& params) const {
  const std::size_t n = teams_.size();
  std::vector<double> r(n, 0.0);
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    r[k] = params[2 + k];
    sum += r[k];
  }
  r[n - 1] = -sum;
  return r;
}

std::vector<double> Likelihood::initial_parameters() const {
  double goals = 0.0;
  for (const auto& o : obs_) goals += o.z + o.y;
  const double mean = goals / (2.0 * static_cast<double>(obs_.size()));
  std::vector<double> p(parameter_count(), 0.0);
  p[0] = std::log(std::max(mean, 1e-3));
  if (kind_ == ModelKind::bivariate) p.back() = std::log(0.01);
  return p;
}

double Likelihood::evaluate(const std::vector<double>& params, std::vector<double>* gradient) const {
  const std::size_t n = teams_.size();
  const auto r = strengths(params);
  const double beta0 = params[0];
  const double home = params[1];
  const bool bivariate = kind_ == ModelKind::bivariate;
  const double log_c = bivariate ? params.back() : kNegInf;
  const double lambda_c = bivariate ? std::exp(log_c) : 0.0;

  std::vector<double> dr(gradient ? n : 0, 0.0);
  double d_beta0 = 0.0, d_home = 0.0, d_logc = 0.0;
  double ll = 0.0;
  for (const auto& o : obs_) {
    const double eta1 = beta0 + r[o.i] - r[o.j] + (o.i_home ? home : 0.0);
    const double eta2 = beta0 + r[o.j] - r[o.i] + (o.j_home ? home : 0.0);
    const double l1 = std::exp(eta1);
    const double l2 = std::exp(eta2);
    const auto cs = covariance_sum(o.z, o.y, bivariate ? log_c - eta1 - eta2 : kNegInf);
    ll += o.weight * (o.z * eta1 + o.y * eta2 - std::lgamma(o.z + 1.0) - std::lgamma(o.y + 1.0) -
                      (l1 + l2 + lambda_c) + cs.log_sum);
    if (gradient) {
      const double g1 = o.weight * (o.z - l1 - cs.mean_k);
      const double g2 = o.weight * (o.y - l2 - cs.mean_k);
      d_beta0 += g1 + g2;
      d_home += (o.i_home ? g1 : 0.0) + (o.j_home ? g2 : 0.0);
      dr[o.i] += g1 - g2;
      dr[o.j] += g2 - g1;
      if (bivariate) d_logc += o.weight * (cs.mean_k - lambda_c);
    }
  }
  if (gradient) {
    gradient->assign(parameter_count(), 0.0);
    (*gradient)[0] = d_beta0;
    (*gradient)[1] = d_home;
    for (std::size_t k = 0; k + 1 < n; ++k) (*gradient)[2 + k] = dr[k] - dr[n - 1];
    if (bivariate) gradient->back() = d_logc;
  }
  return ll;
}

double Likelihood::evaluate_with_covariance(const std::vector<double>& params, double lambda_c) const {
  const auto r = strengths(params);
  double ll = 0.0;
  for (const auto& o : obs_) {
    const double l1 = std::exp(params[0] + r[o.i] - r[o.j] + (o.i_home ? params[1] : 0.0));
    const double l2 = std::exp(params[0] + r[o.j] - r[o.i] + (o.j_home ? params[1] : 0.0));
    ll += o.weight * log_bivariate_pmf(o.z, o.y, l1, l2, lambda_c);
  }
  return ll;
}

// ------------------------------------------------------------ fitting

namespace {

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }
std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Quasi-Newton (BFGS) ascent on the log-likelihood.
struct AscentResult {
  Eigen::VectorXd x;
  double value;
  Eigen::VectorXd gradient;
  std::vector<double> trace;
  int iterations;
  bool converged;
};

AscentResult bfgs_ascent(const Likelihood& lik, std::vector<double> start, const FitOptions& options,
                         double total_weight) {
  const auto n = static_cast<Eigen::Index>(start.size());
  std::vector<double> g_std;
  Eigen::VectorXd x = to_eigen(start);
  double f = lik.evaluate(start, &g_std);
  Eigen::VectorXd g = to_eigen(g_std);
  // Inverse Hessian approximation of -loglik.
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n) / std::max(total_weight, 1.0);
  AscentResult res{x, f, g, {f}, 0, false};
  bool first = true;
  for (int it = 0; it < options.max_iterations; ++it) {
    if (max_abs(g) < options.gradient_tolerance) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = h_inv * g;  // ascent direction
    double slope = g.dot(dir);
    if (!(slope > 0.0)) {
      h_inv = Eigen::MatrixXd::Identity(n, n) / std::max(total_weight, 1.0);
      dir = h_inv * g;
      slope = g.dot(dir);
    }
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new;
    Eigen::VectorXd g_new;
    double f_new = f;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * dir;
      f_new = lik.evaluate(to_std(x_new), &g_std);
      g_new = to_eigen(g_std);
      if (std::isfinite(f_new)) {
        if (f_new >= f + 1e-4 * step * slope) {
          accepted = true;
          break;
        }
        // Near the optimum the change in f drops below its rounding error;
        // fall back to the trapezoid estimate of the change and require the
        // gradient to shrink.
        const double predicted = 0.5 * step * dir.dot(g + g_new);
        if (std::abs(f_new - f) <= 1e-13 * (1.0 + std::abs(f)) && predicted >= 0.0 && max_abs(g_new) < max_abs(g)) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g - g_new;  // gradient change of -loglik
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (first) {
        h_inv = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
        first = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      h_inv = (I - rho * s * y.transpose()) * h_inv * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    x = x_new;
    f = f_new;
    g = g_new;
    res.trace.push_back(f);
    res.iterations = it + 1;
  }
  if (max_abs(g) < options.gradient_tolerance) res.converged = true;
  res.x = x;
  res.value = f;
  res.gradient = g;
  return res;
}

// Observed information by central differences of the analytic gradient.
Eigen::MatrixXd observed_information(const Likelihood& lik, const Eigen::VectorXd& x) {
  const auto n = x.size();
  Eigen::MatrixXd info(n, n);
  std::vector<double> gp, gm;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[k]));
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    lik.evaluate(to_std(xp), &gp);
    lik.evaluate(to_std(xm), &gm);
    for (Eigen::Index j = 0; j < n; ++j) info(j, k) = -(gp[static_cast<std::size_t>(j)] - gm[static_cast<std::size_t>(j)]) / (2 * h);
  }
  return 0.5 * (info + info.transpose());
}

}  // namespace

RatingSet fit_ratings(std::span<const MatchRecord> matches, const DecayConfig& config, ModelKind kind,
                      const FitOptions& options) {
  const ModelKind lik_kind = options.fix_covariance_at_zero ? ModelKind::independent : kind;
  const Likelihood lik(matches, config, lik_kind);
  const auto& teams = lik.teams();

  double total_weight = 0.0;
  for (const auto& m : matches)
    total_weight += time_weight(static_cast<double>(days_between(m.date, config.as_of)), config.half_period_days);

  auto res = bfgs_ascent(lik, lik.initial_parameters(), options, total_weight);
  if (!res.converged)
    throw ConvergenceError("rating fit did not converge after " + std::to_string(res.iterations) +
                           " iterations (gradient max-norm " + std::to_string(max_abs(res.gradient)) + ")");

  RatingSet out;
  out.model_kind = kind;
  out.fitted_as_of = config.as_of;
  out.intercept = res.x[0];
  out.home_effect = res.x[1];
  out.covariance = lik_kind == ModelKind::bivariate ? std::exp(res.x[res.x.size() - 1]) : 0.0;
  const auto r = lik.strengths(to_std(res.x));
  // Re-center to remove the rounding left by the last free coordinate.
  const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
  for (std::size_t k = 0; k < teams.size(); ++k) out.strengths[teams[k]] = r[k] - mean;

  out.diagnostics.log_likelihood = res.value;
  out.diagnostics.trace = std::move(res.trace);
  out.diagnostics.iterations = res.iterations;
  out.diagnostics.gradient_norm = max_abs(res.gradient);

  UnionFind uf(teams.size());
  auto index = [&](const std::string& t) {
    return static_cast<std::size_t>(std::lower_bound(teams.begin(), teams.end(), t) - teams.begin());
  };
  for (const auto& m : matches) uf.unite(index(m.home_team), index(m.away_team));
  std::set<std::size_t> roots;
  for (std::size_t k = 0; k < teams.size(); ++k) roots.insert(uf.find(k));
  out.diagnostics.components = roots.size();
  out.diagnostics.identifiable = roots.size() == 1;

  if (options.compute_standard_errors) {
    const Eigen::MatrixXd info = observed_information(lik, res.x);
    const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
    StandardErrors se;
    se.intercept = std::sqrt(cov(0, 0));
    se.home_effect = std::sqrt(cov(1, 1));
    const auto free = static_cast<Eigen::Index>(teams.size() - 1);
    for (Eigen::Index k = 0; k < free; ++k) se.strengths[teams[static_cast<std::size_t>(k)]] = std::sqrt(cov(2 + k, 2 + k));
    se.strengths[teams.back()] = std::sqrt(cov.block(2, 2, free, free).sum());
    if (lik_kind == ModelKind::bivariate) {
      const auto c = cov.rows() - 1;
      se.covariance = out.covariance * std::sqrt(cov(c, c));
    }
    out.standard_errors = std::move(se);
  }
  return out;
}

}  // namespace hybridcast::rank
