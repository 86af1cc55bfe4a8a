#pragma once

// Shared fixtures and independent oracles for the test suites. Nothing here
// calls into the library code it is used to check.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "hybridcast/ingest.hpp"
#include "hybridcast/predictor.hpp"

namespace testing_support {

namespace fs = std::filesystem;

inline fs::path data_path(const std::string& name) { return fs::path(HYBRIDCAST_TEST_DATA_DIR) / name; }

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("hybridcast_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ------------------------------------------------------------ probability

inline double pois(int k, double lambda) {
  if (k < 0) return 0.0;
  if (lambda == 0.0) return k == 0 ? 1.0 : 0.0;
  double p = std::exp(-lambda);
  for (int i = 1; i <= k; ++i) p *= lambda / i;
  return p;
}

// Win/draw/loss of independent Poisson scores by direct double sum.
inline std::array<double, 3> brute_outcome(double l1, double l2, int max_goals = 40) {
  std::array<double, 3> out{0, 0, 0};
  for (int a = 0; a <= max_goals; ++a)
    for (int b = 0; b <= max_goals; ++b) {
      const double p = pois(a, l1) * pois(b, l2);
      out[a > b ? 0 : a == b ? 1 : 2] += p;
    }
  return out;
}

inline double brute_skellam(int k, double l1, double l2, int max_goals = 80) {
  double s = 0.0;
  for (int b = 0; b <= max_goals; ++b) s += pois(b + k, l1) * pois(b, l2);
  return s;
}

// Probability that the first team advances: 90 minutes, extra time at
// scaled intensities, then a fair coin.
inline double knockout_win(double l1, double l2, double factor) {
  const auto reg = brute_outcome(l1, l2);
  const auto et = brute_outcome(l1 * factor, l2 * factor);
  return reg[0] + reg[1] * (et[0] + 0.5 * et[1]);
}

inline double rps_formula(const std::array<double, 3>& p, int outcome) {
  double cum_p = 0.0, cum_y = 0.0, s = 0.0;
  for (int r = 0; r < 2; ++r) {
    cum_p += p[static_cast<std::size_t>(r)];
    cum_y += (outcome == r + 1) ? 1.0 : 0.0;
    s += (cum_p - cum_y) * (cum_p - cum_y);
  }
  return 0.5 * s;
}

// ------------------------------------------------------------ group oracle

// Distribution of the final order of a 4-team round robin under the
// ranking rule: points, goal difference, goals; then the same criteria on
// the mutual matches of teams still level; then a uniform lot. Every score
// with at most `max_goals` per side is enumerated.
struct GroupOracle {
  // prob[i][r]: team i finishes in position r (0-based).
  std::array<std::array<double, 4>, 4> position{};
  // pair[i][j]: team i first and team j second.
  std::array<std::array<double, 4>, 4> top_two{};
  double mass = 0.0;  // enumerated probability; 1 - mass was truncated
};

inline GroupOracle enumerate_group(const std::array<std::array<double, 4>, 4>& lambda, int max_goals) {
  constexpr std::array<std::pair<int, int>, 6> fixtures{{{0, 1}, {2, 3}, {0, 2}, {1, 3}, {0, 3}, {1, 2}}};
  const int g = max_goals + 1;
  std::array<std::vector<double>, 6> score_p;
  for (std::size_t m = 0; m < 6; ++m) {
    const auto [a, b] = fixtures[m];
    score_p[m].resize(static_cast<std::size_t>(g * g));
    for (int x = 0; x < g; ++x)
      for (int y = 0; y < g; ++y)
        score_p[m][static_cast<std::size_t>(x * g + y)] =
            pois(x, lambda[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]) *
            pois(y, lambda[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)]);
  }
  GroupOracle out;
  std::array<int, 12> goals{};

  struct Key {
    int pts, gd, gf;
    bool operator==(const Key&) const = default;
    bool operator>(const Key& o) const { return std::tie(pts, gd, gf) > std::tie(o.pts, o.gd, o.gf); }
  };
  // Table lines counting only matches among the teams in `mask`.
  auto lines = [&](unsigned mask) {
    std::array<Key, 4> k{};
    for (std::size_t m = 0; m < 6; ++m) {
      const auto [a, b] = fixtures[m];
      if (!(mask >> a & 1u) || !(mask >> b & 1u)) continue;
      const int x = goals[2 * m], y = goals[2 * m + 1];
      auto& ka = k[static_cast<std::size_t>(a)];
      auto& kb = k[static_cast<std::size_t>(b)];
      ka.gf += x;
      kb.gf += y;
      ka.gd += x - y;
      kb.gd += y - x;
      ka.pts += x > y ? 3 : x == y ? 1 : 0;
      kb.pts += y > x ? 3 : x == y ? 1 : 0;
    }
    return k;
  };

  auto leaf = [&](double p) {
    out.mass += p;
    // Ordered blocks of teams; members of a block are split by the lot.
    std::array<int, 4> order{0, 1, 2, 3};
    const auto overall = lines(0xFu);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return overall[static_cast<std::size_t>(x)] > overall[static_cast<std::size_t>(y)]; });
    std::array<int, 4> block{};  // block id per position
    int next_block = 0;
    for (std::size_t lo = 0; lo < 4;) {
      std::size_t hi = lo + 1;
      while (hi < 4 && overall[static_cast<std::size_t>(order[hi])] == overall[static_cast<std::size_t>(order[lo])]) ++hi;
      if (hi - lo > 1) {
        unsigned mask = 0;
        for (std::size_t i = lo; i < hi; ++i) mask |= 1u << order[i];
        const auto mutual = lines(mask);
        std::stable_sort(order.begin() + static_cast<long>(lo), order.begin() + static_cast<long>(hi),
                         [&](int x, int y) { return mutual[static_cast<std::size_t>(x)] > mutual[static_cast<std::size_t>(y)]; });
        for (std::size_t i = lo; i < hi; ++i) {
          if (i > lo && !(mutual[static_cast<std::size_t>(order[i])] == mutual[static_cast<std::size_t>(order[i - 1])])) ++next_block;
          block[i] = next_block;
        }
      } else {
        block[lo] = next_block;
      }
      ++next_block;
      lo = hi;
    }
    std::array<int, 4> size{}, first_pos{};
    for (int i = 3; i >= 0; --i) {
      ++size[static_cast<std::size_t>(block[static_cast<std::size_t>(i)])];
      first_pos[static_cast<std::size_t>(block[static_cast<std::size_t>(i)])] = i;
    }
    for (std::size_t i = 0; i < 4; ++i) {
      const int b = block[i], n = size[static_cast<std::size_t>(b)], f = first_pos[static_cast<std::size_t>(b)];
      for (int r = f; r < f + n; ++r) out.position[static_cast<std::size_t>(order[i])][static_cast<std::size_t>(r)] += p / n;
    }
    // Ordered (first, second) pairs.
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        if (i == j) continue;
        const int bi = block[i], bj = block[j];
        const int ni = size[static_cast<std::size_t>(bi)], nj = size[static_cast<std::size_t>(bj)];
        const int fi = first_pos[static_cast<std::size_t>(bi)], fj = first_pos[static_cast<std::size_t>(bj)];
        double q = 0.0;
        if (bi == bj) {
          if (fi == 0) q = 1.0 / (ni * (ni - 1));
        } else if (fi == 0 && ni == 1 && fj == 1) {
          q = 1.0 / nj;
        }
        out.top_two[static_cast<std::size_t>(order[i])][static_cast<std::size_t>(order[j])] += p * q;
      }
  };

  // Six nested loops over the score grid of each fixture.
  std::function<void(std::size_t, double)> rec = [&](std::size_t m, double p) {
    if (m == 6) {
      leaf(p);
      return;
    }
    for (int x = 0; x < g; ++x)
      for (int y = 0; y < g; ++y) {
        goals[2 * m] = x;
        goals[2 * m + 1] = y;
        rec(m + 1, p * score_p[m][static_cast<std::size_t>(x * g + y)]);
      }
  };
  rec(0, 1.0);
  return out;
}

// Stage probabilities of a 4-team bracket: S1 = t0 v t1, S2 = t2 v t3,
// then the final. win(a, b) is the probability that a beats b.
template <class Win>
std::array<std::array<double, 2>, 4> enumerate_four_team_bracket(Win win) {
  std::array<std::array<double, 2>, 4> out{};  // [team][final, champion]
  const double s1[2] = {win(0, 1), win(1, 0)};
  const double s2[2] = {win(2, 3), win(3, 2)};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const int fa = a, fb = 2 + b;
      const double p = s1[a] * s2[b];
      out[static_cast<std::size_t>(fa)][0] += p;
      out[static_cast<std::size_t>(fb)][0] += p;
      out[static_cast<std::size_t>(fa)][1] += p * win(fa, fb);
      out[static_cast<std::size_t>(fb)][1] += p * win(fb, fa);
    }
  return out;
}

// ------------------------------------------------------------ regression

// Unpenalized Poisson regression by Newton's method on the raw design.
// Returns [intercept, b_1 .. b_p].
inline Eigen::VectorXd newton_poisson(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int iterations = 100) {
  const Eigen::Index n = x.rows(), p = x.cols();
  Eigen::MatrixXd z(n, p + 1);
  z.col(0).setOnes();
  z.rightCols(p) = x;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
  beta(0) = std::log(y.mean());
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd mu = (z * beta).array().exp().matrix();
    const Eigen::VectorXd grad = z.transpose() * (y - mu);
    const Eigen::MatrixXd hess = z.transpose() * mu.asDiagonal() * z;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    beta += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-13) break;
  }
  return beta;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
  return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n - 1) / 2;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  return sab / std::sqrt(saa * sbb);
}

// ------------------------------------------------------------ generators

struct TrueRatings {
  double intercept = 0.1;
  double home = 0.3;
  double covariance = 0.1;
  std::vector<std::string> teams;
  std::vector<double> strengths;  // zero sum
};

inline TrueRatings make_true_ratings(int teams, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 0.35);
  TrueRatings t;
  for (int i = 0; i < teams; ++i) {
    char name[8];
    std::snprintf(name, sizeof name, "t%02d", i);
    t.teams.emplace_back(name);
    t.strengths.push_back(nd(gen));
  }
  const double mean = std::accumulate(t.strengths.begin(), t.strengths.end(), 0.0) / teams;
  for (auto& s : t.strengths) s -= mean;
  return t;
}

// Matches from the bivariate Poisson model: goals X + C and Y + C with
// X ~ P(l1), Y ~ P(l2), C ~ P(lc), all on one date. Every pairing occurs,
// home sides alternate, and half of the matches are on neutral ground.
inline std::vector<hybridcast::MatchRecord> simulate_matches(const TrueRatings& t, int count, std::uint64_t seed,
                                                             hybridcast::Date date) {
  std::mt19937_64 gen(seed);
  std::vector<hybridcast::MatchRecord> out;
  const int n = static_cast<int>(t.teams.size());
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) pairs.emplace_back(i, j);
  for (int m = 0; m < count; ++m) {
    const auto [i, j] = pairs[static_cast<std::size_t>(m) % pairs.size()];
    const bool neutral = (m / static_cast<int>(pairs.size())) % 2 == 1 || m % 2 == 1;
    const double eta = t.intercept + t.strengths[static_cast<std::size_t>(i)] - t.strengths[static_cast<std::size_t>(j)];
    const double l1 = std::exp(eta + (neutral ? 0.0 : t.home));
    const double l2 = std::exp(t.intercept + t.strengths[static_cast<std::size_t>(j)] - t.strengths[static_cast<std::size_t>(i)]);
    std::poisson_distribution<int> p1(l1), p2(l2);
    int c = 0;
    if (t.covariance > 0) c = std::poisson_distribution<int>(t.covariance)(gen);
    hybridcast::MatchRecord r;
    r.date = date;
    r.home_team = t.teams[static_cast<std::size_t>(i)];
    r.away_team = t.teams[static_cast<std::size_t>(j)];
    r.home_goals = p1(gen) + c;
    r.away_goals = p2(gen) + c;
    r.neutral = neutral;
    r.venue_country = neutral ? "zzz" : r.home_team;
    out.push_back(r);
  }
  return out;
}

// Feature rows for a synthetic edition set: differences drawn from N(0, 1)
// per team pair, goals Poisson with log-intensity b0 + d'beta.
inline std::vector<hybridcast::predict::FeatureRow> synthetic_rows(int matches, const std::vector<double>& beta,
                                                                   double b0, std::uint64_t seed, int editions = 4) {
  using hybridcast::predict::FeatureRow;
  const std::size_t p = hybridcast::predict::design_names().size();
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<FeatureRow> rows;
  for (int m = 0; m < matches; ++m) {
    const int edition = 2000 + 4 * (m % editions);
    std::vector<double> d(p);
    for (std::size_t k = 0; k + 1 < p; ++k) d[k] = nd(gen);
    const int group = (m % 3 == 0) ? 0 : 1;
    double eta1 = b0, eta2 = b0;
    for (std::size_t k = 0; k + 1 < p; ++k) {
      eta1 += beta[k] * d[k];
      eta2 -= beta[k] * d[k];
    }
    eta1 += beta[p - 1] * group;
    eta2 += beta[p - 1] * group;
    std::poisson_distribution<int> g1(std::exp(eta1)), g2(std::exp(eta2));
    const hybridcast::Date date(edition, 6, 15);
    FeatureRow a, b;
    a.edition = b.edition = edition;
    a.match_id = b.match_id = "m" + std::to_string(m);
    a.date = b.date = date;
    a.as_of = b.as_of = hybridcast::Date(edition, 6, 1);
    a.team = b.opponent = "h" + std::to_string(m);
    a.opponent = b.team = "a" + std::to_string(m);
    a.groupstage = b.groupstage = group;
    a.goals = g1(gen);
    b.goals = g2(gen);
    a.differences.assign(d.begin(), d.end() - 1);
    b.differences.resize(a.differences.size());
    for (std::size_t k = 0; k < a.differences.size(); ++k) b.differences[k] = -a.differences[k];
    rows.push_back(a);
    rows.push_back(b);
  }
  return rows;
}

// Design matrix in design_names() order.
inline Eigen::MatrixXd design_matrix(const std::vector<hybridcast::predict::FeatureRow>& rows) {
  const std::size_t p = hybridcast::predict::design_names().size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k + 1 < p; ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i].differences[k];
    x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p - 1)) = rows[i].groupstage;
  }
  return x;
}

}  // namespace testing_support
