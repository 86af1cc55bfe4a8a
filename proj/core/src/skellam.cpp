#include "hybridcast/skellam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hybridcast::metrics {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_poisson(int k, double lambda) {
  if (k < 0) return kNegInf;
  if (lambda == 0.0) return k == 0 ? 0.0 : kNegInf;
  return k * std::log(lambda) - lambda - std::lgamma(k + 1.0);
}

void check(double lambda1, double lambda2) {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !std::isfinite(lambda1) || !std::isfinite(lambda2))
    throw std::invalid_argument("intensities must be finite and nonnegative");
}

}  // namespace

double poisson_pmf(int k, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("poisson_pmf: negative intensity");
  return std::exp(log_poisson(k, lambda));
}

double log_skellam_pmf(int k, double lambda1, double lambda2) {
  check(lambda1, lambda2);
  if (lambda1 == 0.0) return log_poisson(-k, lambda2);
  if (lambda2 == 0.0) return log_poisson(k, lambda1);
  // e^{-(l1+l2)} (l1/l2)^{k/2} I_|k|(2 sqrt(l1 l2)) with the Bessel series
  // summed in log space: term m is (m+|k|) log a + m log b - log m! - log (m+|k|)!
  // where (a, b) = (l1, l2) for k >= 0 and (l2, l1) otherwise.
  const int n = std::abs(k);
  const double la = std::log(k >= 0 ? lambda1 : lambda2);
  const double lb = std::log(k >= 0 ? lambda2 : lambda1);
  const double peak = std::sqrt(lambda1 * lambda2);
  double best = kNegInf;
  double sum = 0.0;
  for (int m = 0;; ++m) {
    const double t = (m + n) * la + m * lb - std::lgamma(m + 1.0) - std::lgamma(m + n + 1.0);
    if (t > best) {
      sum = sum * std::exp(best - t) + 1.0;
      best = t;
    } else {
      sum += std::exp(t - best);
    }
    if (m > peak && t < best - 40.0) break;
  }
  return best + std::log(sum) - lambda1 - lambda2;
}

double skellam_pmf(int k, double lambda1, double lambda2) { return std::exp(log_skellam_pmf(k, lambda1, lambda2)); }

double OutcomeProbs::operator[](int outcome) const {
  switch (outcome) {
    case 1: return p_win;
    case 2: return p_draw;
    case 3: return p_loss;
    default: throw std::invalid_argument("outcome must be 1, 2 or 3");
  }
}

OutcomeProbs outcome_probs(double lambda1, double lambda2) {
  check(lambda1, lambda2);
  const double hi = std::max(lambda1, lambda2);
  const int bound = std::max(40, static_cast<int>(std::ceil(hi + 12.0 * std::sqrt(hi) + 20.0)));
  OutcomeProbs p;
  p.p_draw = skellam_pmf(0, lambda1, lambda2);
  if (lambda1 > 0.0)
    for (int k = 1; k <= bound; ++k) p.p_win += skellam_pmf(k, lambda1, lambda2);
  if (lambda2 > 0.0)
    for (int k = 1; k <= bound; ++k) p.p_loss += skellam_pmf(-k, lambda1, lambda2);
  const double total = p.p_win + p.p_draw + p.p_loss;
  p.p_win /= total;
  p.p_draw /= total;
  p.p_loss /= total;
  return p;
}

}  // namespace hybridcast::metrics
