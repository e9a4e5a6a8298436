#include "logicloss/variational.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "logicloss/errors.hpp"

namespace logicloss {

namespace {

constexpr double kNegativeCostTol = 1e-12;

void check_inputs(const std::vector<double>& mu, const DeltaState& d) {
  if (mu.size() != d.delta.size())
    throw ShapeMismatch(fmt::format("mu has {} entries, delta has {}", mu.size(), d.delta.size()));
  for (double v : mu) {
    if (!std::isfinite(v)) throw NonFinite("logic_loss: non-finite cost");
    if (v < -kNegativeCostTol) throw NegativeCost(fmt::format("logic_loss: negative cost {}", v));
  }
  for (double s : d.delta)
    if (!(s > 0.0) || !std::isfinite(s)) throw NonPositiveSigma(fmt::format("delta = {}", s));
}

}  // namespace

DeltaState DeltaState::ones(std::size_t m, double variance_floor) {
  DeltaState d;
  d.delta.assign(m, 1.0);
  d.variance_floor = variance_floor;
  return d;
}

bool DeltaState::valid() const {
  for (double s : delta)
    if (!std::isfinite(s) || !(s * s >= variance_floor * (1.0 - 1e-12))) return false;
  return true;
}

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double log_std_normal_cdf(double x) {
  if (x > -20.0) return std::log(std_normal_cdf(x));
  // Asymptotic series of the Mills ratio for the far lower tail.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

LogicLossTerms logic_loss(const std::vector<double>& mu, const DeltaState& d) {
  check_inputs(mu, d);
  LogicLossTerms t;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const double m = std::max(mu[k], 0.0);
    const double r = m / d.delta[k];
    t.log_det += std::log(d.delta[k]);
    t.quad += 0.5 * r * r;
    t.tail += log_std_normal_cdf(r);  // log(1 - Phi(-r))
  }
  return t;
}

LogicLossGrad logic_loss_grad(const std::vector<double>& mu, const DeltaState& d) {
  check_inputs(mu, d);
  LogicLossGrad g;
  g.d_mu.resize(mu.size());
  g.d_delta.resize(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const double m = std::max(mu[k], 0.0);
    const double s = d.delta[k];
    const double r = m / s;
    const double mills = std_normal_pdf(r) / std_normal_cdf(r);
    g.d_mu[k] = m / (s * s) + mills / s;
    g.d_delta[k] = 1.0 / s - m * m / (s * s * s) - mills * m / (s * s);
  }
  return g;
}

DeltaState delta_oracle(const std::vector<std::vector<double>>& batch_mu, double floor) {
  if (batch_mu.empty()) throw EmptyBatch("delta_oracle: empty batch");
  const std::size_t m = batch_mu.front().size();
  std::vector<double> sum(m, 0.0);
  for (const auto& mu : batch_mu) {
    if (mu.size() != m) throw ShapeMismatch("delta_oracle: ragged batch");
    for (std::size_t k = 0; k < m; ++k) {
      if (mu[k] < -kNegativeCostTol) throw NegativeCost(fmt::format("delta_oracle: cost {}", mu[k]));
      sum[k] += mu[k];
    }
  }
  DeltaState d;
  d.variance_floor = floor;
  d.delta.resize(m);
  const double n = static_cast<double>(batch_mu.size());
  for (std::size_t k = 0; k < m; ++k) d.delta[k] = std::sqrt(std::max(sum[k] / n, floor));
  return d;
}

double truncated_kl(double mu1, double sigma1, double mu2, double sigma2) {
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0))
    throw NonPositiveSigma(fmt::format("truncated_kl: sigma1 = {}, sigma2 = {}", sigma1, sigma2));
  const double s1 = sigma1 * sigma1, s2 = sigma2 * sigma2;
  const double ratio = s1 / s2;
  const double diff = mu1 - mu2;
  const double moment = 0.5 * ((ratio - 1.0) - std::log(ratio) + diff * diff / s2);

  // 1 - erf(-mu/(sqrt2 sigma)) = erfc(-mu/(sqrt2 sigma))
  const double tail1 = std::erfc(-mu1 / (std::numbers::sqrt2 * sigma1));
  const double tail2 = std::erfc(-mu2 / (std::numbers::sqrt2 * sigma2));
  const double mean_shift = ((1.0 / s1 + 1.0 / s2) * mu1 - 2.0 * mu2 / s2) * sigma1 /
                            std::sqrt(2.0 * std::numbers::pi) /
                            (std::exp(mu1 * mu1 / (2.0 * s1)) * tail1);
  return moment + mean_shift + std::log(tail2 / tail1);
}

double dirac_limit_kl(double mu2, double sigma2) {
  if (!(sigma2 > 0.0)) throw NonPositiveSigma(fmt::format("dirac_limit_kl: sigma2 = {}", sigma2));
  return std::log(sigma2) + mu2 * mu2 / (2.0 * sigma2 * sigma2) +
         std::log(std::erfc(-mu2 / (std::numbers::sqrt2 * sigma2)));
}

double total_loss(double task_loss, const LogicLossTerms& logic) { return task_loss + logic.total(); }

}  // namespace logicloss
