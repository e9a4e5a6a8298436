#pragma once

// Distributional loss for a constraint cost z >= 0: KL divergence from a point mass at
// zero to a normal with mean mu and standard deviation delta truncated to [0, inf),
// with the additive constants dropped:
//
//   L(mu, delta) = sum_k log delta_k + 1/2 (mu_k / delta_k)^2 + log(1 - Phi(-mu_k / delta_k))

#include <cstddef>
#include <vector>

namespace logicloss {

inline constexpr double kDefaultVarianceFloor = 0.01;

struct DeltaState {
  std::vector<double> delta;
  double variance_floor = kDefaultVarianceFloor;

  static DeltaState ones(std::size_t m, double variance_floor = kDefaultVarianceFloor);
  bool valid() const;
};

struct LogicLossTerms {
  double log_det = 0.0;
  double quad = 0.0;
  double tail = 0.0;

  double total() const { return log_det + quad + tail; }
};

struct LogicLossGrad {
  std::vector<double> d_mu;
  std::vector<double> d_delta;
};

double std_normal_pdf(double x);
double std_normal_cdf(double x);
// log Phi(x), accurate far into the lower tail.
double log_std_normal_cdf(double x);

LogicLossTerms logic_loss(const std::vector<double>& mu, const DeltaState& d);
LogicLossGrad logic_loss_grad(const std::vector<double>& mu, const DeltaState& d);

// delta_k^2 = max(mean_i mu_ik, floor).
DeltaState delta_oracle(const std::vector<std::vector<double>>& batch_mu,
                        double floor = kDefaultVarianceFloor);

// KL(TN(mu1, sigma1^2) || TN(mu2, sigma2^2)) for normals truncated to [0, inf).
double truncated_kl(double mu1, double sigma1, double mu2, double sigma2);

// Limit of truncated_kl(0, s, mu2, sigma2) + log(s) + 1/2 as s -> 0.
double dirac_limit_kl(double mu2, double sigma2);

// Task loss plus distributional constraint loss; the two are summed without a weight.
double total_loss(double task_loss, const LogicLossTerms& logic);

}  // namespace logicloss
