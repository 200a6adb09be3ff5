#pragma once
// Linear feedback combining core: the (g, F, q) transmit/receive structure,
// the per-round recursion, both combiners, post-processed SNR, and the
// power-split optimizer.
//
// Conventions:
//   beta[k]   = (1 + (1+sigma2)*gamma*rho*|h[k]|^2)^(-1/2)
//   phi[k]    = prod_{i<=k} beta[i], phi[0] = 1 (kept in log domain)
//   g_i       = phi[i-1]
//   f_{i,j}   = -sqrt(gamma)*rho*(phi[i-1]/phi[j-1])*conj(h[j]),  i > j
//   recursion x[k+1] = beta[k]*(x[k] - sqrt(gamma)*rho*conj(h[k])*(z[k]+n[k]))
// The matrix form x = g*theta + F*(z+n) and the recursion agree to machine
// precision; tests pin this on random fixtures.

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cofarq/channel.hpp"

namespace cofarq {

struct FeedbackCode {
  int n = 0;
  double rho = 0.0;
  double gamma = 0.0;
  double sigma2 = 0.0;
  std::vector<cdouble> gains;   // effective scalar gains h[1..n] at [0..n-1]
  std::vector<double> beta;     // beta[k] at [k-1]
  std::vector<double> log_phi;  // log phi[k] at [k], size n+1
  Eigen::VectorXcd g;
  Eigen::MatrixXcd F;           // strictly lower triangular

  double phi(int k) const { return std::exp(log_phi[k]); }
  double phi_sq(int k) const { return std::exp(2.0 * log_phi[k]); }
};

struct EstimatorState {
  int k = 0;
  cdouble theta_hat{0.0, 0.0};
  double phi_sq = 1.0;
  // Variance of the *unbiased* estimate's error, conditioned on the gains.
  double err_var = 0.0;
  // True for the perfect-COI branch whose theta_hat has mean (1-phi^2)*theta.
  bool biased = false;
};

struct UnbiasedEstimate {
  cdouble theta_u;
  double err_var;
};

double beta(cdouble gain, double rho, double gamma, double sigma2);

FeedbackCode build_code(std::span<const cdouble> gains, double rho,
                        double gamma, double sigma2);

// One encoder round; residual_k is the source's reconstruction of z[k]+n[k].
cdouble encode_step(cdouble x_k, cdouble gain_k, cdouble residual_k,
                    double rho, double gamma, double sigma2);

inline cdouble feedback_residual(cdouble r_k, cdouble gain_k, cdouble x_k) {
  return r_k - gain_k * x_k;
}

// Perfect-COI branch (gamma=1, sigma2=0). Returns the biased estimate.
EstimatorState combine_perfect(std::span<const cdouble> ys,
                               std::span<const cdouble> gains, double rho);

// Resolves the bias (divides by 1-phi^2 when needed) and reports err_var.
UnbiasedEstimate unbiased_estimate(const EstimatorState& state);

// Optimal-combiner branch for any (gamma, sigma2); uses the first ys.size()
// rounds of the code (truncation rule). Returns an unbiased estimate.
EstimatorState combine_noisy(std::span<const cdouble> ys,
                             const FeedbackCode& code);

// Combining weights w such that theta_u = sum_i w_i * y_i for the first k
// rounds, plus the error variance. Shared across all symbols of a block.
struct CombinerWeights {
  Eigen::VectorXcd w;
  double err_var;
  double phi_sq;
};
CombinerWeights combiner_weights(const FeedbackCode& code, int k);

// rho * (g* D* C^-1 D g) on the k-round truncation (k = code.n by default).
double post_snr(const FeedbackCode& code, int k = -1);

// Explicit N=2 closed form.
double snr_n2_closed(cdouble h1, cdouble h2, double rho, double gamma,
                     double sigma2);

// N=2 ensemble-average SNR bounds (small-rho upper/lower, large-rho limit).
inline double snr_n2_upper(double rho, double gamma) {
  return 2.0 * rho * (1.0 + std::sqrt(gamma) * rho + gamma * rho * rho);
}
inline double snr_n2_lower(double rho, double gamma, double sigma2) {
  return 2.0 * rho *
         (1.0 + std::sqrt(gamma) * rho - 0.5 * (1.0 + sigma2) * gamma * rho);
}
inline double snr_high_rho_limit(double rho, double sigma2) {
  return rho * (1.0 + 1.0 / sigma2);
}

// Post-processed SNR of the all-gains-one (AWGN) surrogate channel.
double awgn_post_snr(double gamma, double rho, double sigma2, int n);

// Power split maximizing the AWGN-surrogate post-processed SNR:
// 64-point grid then golden-section to 1e-4. sigma2 == 0 returns 1.
double optimize_gamma(double rho, double sigma2, int n);

}  // namespace cofarq
