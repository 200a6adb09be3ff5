#include "cofarq/lfc.hpp"

#include <cmath>
#include <limits>

#include "cofarq/errors.hpp"

namespace cofarq {

namespace {

void check_params(double rho, double gamma, double sigma2) {
  if (rho <= 0.0) throw ConfigError("rho must be > 0");
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must be in [0,1]");
  if (sigma2 < 0.0) throw ConfigError("sigma2 must be >= 0");
}

}  // namespace

double beta(cdouble gain, double rho, double gamma, double sigma2) {
  check_params(rho, gamma, sigma2);
  return 1.0 / std::sqrt(1.0 + (1.0 + sigma2) * gamma * rho * std::norm(gain));
}

FeedbackCode build_code(std::span<const cdouble> gains, double rho,
                        double gamma, double sigma2) {
  check_params(rho, gamma, sigma2);
  const int n = static_cast<int>(gains.size());
  if (n < 1) throw ConfigError("need at least one gain");

  FeedbackCode c;
  c.n = n;
  c.rho = rho;
  c.gamma = gamma;
  c.sigma2 = sigma2;
  c.gains.assign(gains.begin(), gains.end());
  c.beta.resize(n);
  c.log_phi.resize(n + 1);
  c.log_phi[0] = 0.0;
  for (int k = 1; k <= n; ++k) {
    c.beta[k - 1] = beta(gains[k - 1], rho, gamma, sigma2);
    c.log_phi[k] = c.log_phi[k - 1] + std::log(c.beta[k - 1]);
  }

  c.g.resize(n);
  c.F = Eigen::MatrixXcd::Zero(n, n);
  const double root_gamma = std::sqrt(gamma);
  for (int i = 1; i <= n; ++i) {
    c.g(i - 1) = c.phi(i - 1);
    for (int j = 1; j < i; ++j) {
      // phi[i-1]/phi[j-1] computed in the log domain.
      double ratio = std::exp(c.log_phi[i - 1] - c.log_phi[j - 1]);
      c.F(i - 1, j - 1) = -root_gamma * rho * ratio * std::conj(gains[j - 1]);
    }
  }
  return c;
}

cdouble encode_step(cdouble x_k, cdouble gain_k, cdouble residual_k,
                    double rho, double gamma, double sigma2) {
  double b = beta(gain_k, rho, gamma, sigma2);
  return b * (x_k - std::sqrt(gamma) * rho * std::conj(gain_k) * residual_k);
}

EstimatorState combine_perfect(std::span<const cdouble> ys,
                               std::span<const cdouble> gains, double rho) {
  const int k = static_cast<int>(ys.size());
  if (k < 1 || static_cast<int>(gains.size()) < k)
    throw DimensionError("combine_perfect: need gains for every observation");
  if (rho <= 0.0) throw ConfigError("rho must be > 0");

  EstimatorState st;
  st.k = k;
  st.biased = true;
  double log_phi_prev = 0.0;  // log phi[i-1]
  double noise_sum = 0.0;     // sum_m |h[m]|^2 / phi^2[m-1]
  cdouble acc{0.0, 0.0};
  for (int i = 1; i <= k; ++i) {
    double g2 = std::norm(gains[i - 1]);
    double b = 1.0 / std::sqrt(1.0 + rho * g2);  // beta_(1,0)[i]
    acc += std::exp(log_phi_prev) * b * b * rho * std::conj(gains[i - 1]) *
           ys[i - 1];
    noise_sum += g2 * std::exp(-2.0 * log_phi_prev);
    log_phi_prev += std::log(b);
  }
  st.theta_hat = acc;
  double phi_sq_k = std::exp(2.0 * log_phi_prev);
  st.phi_sq = phi_sq_k;
  double denom = 1.0 - phi_sq_k;
  if (denom > 0.0) {
    double scale = rho * phi_sq_k / denom;
    st.err_var = scale * scale * noise_sum;
  } else {
    st.err_var = std::numeric_limits<double>::infinity();
  }
  return st;
}

UnbiasedEstimate unbiased_estimate(const EstimatorState& state) {
  if (!state.biased) return {state.theta_hat, state.err_var};
  double denom = 1.0 - state.phi_sq;
  if (denom < 1e-12)
    throw DegenerateChannelError(
        "all observed gains are zero: estimate cannot be unbiased");
  return {state.theta_hat / denom, state.err_var};
}

namespace {

// Solves the k-round truncated combiner: returns (C^-1 D g, g* D* C^-1 D g).
struct NoisySolve {
  Eigen::VectorXcd u;
  double denom;
};

NoisySolve solve_noisy(const FeedbackCode& code, int k) {
  if (k < 1 || k > code.n)
    throw DimensionError("truncation length out of range");
  Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(k, k);
  for (int i = 0; i < k; ++i) D(i, i) = code.gains[i];
  Eigen::MatrixXcd B = D * code.F.topLeftCorner(k, k);
  Eigen::MatrixXcd A = B + Eigen::MatrixXcd::Identity(k, k);
  Eigen::MatrixXcd C =
      A * A.adjoint() + code.sigma2 * (B * B.adjoint());
  Eigen::VectorXcd b = D * code.g.head(k);
  // C = (unit lower triangular)(..)* + PSD term: always positive definite.
  Eigen::VectorXcd u = C.llt().solve(b);
  double denom = b.dot(u).real();
  return {std::move(u), denom};
}

}  // namespace

EstimatorState combine_noisy(std::span<const cdouble> ys,
                             const FeedbackCode& code) {
  const int k = static_cast<int>(ys.size());
  NoisySolve s = solve_noisy(code, k);
  if (s.denom < 1e-300)
    throw DegenerateChannelError("combiner is degenerate: all gains zero");
  Eigen::Map<const Eigen::VectorXcd> y(ys.data(), k);
  EstimatorState st;
  st.k = k;
  st.biased = false;
  st.theta_hat = s.u.dot(y) / s.denom;  // q* y with q = u / denom
  st.err_var = 1.0 / s.denom;
  st.phi_sq = code.phi_sq(k);
  return st;
}

CombinerWeights combiner_weights(const FeedbackCode& code, int k) {
  NoisySolve s = solve_noisy(code, k);
  if (s.denom < 1e-300)
    throw DegenerateChannelError("combiner is degenerate: all gains zero");
  CombinerWeights cw;
  cw.w = s.u.conjugate() / s.denom;
  cw.err_var = 1.0 / s.denom;
  cw.phi_sq = code.phi_sq(k);
  return cw;
}

double post_snr(const FeedbackCode& code, int k) {
  if (k < 0) k = code.n;
  NoisySolve s = solve_noisy(code, k);
  return code.rho * s.denom;
}

double snr_n2_closed(cdouble h1, cdouble h2, double rho, double gamma,
                     double sigma2) {
  check_params(rho, gamma, sigma2);
  double a1 = std::norm(h1);
  double a2 = std::norm(h2);
  double b1 = 1.0 / (1.0 + (1.0 + sigma2) * gamma * rho * a1);  // beta^2[1]
  double num = b1 * a2 * std::pow(1.0 + std::sqrt(gamma) * rho * a1, 2.0);
  double den = 1.0 + sigma2 * gamma * rho * rho * b1 * a1 * a2;
  return rho * (a1 + num / den);
}

double awgn_post_snr(double gamma, double rho, double sigma2, int n) {
  std::vector<cdouble> ones(static_cast<std::size_t>(n), cdouble{1.0, 0.0});
  FeedbackCode code = build_code(ones, rho, gamma, sigma2);
  return post_snr(code);
}

double optimize_gamma(double rho, double sigma2, int n) {
  if (rho <= 0.0) throw ConfigError("rho must be > 0");
  if (sigma2 < 0.0) throw ConfigError("sigma2 must be >= 0");
  if (n < 1) throw ConfigError("n must be >= 1");
  if (sigma2 == 0.0) return 1.0;

  auto f = [&](double g) { return awgn_post_snr(g, rho, sigma2, n); };

  // Coarse grid localizes the peak of the (smooth, unimodal) objective.
  const int grid = 64;
  double best_g = 0.0, best_v = f(0.0);
  for (int i = 1; i <= grid; ++i) {
    double g = static_cast<double>(i) / grid;
    double v = f(g);
    if (v > best_v) {
      best_v = v;
      best_g = g;
    }
  }
  double lo = std::max(0.0, best_g - 1.0 / grid);
  double hi = std::min(1.0, best_g + 1.0 / grid);

  // Golden-section refinement to 1e-4 absolute.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > 1e-4) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace cofarq
