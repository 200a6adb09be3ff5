#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include <doctest.h>
#include <Eigen/Dense>

#include "cofarq/errors.hpp"
#include "cofarq/lfc.hpp"
#include "cofarq/rng.hpp"

using namespace cofarq;

namespace {

std::vector<cdouble> random_gains(Rng& rng, int n) {
  std::vector<cdouble> h(n);
  for (auto& g : h) g = rng.cnormal();
  return h;
}

// Test-local reconstruction of the transmit structure from the documented
// conventions alone: beta, phi, g_i = phi[i-1],
// f_{i,j} = -sqrt(gamma)*rho*(phi[i-1]/phi[j-1])*conj(h[j]).
struct RefCode {
  Eigen::VectorXcd g;
  Eigen::MatrixXcd F;
  std::vector<double> phi;  // phi[0..n]
};

RefCode ref_code(const std::vector<cdouble>& h, double rho, double gamma,
                 double sigma2) {
  int n = static_cast<int>(h.size());
  RefCode r;
  r.phi.assign(n + 1, 1.0);
  for (int k = 1; k <= n; ++k)
    r.phi[k] = r.phi[k - 1] /
               std::sqrt(1.0 + (1.0 + sigma2) * gamma * rho * std::norm(h[k - 1]));
  r.g.resize(n);
  r.F = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 1; i <= n; ++i) {
    r.g(i - 1) = r.phi[i - 1];
    for (int j = 1; j < i; ++j)
      r.F(i - 1, j - 1) = -std::sqrt(gamma) * rho * (r.phi[i - 1] / r.phi[j - 1]) *
                          std::conj(h[j - 1]);
  }
  return r;
}

// Best linear unbiased estimator for y = D g theta + (D F + I) z + D F n,
// derived independently of the library's solver.
struct Blue {
  Eigen::VectorXcd w;  // theta_u = sum w_i y_i
  double err_var;
};

Blue blue_oracle(const std::vector<cdouble>& h, double rho, double gamma,
                 double sigma2, int k) {
  RefCode r = ref_code(h, rho, gamma, sigma2);
  Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(k, k);
  for (int i = 0; i < k; ++i) D(i, i) = h[i];
  Eigen::MatrixXcd B = D * r.F.topLeftCorner(k, k);
  Eigen::MatrixXcd A = B + Eigen::MatrixXcd::Identity(k, k);
  Eigen::MatrixXcd C = A * A.adjoint() + sigma2 * B * B.adjoint();
  Eigen::VectorXcd a = D * r.g.head(k);
  Eigen::VectorXcd u = C.fullPivLu().solve(a);
  double denom = (a.adjoint() * u)(0).real();
  Blue out;
  out.w = u.conjugate() / denom;
  out.err_var = 1.0 / denom;
  return out;
}

}  // namespace

TEST_SUITE("lfc") {

TEST_CASE("beta closed-form values") {
  // gamma=1, sigma2=0, rho=3, |h|=1: 1/sqrt(4).
  CHECK(beta(cdouble(1, 0), 3.0, 1.0, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
  // gamma=0 is Chase: no shrink regardless of the gain.
  CHECK(beta(cdouble(2.5, -1), 7.0, 0.0, 0.3) == 1.0);
  // (1+sigma2)*gamma*rho*|h|^2 = 1.25*0.1*1.5*0.2 = 0.0375.
  CHECK(beta(cdouble(std::sqrt(0.2), 0), 1.5, 0.1, 0.25) ==
        doctest::Approx(1.0 / std::sqrt(1.0375)).epsilon(1e-12));
}

TEST_CASE("build_code matches the documented structure") {
  Rng rng(21);
  auto h = random_gains(rng, 5);
  FeedbackCode c = build_code(h, 2.0, 0.35, 0.4);
  RefCode r = ref_code(h, 2.0, 0.35, 0.4);
  CHECK((c.g - r.g).norm() < 1e-12);
  CHECK((c.F - r.F).norm() < 1e-12);
  for (int k = 0; k <= 5; ++k)
    CHECK(c.phi(k) == doctest::Approx(r.phi[k]).epsilon(1e-12));

  SUBCASE("gamma=0 has no feedback term") {
    FeedbackCode mrc = build_code(h, 2.0, 0.0, 0.0);
    CHECK(mrc.F.norm() == 0.0);
    CHECK((mrc.g - Eigen::VectorXcd::Ones(5)).norm() == 0.0);
  }
  SUBCASE("n=1 is the bare transmission") {
    FeedbackCode one = build_code(std::vector<cdouble>{h[0]}, 2.0, 0.9, 0.1);
    CHECK(one.g(0) == cdouble(1.0, 0.0));
    CHECK(one.F(0, 0) == cdouble(0.0, 0.0));
  }
}

TEST_CASE("recursion and matrix form agree") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 2 + static_cast<int>(rng.uniform_int(7));  // 2..8
    double rho = 0.2 + 5.0 * rng.uniform();
    double gamma = rng.uniform();
    double sigma2 = 0.5 * rng.uniform();
    auto h = random_gains(rng, n);
    FeedbackCode code = build_code(h, rho, gamma, sigma2);

    cdouble theta = std::sqrt(rho) * rng.cnormal() / std::sqrt(2.0);
    std::vector<cdouble> res(n);
    for (auto& z : res) z = rng.cnormal();  // z[k] + n[k] seen by the source

    Eigen::VectorXcd rv(n);
    for (int i = 0; i < n; ++i) rv(i) = res[i];
    Eigen::VectorXcd x_mat = code.g * theta + code.F * rv;

    cdouble x = theta;
    for (int k = 0; k < n; ++k) {
      CHECK(std::abs(x - x_mat(k)) < 1e-12);
      x = encode_step(x, h[k], res[k], rho, gamma, sigma2);
    }
  }
}

TEST_CASE("encode_step preserves the average transmit power") {
  Rng rng(25);
  const double rho = 3.0, gamma = 0.6, sigma2 = 0.25;
  cdouble hfix = rng.cnormal();
  double p = 0.0;
  const int reps = 40000;
  for (int i = 0; i < reps; ++i) {
    cdouble x = std::sqrt(rho) * rng.cnormal();  // E|x|^2 = rho
    cdouble y = hfix * x + rng.cnormal();
    cdouble res = apply_feedback(y, sigma2, rng) - hfix * x;
    p += std::norm(encode_step(x, hfix, res, rho, gamma, sigma2));
  }
  CHECK(p / reps == doctest::Approx(rho).epsilon(0.03));
}

TEST_CASE("perfect-COI combiner") {
  Rng rng(27);
  const double rho = 2.5;

  SUBCASE("noiseless observations recover theta exactly") {
    auto h = random_gains(rng, 4);
    cdouble theta(1.1, -0.3);
    std::vector<cdouble> ys(4);
    cdouble x = theta;
    for (int k = 0; k < 4; ++k) {
      ys[k] = h[k] * x;  // z = 0
      x = encode_step(x, h[k], cdouble(0, 0), rho, 1.0, 0.0);
    }
    EstimatorState st = combine_perfect(ys, h, rho);
    CHECK(st.biased);
    // E[theta_hat] = (1 - phi^2) theta holds exactly when z = 0.
    CHECK(std::abs(st.theta_hat - (1.0 - st.phi_sq) * theta) < 1e-12);
    UnbiasedEstimate u = unbiased_estimate(st);
    CHECK(std::abs(u.theta_u - theta) < 1e-12);
  }

  SUBCASE("single round reduces to the matched-filter estimate") {
    cdouble h1 = rng.cnormal();
    cdouble y(0.7, 0.2);
    EstimatorState st =
        combine_perfect(std::vector<cdouble>{y}, std::vector<cdouble>{h1}, rho);
    UnbiasedEstimate u = unbiased_estimate(st);
    CHECK(std::abs(u.theta_u - y * std::conj(h1) / std::norm(h1)) < 1e-12);
    CHECK(u.err_var == doctest::Approx(1.0 / std::norm(h1)).epsilon(1e-9));
  }

  SUBCASE("unbiasedness and variance against Monte Carlo") {
    auto h = random_gains(rng, 3);
    cdouble theta(0.9, 0.4);
    const int reps = 30000;
    cdouble mean(0, 0);
    double var = 0.0;
    EstimatorState last;
    for (int r = 0; r < reps; ++r) {
      std::vector<cdouble> ys(3);
      cdouble x = theta;
      for (int k = 0; k < 3; ++k) {
        cdouble z = rng.cnormal();
        ys[k] = h[k] * x + z;
        x = encode_step(x, h[k], z, rho, 1.0, 0.0);
      }
      last = combine_perfect(ys, h, rho);
      cdouble err = unbiased_estimate(last).theta_u - theta;
      mean += err;
      var += std::norm(err);
    }
    CHECK(std::abs(mean / static_cast<double>(reps)) < 0.05);
    CHECK(var / reps ==
          doctest::Approx(unbiased_estimate(last).err_var).epsilon(0.05));
  }

  SUBCASE("all-zero gains cannot be unbiased") {
    std::vector<cdouble> zero(2, cdouble(0, 0));
    std::vector<cdouble> ys(2, cdouble(1, 0));
    EstimatorState st = combine_perfect(ys, zero, rho);
    CHECK(st.phi_sq == doctest::Approx(1.0));
    CHECK_THROWS_AS(unbiased_estimate(st), DegenerateChannelError);
  }
}

TEST_CASE("noisy combiner equals the BLUE oracle") {
  Rng rng(29);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 2 + static_cast<int>(rng.uniform_int(5));  // 2..6
    double rho = 0.3 + 4.0 * rng.uniform();
    double gamma = rng.uniform();
    double sigma2 = rng.uniform();
    auto h = random_gains(rng, n);
    FeedbackCode code = build_code(h, rho, gamma, sigma2);
    for (int k = 1; k <= n; ++k) {
      Blue ref = blue_oracle(h, rho, gamma, sigma2, k);
      CombinerWeights cw = combiner_weights(code, k);
      CHECK((cw.w - ref.w).norm() < 1e-9 * std::max(1.0, ref.w.norm()));
      CHECK(cw.err_var == doctest::Approx(ref.err_var).epsilon(1e-9));
      CHECK(post_snr(code, k) ==
            doctest::Approx(rho / ref.err_var).epsilon(1e-9));
    }
  }
}

TEST_CASE("noisy combiner with sigma2=0, gamma=1 matches the perfect branch") {
  Rng rng(31);
  const double rho = 1.7;
  for (int trial = 0; trial < 30; ++trial) {
    auto h = random_gains(rng, 4);
    FeedbackCode code = build_code(h, rho, 1.0, 0.0);
    cdouble theta(0.8, -0.6);
    std::vector<cdouble> ys(4);
    cdouble x = theta;
    for (int k = 0; k < 4; ++k) {
      cdouble z = rng.cnormal();
      ys[k] = h[k] * x + z;
      x = encode_step(x, h[k], z, rho, 1.0, 0.0);
    }
    UnbiasedEstimate p = unbiased_estimate(combine_perfect(ys, h, rho));
    EstimatorState nz = combine_noisy(ys, code);
    CHECK(!nz.biased);
    CHECK(std::abs(nz.theta_hat - p.theta_u) < 1e-10);
    CHECK(nz.err_var == doctest::Approx(p.err_var).epsilon(1e-10));
  }
}

TEST_CASE("noisy combiner error variance against Monte Carlo") {
  Rng rng(33);
  const double rho = 2.0, gamma = 0.4, sigma2 = 0.25;
  auto h = random_gains(rng, 4);
  FeedbackCode code = build_code(h, rho, gamma, sigma2);
  cdouble theta(1.0, 0.5);
  const int reps = 30000;
  cdouble mean(0, 0);
  double var = 0.0;
  double predicted = combiner_weights(code, 4).err_var;
  for (int r = 0; r < reps; ++r) {
    std::vector<cdouble> ys(4);
    cdouble x = theta;
    for (int k = 0; k < 4; ++k) {
      cdouble z = rng.cnormal();
      ys[k] = h[k] * x + z;
      cdouble res = apply_feedback(ys[k], sigma2, rng) - h[k] * x;
      x = encode_step(x, h[k], res, rho, gamma, sigma2);
    }
    cdouble err = combine_noisy(ys, code).theta_hat - theta;
    mean += err;
    var += std::norm(err);
  }
  CHECK(std::abs(mean / static_cast<double>(reps)) < 0.05);
  CHECK(var / reps == doctest::Approx(predicted).epsilon(0.05));
}

TEST_CASE("gamma=0 reduces to maximal ratio combining") {
  Rng rng(35);
  auto h = random_gains(rng, 4);
  const double rho = 3.0;
  FeedbackCode code = build_code(h, rho, 0.0, 0.0);
  double g2 = 0.0;
  for (auto& v : h) g2 += std::norm(v);
  CHECK(post_snr(code) == doctest::Approx(rho * g2).epsilon(1e-12));
  CombinerWeights cw = combiner_weights(code, 4);
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(cw.w(i) - std::conj(h[i]) / g2) < 1e-12);
}

TEST_CASE("round-1 weights do not depend on gamma") {
  Rng rng(37);
  cdouble h1 = rng.cnormal();
  std::vector<cdouble> h{h1, rng.cnormal(), rng.cnormal()};
  CombinerWeights a = combiner_weights(build_code(h, 2.0, 0.0, 0.0), 1);
  CombinerWeights b = combiner_weights(build_code(h, 2.0, 0.7, 0.3), 1);
  CHECK(a.w(0) == b.w(0));
  CHECK(a.err_var == b.err_var);
  CHECK(std::abs(a.w(0) - std::conj(h1) / std::norm(h1)) < 1e-12);
}

TEST_CASE("post_snr is nondecreasing in the truncation length") {
  Rng rng(39);
  for (int trial = 0; trial < 20; ++trial) {
    auto h = random_gains(rng, 6);
    FeedbackCode code =
        build_code(h, 1.0 + 3.0 * rng.uniform(), rng.uniform(), rng.uniform());
    double prev = 0.0;
    for (int k = 1; k <= 6; ++k) {
      double s = post_snr(code, k);
      CHECK(s >= prev - 1e-12);
      prev = s;
    }
  }
}

TEST_CASE("N=2 closed form matches the combiner") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    cdouble h1 = rng.cnormal(), h2 = rng.cnormal();
    double rho = 0.2 + 4.0 * rng.uniform();
    double gamma = rng.uniform();
    double sigma2 = rng.uniform();
    FeedbackCode code = build_code(std::vector<cdouble>{h1, h2}, rho, gamma, sigma2);
    CHECK(post_snr(code) ==
          doctest::Approx(snr_n2_closed(h1, h2, rho, gamma, sigma2)).epsilon(1e-9));
  }
}

TEST_CASE("N=2 bound and limit formulas") {
  // Frozen values at rho=0.01, gamma=0.5, sigma2=0.25.
  CHECK(snr_n2_upper(0.01, 0.5) == doctest::Approx(0.020142421).epsilon(1e-6));
  CHECK(snr_n2_lower(0.01, 0.5, 0.25) ==
        doctest::Approx(0.020078921).epsilon(1e-6));
  CHECK(snr_n2_lower(0.01, 0.5, 0.25) < snr_n2_upper(0.01, 0.5));
  CHECK(snr_high_rho_limit(1e4, 1.0) == doctest::Approx(2e4));
}

TEST_CASE("awgn surrogate") {
  // Noiseless feedback at gamma=1 compounds: (1+rho)^N - 1.
  CHECK(awgn_post_snr(1.0, 3.0, 0.0, 4) ==
        doctest::Approx(std::pow(4.0, 4) - 1.0).epsilon(1e-9));
  // gamma=0 is MRC on N unit gains.
  CHECK(awgn_post_snr(0.0, 2.0, 0.5, 5) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("optimize_gamma") {
  SUBCASE("noiseless feedback wants full correction") {
    CHECK(optimize_gamma(3.0, 0.0, 4) == 1.0);
  }
  SUBCASE("overwhelming feedback noise wants almost none") {
    CHECK(optimize_gamma(3.0, 1e6, 4) < 1e-3);
  }
  SUBCASE("result beats a fine reference grid") {
    for (double sigma2 : {0.1, 0.25, 1.0}) {
      double g0 = optimize_gamma(3.0, sigma2, 4);
      double v0 = awgn_post_snr(g0, 3.0, sigma2, 4);
      double best = 0.0;
      for (int i = 0; i <= 1000; ++i)
        best = std::max(best, awgn_post_snr(i / 1000.0, 3.0, sigma2, 4));
      CHECK(v0 >= best - 1e-4 * best);
    }
  }
  SUBCASE("parameter validation") {
    CHECK_THROWS_AS(optimize_gamma(-1.0, 0.1, 4), ConfigError);
    CHECK_THROWS_AS(optimize_gamma(1.0, -0.1, 4), ConfigError);
    CHECK_THROWS_AS(optimize_gamma(1.0, 0.1, 0), ConfigError);
  }
}

TEST_CASE("optimized feedback beats MRC on average") {
  Rng rng(43);
  const double rho = 3.0, sigma2 = 0.25;
  double g0 = optimize_gamma(rho, sigma2, 4);
  double gain_sum = 0.0;
  int wins = 0;
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    auto h = random_gains(rng, 4);
    double lfc = post_snr(build_code(h, rho, g0, sigma2));
    double mrc = post_snr(build_code(h, rho, 0.0, 0.0));
    gain_sum += lfc - mrc;
    wins += lfc > mrc;
  }
  CHECK(gain_sum / reps > 0.0);
  CHECK(wins > reps / 2);
}

TEST_CASE("degenerate channels throw") {
  std::vector<cdouble> zero(3, cdouble(0, 0));
  FeedbackCode code = build_code(zero, 2.0, 0.5, 0.1);
  std::vector<cdouble> ys(3, cdouble(1, 1));
  CHECK_THROWS_AS(combine_noisy(ys, code), DegenerateChannelError);
  CHECK_THROWS_AS(combiner_weights(code, 3), DegenerateChannelError);
}

TEST_CASE("parameter validation") {
  std::vector<cdouble> h{cdouble(1, 0)};
  CHECK_THROWS_AS(build_code(h, 0.0, 0.5, 0.1), ConfigError);
  CHECK_THROWS_AS(build_code(h, 1.0, 1.5, 0.1), ConfigError);
  CHECK_THROWS_AS(build_code(h, 1.0, 0.5, -0.1), ConfigError);
  CHECK_THROWS_AS(build_code(std::vector<cdouble>{}, 1.0, 0.5, 0.1),
                  ConfigError);
}

}  // TEST_SUITE
