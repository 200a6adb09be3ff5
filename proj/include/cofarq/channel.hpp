#pragma once
// Rayleigh block fading and the additive-noise links.
// Forward noise variance is fixed at 1 (the SNR lives entirely in rho);
// feedback noise variance sigma2 is per complex sample.

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "cofarq/rng.hpp"

namespace cofarq {

using cdouble = std::complex<double>;

struct ChannelConfig {
  int mr = 1;
  int mt = 1;
  int n_max = 4;       // retransmission budget N
  double sigma2 = 0.0; // feedback noise variance
};

// One packet session's worth of channel state: n_max independent gain
// realizations (block fading), entries i.i.d. CN(0,1).
struct ChannelTrace {
  std::vector<Eigen::MatrixXcd> gains; // each mr x mt
  double sigma2 = 0.0;
  int n_max = 0;

  cdouble scalar(int k) const { return gains[k](0, 0); } // SISO view, k 0-based
};

ChannelTrace sample_trace(const ChannelConfig& cfg, Rng& rng);

// y = h*x + z, fresh z ~ CN(0, I). add_noise=false is the test hook.
cdouble apply_forward(cdouble x, cdouble h, Rng& rng, bool add_noise = true);
Eigen::VectorXcd apply_forward(const Eigen::VectorXcd& x,
                               const Eigen::MatrixXcd& h, Rng& rng,
                               bool add_noise = true);

// r = y + n, n ~ CN(0, sigma2). sigma2 == 0 returns y bit-exactly.
cdouble apply_feedback(cdouble y, double sigma2, Rng& rng);
Eigen::VectorXcd apply_feedback(const Eigen::VectorXcd& y, double sigma2,
                                Rng& rng);

// Uniform midrise quantizer applied independently to re/im over
// [-range, range], saturating at the outermost levels.
cdouble quantize_coi(cdouble y, int bits_per_phase, double range);

// Default per-component range: ~4 standard deviations of a received-signal
// component at average channel conditions.
inline double default_quant_range(double rho) {
  return 4.0 * std::sqrt((1.0 + rho) / 2.0);
}

// Quantization-noise variance of one complex sample under the uniform model:
// two components, each uniform on [-step/2, step/2].
inline double quant_noise_var(int bits_per_phase, double range) {
  double step = 2.0 * range / static_cast<double>(1u << bits_per_phase);
  return step * step / 6.0;
}

}  // namespace cofarq
