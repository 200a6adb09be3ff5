#pragma once
// Square-QAM constellations with Gray labeling and exact soft demapping.
// Scaling: alpha = 3*rho/(2*(M-1)) so the equiprobable constellation power is
// exactly rho. Labels: per-axis Gray, I bits then Q bits, all-zero bits at
// the (+,+) corner. Estimator error is modeled CN(0, err_var), i.e. variance
// err_var/2 per component; the demapper factorizes per axis.

#include <complex>
#include <span>
#include <vector>

#include "cofarq/channel.hpp"

namespace cofarq {

struct Constellation {
  int m_points = 0;      // 4, 16 or 64
  int bits_per_sym = 0;  // log2(m_points)
  double alpha = 0.0;
  std::vector<cdouble> points;  // indexed by bit label (I bits | Q bits)
  // Per-axis amplitude (unscaled by sqrt(alpha)) indexed by axis label.
  std::vector<double> axis_amp;
  int axis_levels = 0;  // sqrt(m_points)
  int axis_bits = 0;
};

Constellation build_constellation(int m_points, double rho);

// Largest square-QAM size from {4,16,64} with log2(M) strictly below
// max_bits; floors at QPSK.
int pick_constellation_size(double max_bits);

std::vector<cdouble> map_bits(std::span<const int> bits,
                              const Constellation& c);

struct DemapResult {
  std::vector<double> bit_llrs;  // log p(bit=0)/p(bit=1), I bits then Q bits
  std::vector<double> sym_logp;  // normalized log-APP per constellation label
};

DemapResult llr_demap(cdouble theta_hat_u, double err_var,
                      const Constellation& c, bool max_log = false);

// Hot-path form: appends bits_per_sym LLRs to out, no symbol posteriors.
void llr_demap_bits(cdouble theta_hat_u, double err_var,
                    const Constellation& c, std::vector<double>& out,
                    bool max_log = false);

// Exact symbol error probability of the Gray square QAM under CN(0, err_var)
// estimator error, conditioned on the channel (used by the error-decay
// experiments, where Monte Carlo at 1e-9 error rates is hopeless).
double qam_symbol_error_prob(const Constellation& c, double err_var);

}  // namespace cofarq
