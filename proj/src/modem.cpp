#include "cofarq/modem.hpp"

#include <algorithm>
#include <cmath>

#include "cofarq/errors.hpp"

namespace cofarq {

namespace {

int gray_encode(int b) { return b ^ (b >> 1); }

int gray_decode(int g) {
  int b = g;
  b ^= b >> 1;
  b ^= b >> 2;
  b ^= b >> 4;
  return b;
}

double log_sum_exp(double a, double b) {
  double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

Constellation build_constellation(int m_points, double rho) {
  if (m_points != 4 && m_points != 16 && m_points != 64)
    throw ConfigError("constellation size must be 4, 16 or 64");
  if (rho <= 0.0) throw ConfigError("rho must be > 0");

  Constellation c;
  c.m_points = m_points;
  c.bits_per_sym = static_cast<int>(std::round(std::log2(m_points)));
  c.alpha = 3.0 * rho / (2.0 * (m_points - 1));
  c.axis_levels = static_cast<int>(std::round(std::sqrt(m_points)));
  c.axis_bits = c.bits_per_sym / 2;

  // Axis label b -> amplitude. Amplitude index runs -(L-1), ..., +(L-1) in
  // steps of 2; label gray(L-1-idx) makes adjacent amplitudes differ in one
  // bit and puts label 0 on the most positive amplitude.
  c.axis_amp.resize(c.axis_levels);
  const double root_alpha = std::sqrt(c.alpha);
  for (int idx = 0; idx < c.axis_levels; ++idx) {
    int label = gray_encode(c.axis_levels - 1 - idx);
    c.axis_amp[label] = (2.0 * idx - (c.axis_levels - 1)) * root_alpha;
  }

  c.points.resize(m_points);
  for (int label = 0; label < m_points; ++label) {
    int bi = label >> c.axis_bits;
    int bq = label & ((1 << c.axis_bits) - 1);
    c.points[label] = {c.axis_amp[bi], c.axis_amp[bq]};
  }
  return c;
}

int pick_constellation_size(double max_bits) {
  if (6.0 < max_bits) return 64;
  if (4.0 < max_bits) return 16;
  return 4;
}

std::vector<cdouble> map_bits(std::span<const int> bits,
                              const Constellation& c) {
  if (bits.size() % c.bits_per_sym != 0)
    throw DimensionError("bit count not divisible by bits per symbol");
  std::vector<cdouble> out;
  out.reserve(bits.size() / c.bits_per_sym);
  for (std::size_t i = 0; i < bits.size(); i += c.bits_per_sym) {
    int label = 0;
    for (int b = 0; b < c.bits_per_sym; ++b)
      label = (label << 1) | (bits[i + b] & 1);
    out.push_back(c.points[label]);
  }
  return out;
}

namespace {

// Per-axis bit LLRs appended to out (MSB first within the axis).
void axis_llrs(double x, double err_var, const Constellation& c,
               std::vector<double>& out, bool max_log,
               double* metrics_out = nullptr) {
  const int L = c.axis_levels;
  double m[8];
  for (int b = 0; b < L; ++b) {
    double d = x - c.axis_amp[b];
    m[b] = -d * d / err_var;
    if (metrics_out) metrics_out[b] = m[b];
  }
  const double ninf = -1e300;
  for (int t = c.axis_bits - 1; t >= 0; --t) {
    double l0 = ninf, l1 = ninf;
    for (int b = 0; b < L; ++b) {
      double& acc = (b >> t) & 1 ? l1 : l0;
      if (max_log)
        acc = std::max(acc, m[b]);
      else
        acc = acc == ninf ? m[b] : log_sum_exp(acc, m[b]);
    }
    out.push_back(l0 - l1);
  }
}

}  // namespace

void llr_demap_bits(cdouble theta_hat_u, double err_var,
                    const Constellation& c, std::vector<double>& out,
                    bool max_log) {
  if (err_var <= 0.0) throw NumericError("err_var must be > 0");
  axis_llrs(theta_hat_u.real(), err_var, c, out, max_log);
  axis_llrs(theta_hat_u.imag(), err_var, c, out, max_log);
}

DemapResult llr_demap(cdouble theta_hat_u, double err_var,
                      const Constellation& c, bool max_log) {
  if (err_var <= 0.0) throw NumericError("err_var must be > 0");
  DemapResult r;
  r.bit_llrs.reserve(c.bits_per_sym);
  double mi[8], mq[8];
  axis_llrs(theta_hat_u.real(), err_var, c, r.bit_llrs, max_log, mi);
  axis_llrs(theta_hat_u.imag(), err_var, c, r.bit_llrs, max_log, mq);

  r.sym_logp.resize(c.m_points);
  double norm = -1e300;
  for (int label = 0; label < c.m_points; ++label) {
    int bi = label >> c.axis_bits;
    int bq = label & ((1 << c.axis_bits) - 1);
    r.sym_logp[label] = mi[bi] + mq[bq];
    norm = max_log ? std::max(norm, r.sym_logp[label])
                   : log_sum_exp(norm, r.sym_logp[label]);
  }
  for (double& v : r.sym_logp) v -= norm;
  return r;
}

double qam_symbol_error_prob(const Constellation& c, double err_var) {
  if (err_var <= 0.0) throw NumericError("err_var must be > 0");
  // Per-component noise std; axis decision margins are sqrt(alpha).
  double sigma_c = std::sqrt(err_var / 2.0);
  double q = 0.5 * std::erfc(std::sqrt(c.alpha) / sigma_c / std::sqrt(2.0));
  double per_axis = 2.0 * (1.0 - 1.0 / c.axis_levels) * q;
  return 1.0 - (1.0 - per_axis) * (1.0 - per_axis);
}

}  // namespace cofarq
