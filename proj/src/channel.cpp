#include "cofarq/channel.hpp"

#include <cmath>

#include "cofarq/errors.hpp"

namespace cofarq {

ChannelTrace sample_trace(const ChannelConfig& cfg, Rng& rng) {
  if (cfg.mr < 1 || cfg.mt < 1)
    throw ConfigError("antenna dims must be >= 1");
  if (cfg.n_max < 1) throw ConfigError("n_max must be >= 1");
  if (cfg.sigma2 < 0.0) throw ConfigError("sigma2 must be >= 0");

  ChannelTrace t;
  t.sigma2 = cfg.sigma2;
  t.n_max = cfg.n_max;
  t.gains.reserve(cfg.n_max);
  for (int k = 0; k < cfg.n_max; ++k) {
    Eigen::MatrixXcd h(cfg.mr, cfg.mt);
    for (int i = 0; i < cfg.mr; ++i)
      for (int j = 0; j < cfg.mt; ++j) h(i, j) = rng.cnormal();
    t.gains.push_back(std::move(h));
  }
  return t;
}

cdouble apply_forward(cdouble x, cdouble h, Rng& rng, bool add_noise) {
  cdouble y = h * x;
  if (add_noise) y += rng.cnormal();
  return y;
}

Eigen::VectorXcd apply_forward(const Eigen::VectorXcd& x,
                               const Eigen::MatrixXcd& h, Rng& rng,
                               bool add_noise) {
  if (h.cols() != x.size())
    throw DimensionError("apply_forward: h is " + std::to_string(h.rows()) +
                         "x" + std::to_string(h.cols()) + " but x has " +
                         std::to_string(x.size()) + " entries");
  Eigen::VectorXcd y = h * x;
  if (add_noise)
    for (int i = 0; i < y.size(); ++i) y(i) += rng.cnormal();
  return y;
}

cdouble apply_feedback(cdouble y, double sigma2, Rng& rng) {
  if (sigma2 < 0.0) throw ConfigError("sigma2 must be >= 0");
  if (sigma2 == 0.0) return y;
  return y + std::sqrt(sigma2) * rng.cnormal();
}

Eigen::VectorXcd apply_feedback(const Eigen::VectorXcd& y, double sigma2,
                                Rng& rng) {
  if (sigma2 < 0.0) throw ConfigError("sigma2 must be >= 0");
  if (sigma2 == 0.0) return y;
  Eigen::VectorXcd r = y;
  double s = std::sqrt(sigma2);
  for (int i = 0; i < r.size(); ++i) r(i) += s * rng.cnormal();
  return r;
}

namespace {

double quantize_component(double v, int levels, double step, double range) {
  // Midrise: reconstruction points at +-step/2, +-3step/2, ...
  double idx = std::floor(v / step);
  double lo = -static_cast<double>(levels) / 2.0;
  double hi = static_cast<double>(levels) / 2.0 - 1.0;
  idx = std::min(std::max(idx, lo), hi);
  double out = (idx + 0.5) * step;
  // Guard against FP drift past the saturation rails.
  return std::min(std::max(out, -range + step / 2.0), range - step / 2.0);
}

}  // namespace

cdouble quantize_coi(cdouble y, int bits_per_phase, double range) {
  if (bits_per_phase < 1) throw ConfigError("bits_per_phase must be >= 1");
  if (range <= 0.0) throw ConfigError("quantizer range must be > 0");
  int levels = 1 << bits_per_phase;
  double step = 2.0 * range / static_cast<double>(levels);
  return {quantize_component(y.real(), levels, step, range),
          quantize_component(y.imag(), levels, step, range)};
}

}  // namespace cofarq
