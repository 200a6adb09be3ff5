#include "cofarq/harq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "cofarq/errors.hpp"

namespace cofarq {

namespace {

constexpr std::uint64_t kChanIlvSeed = 0x5A1ED11ull;

// Stream tags for the per-session substreams.
constexpr std::uint64_t kGainStream = 0xA1;
constexpr std::uint64_t kNoiseStream = 0xB2;
constexpr std::uint64_t kFeedbackStream = 0xC3;

double quantile(std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  double pos = q * (sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double f = pos - lo;
  return sorted[lo] * (1.0 - f) + sorted[hi] * f;
}

void fill_llr_quantiles(std::span<const double> llrs, RoundRecord& rec) {
  std::vector<double> mags(llrs.size());
  for (std::size_t i = 0; i < llrs.size(); ++i) mags[i] = std::abs(llrs[i]);
  std::sort(mags.begin(), mags.end());
  const double qs[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (int i = 0; i < 5; ++i) rec.llr_abs_q[i] = quantile(mags, qs[i]);
}

void dump_trace(std::ostream* os, const HarqConfig& cfg,
                const RoundRecord& rec) {
  if (!os) return;
  *os << "round=" << rec.round << " mode=" << to_string(cfg.mode)
      << " snr_post=" << rec.snr_post << " crc=" << (rec.crc_pass ? 1 : 0)
      << " llr_min_abs_quantiles=" << rec.llr_abs_q[0] << ','
      << rec.llr_abs_q[1] << ',' << rec.llr_abs_q[2] << ',' << rec.llr_abs_q[3]
      << ',' << rec.llr_abs_q[4] << '\n';
}

// A subchannel whose whole truncated gain history is zero (waterfilling may
// starve the weak eigenmode every round) carries no information: zero
// weights and infinite error variance make its LLRs exactly zero.
CombinerWeights safe_weights(const FeedbackCode& code, int k) {
  double energy = 0.0;
  for (int i = 0; i < k; ++i) energy += std::norm(code.gains[i]);
  if (energy < 1e-300) {
    CombinerWeights w;
    w.w = Eigen::VectorXcd::Zero(k);
    w.err_var = std::numeric_limits<double>::infinity();
    w.phi_sq = 1.0;
    return w;
  }
  return combiner_weights(code, k);
}

// Per-round effective scalar gains of the subchannels.
struct GainSource {
  const HarqConfig& cfg;
  Rng& rng;

  std::vector<cdouble> next_round() {
    if (cfg.zero_gains)
      return std::vector<cdouble>(cfg.subchannels(), cdouble{0.0, 0.0});
    switch (cfg.antenna) {
      case AntennaScheme::kSiso:
        return {rng.cnormal()};
      case AntennaScheme::kMisoBf: {
        Eigen::VectorXcd h(cfg.mt);
        for (int i = 0; i < cfg.mt; ++i) h(i) = rng.cnormal();
        Eigen::VectorXcd w;
        switch (cfg.csi) {
          case CsiQuant::kPerfect: w = perfect_csi_beamformer(h); break;
          case CsiQuant::kNone:
            w = Eigen::VectorXcd::Zero(cfg.mt);
            w(0) = 1.0;
            break;
          default: w = select_beamformer(h, *cfg.codebook).second; break;
        }
        return {cdouble{miso_effective(h, w, 0.0).lambda, 0.0}};
      }
      case AntennaScheme::kMimoSvd: {
        Eigen::MatrixXcd h(cfg.mr, cfg.mt);
        for (int i = 0; i < cfg.mr; ++i)
          for (int j = 0; j < cfg.mt; ++j) h(i, j) = rng.cnormal();
        SpatialDecomposition d = svd_waterfill(h, cfg.rho);
        std::vector<cdouble> g(cfg.subchannels());
        for (int m = 0; m < cfg.subchannels(); ++m)
          g[m] = cdouble{d.effective_gains(m), 0.0};
        return g;
      }
    }
    throw ConfigError("unknown antenna scheme");
  }
};

// Saturation range per component: optimal uniform-midrise loading factor for
// a Gaussian source times the component std of the fed-back r = y + n.
double quant_range_for(const HarqConfig& cfg) {
  static const double loading[6] = {0.0, 1.596, 1.991, 2.344, 2.680, 3.010};
  double lf = cfg.quant_bits <= 5 ? loading[cfg.quant_bits] : 4.0;
  return lf * std::sqrt((1.0 + cfg.rho + cfg.sigma2) / 2.0);
}

double effective_build_sigma2(const HarqConfig& cfg) {
  double s = cfg.sigma2;
  if (cfg.mode == HarqMode::kFpfQuant)
    s += quant_noise_var(cfg.quant_bits, quant_range_for(cfg));
  return s;
}

// Symbol classes for combining.
enum class SymClass : unsigned char { kLfc, kRepeat, kRoundOneOnly };

SessionResult run_ir_session(const HarqConfig& cfg,
                             std::span<const int> info_with_crc,
                             const std::vector<int>& coded, Rng& gain_rng,
                             Rng& noise_rng);

}  // namespace

const char* to_string(HarqMode mode) {
  switch (mode) {
    case HarqMode::kChase: return "CHASE";
    case HarqMode::kFpf: return "FPF";
    case HarqMode::kPpf: return "PPF";
    case HarqMode::kPpfPc: return "PPF_PC";
    case HarqMode::kFpfQuant: return "FPF_QUANT";
    case HarqMode::kIrBaseline: return "IR_BASELINE";
  }
  return "?";
}

void HarqConfig::validate() const {
  if (!codec) throw ConfigError("harq: codec not set");
  if (n_max < 1) throw ConfigError("harq: n_max must be >= 1");
  if (rho <= 0.0) throw ConfigError("harq: rho must be > 0");
  if (gamma > 1.0 || (gamma < 0.0 && gamma != -1.0))
    throw ConfigError("harq: gamma must be in [0,1] or -1 for auto");
  if (sigma2 < 0.0) throw ConfigError("harq: sigma2 must be >= 0");
  if (m_points != 4 && m_points != 16 && m_points != 64)
    throw ConfigError("harq: constellation must be 4, 16 or 64 points");
  if (mr < 1 || mt < 1) throw ConfigError("harq: antenna dims must be >= 1");
  if ((mode == HarqMode::kPpf || mode == HarqMode::kPpfPc) &&
      (t_sym_frac < 0.0 || t_sym_frac > 1.0))
    throw ConfigError("harq: t_sym_frac must be in [0,1]");
  if (mode == HarqMode::kFpfQuant && (quant_bits < 1 || quant_bits > 16))
    throw ConfigError("harq: quant_bits must be in [1,16]");
  if (mode == HarqMode::kIrBaseline && n_max > 4)
    throw ConfigError("harq: IR baseline defines at most 4 transmissions");
  if (antenna == AntennaScheme::kMisoBf) {
    if (mt < 2) throw ConfigError("harq: MISO needs mt >= 2");
    if ((csi == CsiQuant::kRvq || csi == CsiQuant::kFile) && !codebook)
      throw ConfigError("harq: quantized CSI needs a codebook");
    if (codebook && codebook->mt != mt)
      throw ConfigError("harq: codebook dimension mismatch");
  }
}

std::vector<int> channel_interleaver(int l_coded_padded, std::uint64_t seed) {
  std::vector<int> perm(l_coded_padded);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 gen(seed);
  for (int i = l_coded_padded - 1; i > 0; --i) {
    auto j = static_cast<int>(gen() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

std::vector<int> ppf_select(std::span<const double> info_llrs,
                            int t_sym_budget, std::span<const int> symbol_of) {
  if (symbol_of.size() != info_llrs.size())
    throw DimensionError("ppf_select: membership map size mismatch");
  std::vector<int> order(info_llrs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double ma = std::abs(info_llrs[a]), mb = std::abs(info_llrs[b]);
    if (ma != mb) return ma < mb;
    return a < b;
  });
  std::set<int> sel;
  for (int i : order) {
    int s = symbol_of[i];
    if (sel.count(s)) continue;
    if (static_cast<int>(sel.size()) >= t_sym_budget) break;
    sel.insert(s);
  }
  return {sel.begin(), sel.end()};
}

ThroughputEstimate throughput(std::span<const SessionResult> results,
                              int n_max) {
  if (results.empty()) throw ConfigError("throughput: no results");
  ThroughputEstimate e;
  const double n = static_cast<double>(results.size());
  double sum_s = 0.0, sum_t = 0.0, sum_ss = 0.0, sum_tt = 0.0, sum_st = 0.0;
  for (const SessionResult& r : results) {
    double s = r.success ? 1.0 : 0.0;
    double t = r.success ? r.transmissions_used : n_max;
    sum_s += s;
    sum_t += t;
    sum_ss += s * s;
    sum_tt += t * t;
    sum_st += s * t;
    e.transmissions += static_cast<long long>(t);
    e.successes += r.success ? 1 : 0;
  }
  e.tau = sum_s / sum_t;
  e.fer = 1.0 - sum_s / n;
  // Delta method for the ratio of means.
  double mean_t = sum_t / n;
  double var_s = sum_ss / n - (sum_s / n) * (sum_s / n);
  double var_t = sum_tt / n - mean_t * mean_t;
  double cov = sum_st / n - (sum_s / n) * mean_t;
  double var_tau = (var_s - 2.0 * e.tau * cov + e.tau * e.tau * var_t) /
                   (n * mean_t * mean_t);
  e.ci95 = 1.96 * std::sqrt(std::max(0.0, var_tau));
  return e;
}

SessionResult run_session(const HarqConfig& cfg, std::span<const int> payload,
                          std::uint64_t seed) {
  cfg.validate();
  const TurboCodec& codec = *cfg.codec;
  const int l = codec.l_info();
  if (static_cast<int>(payload.size()) != l - kCrcBits)
    throw DimensionError("run_session: payload must be l_info - 16 bits");

  std::vector<int> info = crc_attach(payload);
  std::vector<int> coded = codec.encode(info);

  Rng gain_rng(derive_seed(seed, {kGainStream}));
  Rng noise_rng(derive_seed(seed, {kNoiseStream}));
  Rng fb_rng(derive_seed(seed, {kFeedbackStream}));

  if (cfg.mode == HarqMode::kIrBaseline)
    return run_ir_session(cfg, info, coded, gain_rng, noise_rng);

  const Constellation con = build_constellation(cfg.m_points, cfg.rho);
  const int bps = con.bits_per_sym;
  const int lc = static_cast<int>(coded.size());
  const int pad = (bps - lc % bps) % bps;
  const int lp = lc + pad;
  const int l_sym = lp / bps;
  const int m_sub = cfg.subchannels();

  const std::vector<int> perm = channel_interleaver(lp, kChanIlvSeed);
  std::vector<int> slot_of(lp);  // coded position -> slot
  for (int p = 0; p < lp; ++p) slot_of[perm[p]] = p;

  std::vector<int> tx_bits(lp, 0);
  for (int p = 0; p < lp; ++p)
    if (perm[p] < lc) tx_bits[p] = coded[perm[p]];
  std::vector<cdouble> theta = map_bits(tx_bits, con);

  // Info bit i -> symbol index (for PPF selection).
  std::vector<int> symbol_of(l);
  for (int i = 0; i < l; ++i) symbol_of[i] = slot_of[i] / bps;

  const double sig_build = effective_build_sigma2(cfg);
  const double gamma =
      cfg.mode == HarqMode::kChase
          ? 0.0
          : (cfg.gamma == -1.0
                 ? (sig_build == 0.0 ? 1.0
                                     : optimize_gamma(cfg.rho, sig_build,
                                                      cfg.n_max))
                 : cfg.gamma);
  const bool uses_feedback = cfg.mode != HarqMode::kChase && gamma > 0.0;
  const double quant_range = quant_range_for(cfg);

  std::vector<cdouble> x_cur = theta;
  // Flat observation store: ys[j*n_max + r] is symbol j's r-th observation.
  std::vector<cdouble> ys(static_cast<std::size_t>(l_sym) * cfg.n_max);
  std::vector<int> obs_count(l_sym, 0);
  std::vector<std::vector<cdouble>> gains(m_sub);

  std::vector<SymClass> sym_class(l_sym, SymClass::kLfc);
  std::vector<int> selected;  // PPF symbol set, fixed after round 1
  bool selection_done = false;

  GainSource gsrc{cfg, gain_rng};
  SessionResult res;
  std::vector<double> slot_llrs;
  std::vector<double> coded_llrs(codec.l_coded());

  auto is_active = [&](int j, int round) {
    return round == 1 || sym_class[j] != SymClass::kRoundOneOnly;
  };

  for (int round = 1; round <= cfg.n_max; ++round) {
    std::vector<cdouble> g = gsrc.next_round();
    for (int m = 0; m < m_sub; ++m) gains[m].push_back(g[m]);

    // Transmit active symbols.
    for (int j = 0; j < l_sym; ++j) {
      if (!is_active(j, round)) continue;
      cdouble y = apply_forward(x_cur[j], g[j % m_sub], noise_rng,
                                !cfg.noiseless_forward);
      ys[static_cast<std::size_t>(j) * cfg.n_max + obs_count[j]] = y;
      ++obs_count[j];
    }
    if (cfg.power_out && static_cast<int>(cfg.power_out->size()) < round) {
      double p = 0.0;
      for (int j = 0; j < l_sym; ++j)
        if (is_active(j, round)) p += std::norm(x_cur[j]);
      cfg.power_out->push_back(p);
    }

    // Per-subchannel combining weights for each class in play.
    std::vector<CombinerWeights> w_lfc(m_sub), w_rep(m_sub), w_r1(m_sub);
    for (int m = 0; m < m_sub; ++m) {
      FeedbackCode code =
          build_code(gains[m], cfg.rho, gamma, sig_build);
      w_lfc[m] = safe_weights(code, round);
      if (cfg.mode == HarqMode::kPpfPc) {
        FeedbackCode rep = build_code(gains[m], cfg.rho, 0.0, 0.0);
        w_rep[m] = safe_weights(rep, round);
      }
      if (cfg.mode == HarqMode::kPpf) w_r1[m] = safe_weights(code, 1);
    }

    // Estimate, demap, decode.
    double snr_acc = 0.0;
    slot_llrs.clear();
    slot_llrs.reserve(static_cast<std::size_t>(lp));
    for (int j = 0; j < l_sym; ++j) {
      const CombinerWeights* w = &w_lfc[j % m_sub];
      if (sym_class[j] == SymClass::kRepeat) w = &w_rep[j % m_sub];
      if (sym_class[j] == SymClass::kRoundOneOnly) w = &w_r1[j % m_sub];
      int k = std::min<int>(obs_count[j], static_cast<int>(w->w.size()));
      cdouble est{0.0, 0.0};
      const cdouble* yj = &ys[static_cast<std::size_t>(j) * cfg.n_max];
      for (int r = 0; r < k; ++r) est += w->w(r) * yj[r];
      snr_acc += cfg.rho / w->err_var;
      llr_demap_bits(est, w->err_var, con, slot_llrs);
    }
    for (int c = 0; c < lc; ++c) coded_llrs[c] = slot_llrs[slot_of[c]];

    auto stop = [&](std::span<const int> bits) {
      if (cfg.genie_ack)
        return std::equal(bits.begin(), bits.end(), info.begin());
      return crc_ok(bits);
    };
    TurboCodec::DecodeResult dec = codec.decode(coded_llrs, stop);
    bool pass = stop(dec.bits);

    RoundRecord rec;
    rec.round = round;
    rec.snr_post = snr_acc / l_sym;
    rec.crc_pass = pass;
    fill_llr_quantiles(dec.llrs, rec);
    res.per_round.push_back(rec);
    dump_trace(cfg.trace, cfg, rec);

    if (pass) {
      res.success = true;
      res.transmissions_used = round;
      return res;
    }
    if (round == cfg.n_max) break;

    // PPF selection after the first decode.
    if ((cfg.mode == HarqMode::kPpf || cfg.mode == HarqMode::kPpfPc) &&
        (!selection_done || cfg.ppf_reselect)) {
      int budget = static_cast<int>(std::lround(cfg.t_sym_frac * l_sym));
      // A full budget means the whole packet is fed back, i.e. FPF.
      if (budget >= l_sym) {
        selected.resize(l_sym);
        std::iota(selected.begin(), selected.end(), 0);
      } else {
        selected = ppf_select(dec.llrs, budget, symbol_of);
      }
      SymClass other = cfg.mode == HarqMode::kPpf ? SymClass::kRoundOneOnly
                                                  : SymClass::kRepeat;
      std::fill(sym_class.begin(), sym_class.end(), other);
      for (int s : selected) sym_class[s] = SymClass::kLfc;
      selection_done = true;
    }

    // Source-side update from channel-output feedback.
    if (uses_feedback) {
      for (int j = 0; j < l_sym; ++j) {
        if (sym_class[j] != SymClass::kLfc) continue;
        cdouble y = ys[static_cast<std::size_t>(j) * cfg.n_max +
                       obs_count[j] - 1];
        cdouble r = apply_feedback(y, cfg.sigma2, fb_rng);
        if (cfg.mode == HarqMode::kFpfQuant)
          r = quantize_coi(r, cfg.quant_bits, quant_range);
        cdouble gain = gains[j % m_sub].back();
        cdouble residual = feedback_residual(r, gain, x_cur[j]);
        x_cur[j] =
            encode_step(x_cur[j], gain, residual, cfg.rho, gamma, sig_build);
      }
    }
  }

  res.success = false;
  res.transmissions_used = cfg.n_max;
  return res;
}

namespace {

SessionResult run_ir_session(const HarqConfig& cfg,
                             std::span<const int> info_with_crc,
                             const std::vector<int>& coded, Rng& gain_rng,
                             Rng& noise_rng) {
  const TurboCodec& codec = *cfg.codec;
  const Constellation con = build_constellation(cfg.m_points, cfg.rho);
  const int bps = con.bits_per_sym;
  const int m_sub = cfg.subchannels();

  std::vector<double> acc_llr(codec.l_coded(), 0.0);
  GainSource gsrc{cfg, gain_rng};
  SessionResult res;
  std::vector<double> llrs;

  for (int round = 1; round <= std::min(cfg.n_max, 4); ++round) {
    std::vector<cdouble> g = gsrc.next_round();

    // Collect this transmission's coded positions.
    std::vector<int> positions;
    for (auto [lo, hi] : codec.ir_slices(round - 1))
      for (int c = lo; c < hi; ++c) positions.push_back(c);
    std::vector<int> bits;
    bits.reserve(positions.size());
    for (int c : positions) bits.push_back(coded[c]);
    while (bits.size() % bps != 0) bits.push_back(0);
    std::vector<cdouble> syms = map_bits(bits, con);

    double snr_acc = 0.0;
    int snr_n = 0;
    llrs.clear();
    for (std::size_t j = 0; j < syms.size(); ++j) {
      cdouble gain = g[j % m_sub];
      cdouble y = apply_forward(syms[j], gain, noise_rng,
                                !cfg.noiseless_forward);
      double g2 = std::norm(gain);
      if (g2 < 1e-300) {
        for (int b = 0; b < bps; ++b) llrs.push_back(0.0);
        continue;
      }
      cdouble est = std::conj(gain) * y / g2;
      llr_demap_bits(est, 1.0 / g2, con, llrs);
      snr_acc += cfg.rho * g2;
      ++snr_n;
    }
    for (std::size_t i = 0; i < positions.size(); ++i)
      acc_llr[positions[i]] += llrs[i];

    auto stop = [&](std::span<const int> bits_hat) {
      if (cfg.genie_ack)
        return std::equal(bits_hat.begin(), bits_hat.end(),
                          info_with_crc.begin());
      return crc_ok(bits_hat);
    };
    TurboCodec::DecodeResult dec = codec.decode(acc_llr, stop);
    bool pass = stop(dec.bits);

    RoundRecord rec;
    rec.round = round;
    rec.snr_post = snr_n ? snr_acc / snr_n : 0.0;
    rec.crc_pass = pass;
    fill_llr_quantiles(dec.llrs, rec);
    res.per_round.push_back(rec);
    dump_trace(cfg.trace, cfg, rec);

    if (pass) {
      res.success = true;
      res.transmissions_used = round;
      return res;
    }
  }
  res.success = false;
  res.transmissions_used = cfg.n_max;
  return res;
}

}  // namespace

}  // namespace cofarq
