#include "cofarq/fec.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "cofarq/errors.hpp"

namespace cofarq {

std::uint16_t crc16(std::span<const int> bits) {
  // CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, MSB-first, no reflection.
  std::uint16_t crc = 0xFFFF;
  for (int b : bits) {
    crc ^= static_cast<std::uint16_t>((b & 1) << 15);
    crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021)
                         : static_cast<std::uint16_t>(crc << 1);
  }
  return crc;
}

std::vector<int> crc_attach(std::span<const int> info) {
  std::vector<int> out(info.begin(), info.end());
  std::uint16_t c = crc16(info);
  for (int i = kCrcBits - 1; i >= 0; --i) out.push_back((c >> i) & 1);
  return out;
}

bool crc_ok(std::span<const int> bits_with_crc) {
  if (bits_with_crc.size() <= kCrcBits) return false;
  std::size_t n = bits_with_crc.size() - kCrcBits;
  std::uint16_t c = crc16(bits_with_crc.first(n));
  std::uint16_t stored = 0;
  for (std::size_t i = 0; i < kCrcBits; ++i)
    stored = static_cast<std::uint16_t>((stored << 1) |
                                        (bits_with_crc[n + i] & 1));
  return c == stored;
}

namespace {

// (13,15) octal RSC, memory 3: feedback 1+D^2+D^3, feedforward 1+D+D^3.
// State packs (d1,d2,d3) as (d1<<2)|(d2<<1)|d3, d1 most recent.
constexpr int kStates = 8;

struct Trellis {
  std::array<std::array<int, 2>, kStates> next;    // next[s][u]
  std::array<std::array<int, 2>, kStates> parity;  // parity[s][u]
  std::array<int, kStates> tail_input;             // u that drives a = 0
};

constexpr Trellis make_trellis() {
  Trellis t{};
  for (int s = 0; s < kStates; ++s) {
    int d1 = (s >> 2) & 1, d2 = (s >> 1) & 1, d3 = s & 1;
    for (int u = 0; u < 2; ++u) {
      int a = u ^ d2 ^ d3;
      t.next[s][u] = (a << 2) | (d1 << 1) | d2;
      t.parity[s][u] = a ^ d1 ^ d3;
    }
    t.tail_input[s] = d2 ^ d3;
  }
  return t;
}

constexpr Trellis kTrellis = make_trellis();

// Jacobian correction log1p(exp(-d)) through a linearly interpolated table;
// max interpolation error < 1e-5, invisible at BER level but ~5x faster than
// calling log1p/exp in the BCJR hot loop.
constexpr int kCorrSize = 1024;
constexpr double kCorrMax = 12.0;

struct CorrTable {
  std::array<double, kCorrSize + 1> v;
  CorrTable() {
    for (int i = 0; i <= kCorrSize; ++i)
      v[i] = std::log1p(std::exp(-kCorrMax * i / kCorrSize));
  }
};

const CorrTable kCorr;

enum class MaxStarMode { kTable, kExact, kMaxLog };

inline double maxstar(double a, double b, MaxStarMode mode) {
  double m = a > b ? a : b;
  if (mode == MaxStarMode::kMaxLog) return m;
  double d = std::abs(a - b);
  if (mode == MaxStarMode::kExact) return m + std::log1p(std::exp(-d));
  if (d >= kCorrMax) return m;
  double x = d * (kCorrSize / kCorrMax);
  int i = static_cast<int>(x);
  double f = x - i;
  return m + kCorr.v[i] + f * (kCorr.v[i + 1] - kCorr.v[i]);
}

constexpr double kNegInf = -1e300;

// One terminated-RSC soft-in/soft-out pass. sys/apr/par have length steps
// (= l + 3 with the tail); apr is zero on tail positions. Writes the l
// info-position APP LLRs to app_out.
void bcjr(std::span<const double> sys, std::span<const double> apr,
          std::span<const double> par, int l, MaxStarMode mode,
          std::span<double> app_out, std::vector<double>& alpha_buf) {
  const int steps = static_cast<int>(sys.size());
  alpha_buf.assign(static_cast<std::size_t>(steps + 1) * kStates, kNegInf);
  double* alpha = alpha_buf.data();
  alpha[0] = 0.0;

  for (int i = 0; i < steps; ++i) {
    const double* a = alpha + static_cast<std::size_t>(i) * kStates;
    double* an = alpha + static_cast<std::size_t>(i + 1) * kStates;
    // Branch metric: (sys+apr)*s_u/2 + par*s_v/2 with s_bit = 1-2*bit.
    double lu = 0.5 * (sys[i] + apr[i]);
    double lp = 0.5 * par[i];
    for (int s = 0; s < kStates; ++s) {
      if (a[s] == kNegInf) continue;
      for (int u = 0; u < 2; ++u) {
        double g = (u ? -lu : lu) + (kTrellis.parity[s][u] ? -lp : lp);
        double& dst = an[kTrellis.next[s][u]];
        double cand = a[s] + g;
        dst = dst == kNegInf ? cand : maxstar(dst, cand, mode);
      }
    }
    // Normalize to keep the recursion in range.
    double mx = kNegInf;
    for (int s = 0; s < kStates; ++s) mx = std::max(mx, an[s]);
    for (int s = 0; s < kStates; ++s)
      if (an[s] != kNegInf) an[s] -= mx;
  }

  std::array<double, kStates> beta;
  beta.fill(kNegInf);
  beta[0] = 0.0;  // terminated
  for (int i = steps - 1; i >= 0; --i) {
    const double* a = alpha + static_cast<std::size_t>(i) * kStates;
    double lu = 0.5 * (sys[i] + apr[i]);
    double lp = 0.5 * par[i];
    double num = kNegInf, den = kNegInf;
    std::array<double, kStates> beta_prev;
    beta_prev.fill(kNegInf);
    for (int s = 0; s < kStates; ++s) {
      for (int u = 0; u < 2; ++u) {
        int ns = kTrellis.next[s][u];
        if (beta[ns] == kNegInf) continue;
        double g = (u ? -lu : lu) + (kTrellis.parity[s][u] ? -lp : lp);
        double bp = g + beta[ns];
        beta_prev[s] =
            beta_prev[s] == kNegInf ? bp : maxstar(beta_prev[s], bp, mode);
        if (a[s] == kNegInf || i >= l) continue;
        double metric = a[s] + bp;
        double& acc = u ? den : num;
        acc = acc == kNegInf ? metric : maxstar(acc, metric, mode);
      }
    }
    if (i < l) app_out[i] = num - den;
    double mx = kNegInf;
    for (int s = 0; s < kStates; ++s) mx = std::max(mx, beta_prev[s]);
    for (int s = 0; s < kStates; ++s) {
      beta[s] = beta_prev[s] == kNegInf ? kNegInf : beta_prev[s] - mx;
    }
  }
}

void rsc_encode(std::span<const int> input, std::vector<int>& parity,
                std::vector<int>& tail_bits) {
  int s = 0;
  parity.clear();
  parity.reserve(input.size());
  for (int u : input) {
    parity.push_back(kTrellis.parity[s][u & 1]);
    s = kTrellis.next[s][u & 1];
  }
  tail_bits.clear();
  for (int i = 0; i < 3; ++i) {
    int u = kTrellis.tail_input[s];
    tail_bits.push_back(u);
    tail_bits.push_back(kTrellis.parity[s][u]);
    s = kTrellis.next[s][u];
  }
}

}  // namespace

TurboCodec::TurboCodec(const CodecConfig& cfg) : cfg_(cfg) {
  if (cfg_.l_info < 4) throw ConfigError("l_info must be >= 4");
  if (cfg_.iterations < 1) throw ConfigError("iterations must be >= 1");
  perm_.resize(cfg_.l_info);
  for (int i = 0; i < cfg_.l_info; ++i) perm_[i] = i;
  std::mt19937_64 gen(cfg_.interleaver_seed);
  for (int i = cfg_.l_info - 1; i > 0; --i) {
    auto j = static_cast<int>(gen() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm_[i], perm_[j]);
  }
  perm_inv_.resize(cfg_.l_info);
  for (int i = 0; i < cfg_.l_info; ++i) perm_inv_[perm_[i]] = i;
}

std::vector<int> TurboCodec::encode(std::span<const int> info) const {
  const int l = cfg_.l_info;
  if (static_cast<int>(info.size()) != l)
    throw DimensionError("encode: expected " + std::to_string(l) + " bits");

  std::vector<int> p1, p2, t1, t2;
  rsc_encode(info, p1, t1);
  std::vector<int> interleaved(l);
  for (int i = 0; i < l; ++i) interleaved[i] = info[perm_[i]];
  rsc_encode(interleaved, p2, t2);

  std::vector<int> out;
  out.reserve(l_coded());
  out.insert(out.end(), info.begin(), info.end());
  out.insert(out.end(), p1.begin(), p1.end());
  out.insert(out.end(), p2.begin(), p2.end());
  out.insert(out.end(), t1.begin(), t1.end());
  out.insert(out.end(), t2.begin(), t2.end());
  return out;
}

TurboCodec::DecodeResult TurboCodec::decode(
    std::span<const double> coded_llrs,
    const std::function<bool(std::span<const int>)>& early_stop) const {
  const int l = cfg_.l_info;
  if (static_cast<int>(coded_llrs.size()) != l_coded())
    throw DimensionError("decode: expected " + std::to_string(l_coded()) +
                         " LLRs");
  MaxStarMode mode = cfg_.max_log ? MaxStarMode::kMaxLog
                     : cfg_.exact_maxstar ? MaxStarMode::kExact
                                          : MaxStarMode::kTable;

  const int steps = l + 3;
  // Constituent 1 streams.
  std::vector<double> sys1(steps), par1(steps), apr1(steps, 0.0);
  // Constituent 2 streams (systematic picked through the interleaver).
  std::vector<double> sys2(steps), par2(steps), apr2(steps, 0.0);
  for (int i = 0; i < l; ++i) {
    sys1[i] = coded_llrs[i];
    par1[i] = coded_llrs[l + i];
    sys2[i] = coded_llrs[perm_[i]];
    par2[i] = coded_llrs[2 * l + i];
  }
  for (int i = 0; i < 3; ++i) {
    sys1[l + i] = coded_llrs[3 * l + 2 * i];
    par1[l + i] = coded_llrs[3 * l + 2 * i + 1];
    sys2[l + i] = coded_llrs[3 * l + 6 + 2 * i];
    par2[l + i] = coded_llrs[3 * l + 6 + 2 * i + 1];
  }

  std::vector<double> app1(l), app2(l), alpha_buf;
  DecodeResult res;
  res.bits.assign(l, 0);
  res.llrs.assign(l, 0.0);

  for (int it = 1; it <= cfg_.iterations; ++it) {
    bcjr(sys1, apr1, par1, l, mode, app1, alpha_buf);
    for (int i = 0; i < l; ++i) {
      double ext = app1[i] - sys1[i] - apr1[i];
      apr2[perm_inv_[i]] = ext;
    }
    bcjr(sys2, apr2, par2, l, mode, app2, alpha_buf);
    for (int i = 0; i < l; ++i) {
      double ext = app2[i] - sys2[i] - apr2[i];
      apr1[perm_[i]] = ext;
    }
    res.iterations_run = it;
    for (int i = 0; i < l; ++i) {
      // Decoder 2's APP is the freshest full posterior; map it back.
      res.llrs[i] = app2[perm_inv_[i]];
      res.bits[i] = res.llrs[i] < 0.0 ? 1 : 0;
    }
    if (early_stop && early_stop(res.bits)) break;
  }
  return res;
}

std::vector<std::pair<int, int>> TurboCodec::ir_slices(int tx_index) const {
  const int l = cfg_.l_info;
  switch (tx_index) {
    case 0: return {{0, l}};                       // systematic
    case 1: return {{l, 2 * l}};                   // parity 1
    case 2: return {{2 * l, 3 * l + 12}};          // parity 2 + tails
    case 3: return {{0, l}};                       // systematic repeat
    default: throw ConfigError("ir_slices: tx_index must be 0..3");
  }
}

}  // namespace cofarq
