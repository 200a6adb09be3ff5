#pragma once
// Type-III hybrid-ARQ session driver. First transmission is a FEC codeword;
// retransmissions follow the selected mode:
//   CHASE       identical repetition, MRC combining (gamma = 0 path)
//   FPF         full-packet channel-output feedback, per-symbol linear
//               feedback coding on every position
//   PPF         feedback only for the selected symbol set; other positions
//               stay silent after round 1
//   PPF_PC      like PPF on the selected set, Chase repetition elsewhere
//   FPF_QUANT   FPF with the fed-back signal quantized per component
//   IR_BASELINE incremental redundancy from the rate-1/3 mother code
//
// Antenna schemes: SISO; MISO with codebook (or perfect-CSI) beamforming,
// reduced to an effective scalar channel; MIMO with per-round SVD and
// waterfilling, reduced to M parallel subchannels with symbols assigned
// round-robin. Channel gains, forward noise and feedback noise come from
// three per-session streams derived from one seed, so modes that behave
// identically are bit-identical and cross-mode comparisons share gains.

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "cofarq/fec.hpp"
#include "cofarq/lfc.hpp"
#include "cofarq/modem.hpp"
#include "cofarq/multiantenna.hpp"

namespace cofarq {

enum class HarqMode { kChase, kFpf, kPpf, kPpfPc, kFpfQuant, kIrBaseline };

enum class AntennaScheme { kSiso, kMisoBf, kMimoSvd };

enum class CsiQuant { kPerfect, kRvq, kFile, kNone };

const char* to_string(HarqMode mode);

struct HarqConfig {
  HarqMode mode = HarqMode::kChase;
  int n_max = 4;
  double rho = 1.0;  // linear
  double gamma = 0.0;
  double sigma2 = 0.0;
  double t_sym_frac = 0.5;  // PPF/PPF_PC symbol budget as a fraction of L
  int quant_bits = 5;       // FPF_QUANT bits per phase
  int m_points = 4;

  AntennaScheme antenna = AntennaScheme::kSiso;
  int mr = 1;
  int mt = 1;
  CsiQuant csi = CsiQuant::kPerfect;           // MISO beamformer source
  const BeamformingCodebook* codebook = nullptr;  // when csi is kRvq/kFile

  bool genie_ack = false;    // compare decoded bits instead of CRC
  bool ppf_reselect = false; // experimental: re-select I_sym on every NACK
  // Test hooks: suppress forward noise / force every channel gain to zero.
  bool noiseless_forward = false;
  bool zero_gains = false;
  const TurboCodec* codec = nullptr;
  std::ostream* trace = nullptr;  // optional per-round dump
  // Optional probe: per-round transmitted power sum over active symbols.
  std::vector<double>* power_out = nullptr;

  void validate() const;
  int subchannels() const {
    return antenna == AntennaScheme::kMimoSvd ? std::min(mr, mt) : 1;
  }
};

struct RoundRecord {
  int round = 0;
  double snr_post = 0.0;  // mean over symbols of the applied combiner's SNR
  bool crc_pass = false;
  // Quantiles of |llr| over info bits: min, q25, median, q75, max.
  double llr_abs_q[5] = {0, 0, 0, 0, 0};
};

struct SessionResult {
  bool success = false;
  int transmissions_used = 0;
  std::vector<RoundRecord> per_round;
};

SessionResult run_session(const HarqConfig& cfg, std::span<const int> payload,
                          std::uint64_t seed);

// Symbol set induced by the T least-reliable info bits, where T is the
// largest count whose symbol set still fits the budget. symbol_of[i] maps
// info bit i to its symbol position.
std::vector<int> ppf_select(std::span<const double> info_llrs,
                            int t_sym_budget, std::span<const int> symbol_of);

struct ThroughputEstimate {
  double tau = 0.0;
  double ci95 = 0.0;
  double fer = 0.0;
  long long transmissions = 0;
  long long successes = 0;
};

// tau = successes / transmissions, failed sessions consuming n_max rounds;
// 95% half-width by the delta method for the ratio estimator.
ThroughputEstimate throughput(std::span<const SessionResult> results,
                              int n_max);

// Bit positions (in coded order) carried by each modulated symbol, i.e. the
// modulation-side interleaving; shared by source and destination.
std::vector<int> channel_interleaver(int l_coded_padded, std::uint64_t seed);

}  // namespace cofarq
