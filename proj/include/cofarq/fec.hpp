#pragma once
// Rate-1/3 parallel-concatenated convolutional code with two (13,15) octal
// recursive systematic constituents (memory 3), both trellises terminated,
// seeded pseudorandom interleaver, log-MAP iterative decoding, and
// CRC-16/CCITT packet checks.
//
// Coded layout: [systematic l | parity1 l | parity2 l | tail1 6 | tail2 6],
// l_coded = 3*l_info + 12. LLR convention everywhere: log p(0)/p(1).

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace cofarq {

struct CodecConfig {
  int l_info = 2020;  // FEC input length, CRC bits included
  int iterations = 8;
  std::uint64_t interleaver_seed = 0xC0DE5EEDull;
  bool max_log = false;        // drop the Jacobian correction entirely
  bool exact_maxstar = false;  // bypass the interpolation table (tests)
};

std::uint16_t crc16(std::span<const int> bits);
std::vector<int> crc_attach(std::span<const int> info);
bool crc_ok(std::span<const int> bits_with_crc);
inline constexpr int kCrcBits = 16;

class TurboCodec {
 public:
  explicit TurboCodec(const CodecConfig& cfg);

  int l_info() const { return cfg_.l_info; }
  int l_coded() const { return 3 * cfg_.l_info + 12; }
  const std::vector<int>& interleaver() const { return perm_; }
  const CodecConfig& config() const { return cfg_; }

  std::vector<int> encode(std::span<const int> info) const;

  struct DecodeResult {
    std::vector<int> bits;      // hard decisions, length l_info
    std::vector<double> llrs;   // a-posteriori LLRs, length l_info
    int iterations_run = 0;
  };

  // early_stop, if set, sees the current hard decisions after each iteration
  // and returns true to stop (CRC pass in the ARQ loop).
  DecodeResult decode(
      std::span<const double> coded_llrs,
      const std::function<bool(std::span<const int>)>& early_stop = {}) const;

  // Coded-bit index ranges carried by incremental-redundancy transmission k
  // (0-based): {sys}, {parity1}, {parity2 + tails}, {sys repeat}.
  std::vector<std::pair<int, int>> ir_slices(int tx_index) const;

 private:
  CodecConfig cfg_;
  std::vector<int> perm_;      // perm_[i]: input position feeding step i of RSC2
  std::vector<int> perm_inv_;
};

}  // namespace cofarq
