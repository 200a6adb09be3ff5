#pragma once
// Experiment driver: spec files, seeded parallel Monte Carlo scheduling, and
// figure-ready result tables. Results are identical for any worker count:
// every session owns an RNG stream derived from
// (master_seed, rho_index, packet_index) - deliberately not the mode index,
// so curves compared across modes see identical channel draws - and
// aggregation runs in deterministic order.
//
// Spec grammar (INI-like): "[section]" or "[section name]" headers,
// "key = value" lines, "#" comments. Sections: [experiment], [fec],
// [antenna], repeatable [mode <name>] (throughput/post_snr kinds) and
// [scheme <name>] (pe_vs_n kind).

#include <cstdint>
#include <string>
#include <vector>

#include "cofarq/harq.hpp"

namespace cofarq {

enum class ExperimentKind { kThroughput, kPostSnr, kPeVsN };

struct ModeSpec {
  std::string name;
  HarqMode mode = HarqMode::kChase;
  int m_points = 4;
  double gamma = -1.0;  // -1 = auto (optimized for the build-time sigma2)
  double sigma2 = 0.0;
  double t_sym_frac = 0.5;
  int quant_bits = 5;
  // pe_vs_n scheme source of the beamformer.
  CsiQuant csi = CsiQuant::kPerfect;
  int codebook_bits = 2;
  std::uint64_t codebook_seed = 1;
  std::string codebook_file;
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::kThroughput;
  std::vector<double> rho_db;
  std::vector<int> n_list;  // pe_vs_n sweep; other kinds use n_max
  int packets_per_point = 1000;
  std::uint64_t master_seed = 1;
  int workers = 0;  // 0 = hardware concurrency
  int n_max = 4;
  bool genie_ack = false;

  int l_info = 2020;
  int iterations = 8;

  AntennaScheme antenna = AntennaScheme::kSiso;
  int mr = 1;
  int mt = 1;
  CsiQuant csi = CsiQuant::kPerfect;
  int codebook_bits = 2;
  std::uint64_t codebook_seed = 1;
  std::string codebook_file;

  int pe_m_points = 4;  // constellation for the pe_vs_n error curves

  std::vector<ModeSpec> modes;

  void validate() const;
};

ExperimentSpec parse_spec_text(const std::string& text,
                               const std::string& origin = "<string>");
ExperimentSpec parse_spec_file(const std::string& path);

struct ResultRow {
  std::string mode;
  double rho_db = 0.0;
  std::string constellation;
  std::string antennas;
  int n = 0;  // pe_vs_n / post_snr blocklength
  double tau = 0.0;
  double tau_ci95 = 0.0;
  double fer = 0.0;
  double mean_snr_db = 0.0;
  double pe = 0.0;
  long long packets = 0;
  std::uint64_t seed = 0;
  std::vector<double> round_snr_mean;  // per-round mean post SNR (linear)
  double wall_ms = 0.0;
};

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::kThroughput;
  ExperimentSpec spec;
  std::vector<ResultRow> rows;
};

ExperimentResult run_experiment(const ExperimentSpec& spec);

// format "csv" writes the table plus a <path>.meta.json sidecar with the
// full spec; "json" writes a single self-describing file.
void write_results(const ExperimentResult& result, const std::string& path,
                   const std::string& format = "csv");

std::string results_csv(const ExperimentResult& result);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double v) { return 10.0 * std::log10(v); }

}  // namespace cofarq
