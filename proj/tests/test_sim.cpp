#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "cofarq/errors.hpp"
#include "cofarq/sim.hpp"

using namespace cofarq;

namespace {

const char* kFullSpec = R"(# full grammar exercise
[experiment]
kind = throughput
rho_db = 0, 2
packets_per_point = 2
master_seed = 9
workers = 1
n_max = 3
genie_ack = true

[fec]
l_info = 52
iterations = 2

[antenna]
scheme = siso

[mode plain]
type = CHASE

[mode fed]
type = FPF
constellation = 16qam
gamma = 0.5
sigma2 = 0.25

[mode partial]
type = PPF_PC
t_sym_frac = 0.25

[mode coarse]
type = FPF_QUANT
quant_bits = 3
)";

std::string tiny_throughput_spec(int workers) {
  std::ostringstream os;
  os << "[experiment]\nkind = throughput\nrho_db = -2 4\n"
     << "packets_per_point = 3\nmaster_seed = 11\nworkers = " << workers
     << "\nn_max = 2\n[fec]\nl_info = 52\niterations = 2\n"
     << "[mode plain]\ntype = CHASE\n[mode fed]\ntype = FPF\ngamma = 1\n";
  return os.str();
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("spec grammar covers every section and key") {
  ExperimentSpec spec = parse_spec_text(kFullSpec, "cfg");
  CHECK(spec.kind == ExperimentKind::kThroughput);
  REQUIRE(spec.rho_db.size() == 2u);
  CHECK(spec.rho_db[0] == 0.0);
  CHECK(spec.rho_db[1] == 2.0);
  CHECK(spec.packets_per_point == 2);
  CHECK(spec.master_seed == 9);
  CHECK(spec.workers == 1);
  CHECK(spec.n_max == 3);
  CHECK(spec.genie_ack);
  CHECK(spec.l_info == 52);
  CHECK(spec.iterations == 2);
  CHECK(spec.antenna == AntennaScheme::kSiso);

  REQUIRE(spec.modes.size() == 4u);
  CHECK(spec.modes[0].name == "plain");
  CHECK(spec.modes[0].mode == HarqMode::kChase);
  CHECK(spec.modes[0].m_points == 4);
  CHECK(spec.modes[1].name == "fed");
  CHECK(spec.modes[1].mode == HarqMode::kFpf);
  CHECK(spec.modes[1].m_points == 16);
  CHECK(spec.modes[1].gamma == 0.5);
  CHECK(spec.modes[1].sigma2 == 0.25);
  CHECK(spec.modes[2].mode == HarqMode::kPpfPc);
  CHECK(spec.modes[2].t_sym_frac == 0.25);
  CHECK(spec.modes[3].mode == HarqMode::kFpfQuant);
  CHECK(spec.modes[3].quant_bits == 3);
}

TEST_CASE("miso and mimo antenna sections") {
  std::string text = R"([experiment]
kind = post_snr
rho_db = 0
packets_per_point = 4
[antenna]
scheme = miso_bf
mt = 2
csi = rvq
codebook_bits = 3
codebook_seed = 5
[mode m]
type = FPF
)";
  ExperimentSpec spec = parse_spec_text(text, "cfg");
  CHECK(spec.kind == ExperimentKind::kPostSnr);
  CHECK(spec.antenna == AntennaScheme::kMisoBf);
  CHECK(spec.mt == 2);
  CHECK(spec.csi == CsiQuant::kRvq);
  CHECK(spec.codebook_bits == 3);
  CHECK(spec.codebook_seed == 5);

  std::string mimo = R"([experiment]
kind = throughput
rho_db = 0
packets_per_point = 1
[antenna]
scheme = mimo_svd
mr = 2
mt = 2
[mode m]
type = CHASE
)";
  ExperimentSpec ms = parse_spec_text(mimo, "cfg");
  CHECK(ms.antenna == AntennaScheme::kMimoSvd);
  CHECK(ms.mr == 2);
  CHECK(ms.mt == 2);
}

TEST_CASE("parse errors carry origin and line") {
  using doctest::Contains;
  auto parse = [](const std::string& t) { return parse_spec_text(t, "cfg"); };

  CHECK_THROWS_WITH_AS(parse("[experiment]\nkind = throughput\nbogus = 1\n"),
                       Contains("cfg:3"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[experiment]\nkind = throughput\nbogus = 1\n"),
                       Contains("unknown key 'bogus'"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse("[experiment]\nkind = throughput\nrho_db = 0, x\n"),
      Contains("'x' is not a number"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[experiment]\nkind = banana\nrho_db = 0\n"),
                       Contains("unknown kind 'banana'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[fec]\nl_info = 52\n"),
                       Contains("missing [experiment]"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[experiment\nkind = throughput\n"),
                       Contains("unterminated section"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("key = 1\n"), Contains("outside any section"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse("[experiment]\nkind throughput\n"),
                       Contains("expected 'key = value'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[bogus]\nx = 1\n"),
                       Contains("unknown section 'bogus'"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse("[experiment]\nkind = throughput\nrho_db = 0\n[mode m]\ntype = "
            "WAT\n"),
      Contains("unknown mode type 'WAT'"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse("[experiment]\nkind = throughput\nrho_db = 0\n[mode m]\ntype = "
            "CHASE\nconstellation = 8\n"),
      Contains("unknown constellation"), ConfigError);

  // Kind-specific shape requirements.
  std::string pe_no_n = "[experiment]\nkind = pe_vs_n\nrho_db = 0\n"
                        "[scheme s]\ncsi = perfect\n";
  CHECK_THROWS_WITH_AS(parse(pe_no_n), Contains("needs n_list"), ConfigError);
  std::string pe_two_rho =
      "[experiment]\nkind = pe_vs_n\nrho_db = 0 4\nn_list = 1 2\n"
      "[scheme s]\ncsi = perfect\n";
  CHECK_THROWS_WITH_AS(parse(pe_two_rho), Contains("exactly one rho_db"),
                       ConfigError);
  std::string no_modes = "[experiment]\nkind = throughput\nrho_db = 0\n";
  CHECK_THROWS_WITH_AS(parse(no_modes), Contains("at least one mode"),
                       ConfigError);
}

TEST_CASE("missing spec file raises IoError") {
  CHECK_THROWS_AS(parse_spec_file("/nonexistent/exp.cfg"), IoError);
}

TEST_CASE("tiny throughput experiment produces well-formed rows") {
  ExperimentSpec spec = parse_spec_text(tiny_throughput_spec(1), "cfg");
  ExperimentResult res = run_experiment(spec);
  CHECK(res.kind == ExperimentKind::kThroughput);
  REQUIRE(res.rows.size() == 4u);  // 2 rho x 2 modes
  for (const ResultRow& row : res.rows) {
    CHECK((row.mode == "plain" || row.mode == "fed"));
    CHECK((row.rho_db == -2.0 || row.rho_db == 4.0));
    CHECK(row.constellation == "qpsk");
    CHECK(row.antennas == "1x1");
    CHECK(row.packets == 3);
    CHECK(row.seed == 11);
    CHECK(row.tau >= 0.0);
    CHECK(row.tau <= 1.0);
    CHECK(row.fer >= 0.0);
    CHECK(row.fer <= 1.0);
    CHECK(row.round_snr_mean.size() == 2u);
  }
}

TEST_CASE("results do not depend on the worker count") {
  ExperimentResult one =
      run_experiment(parse_spec_text(tiny_throughput_spec(1), "cfg"));
  ExperimentResult four =
      run_experiment(parse_spec_text(tiny_throughput_spec(4), "cfg"));
  CHECK(results_csv(one) == results_csv(four));
}

TEST_CASE("csv writer emits the table and a json sidecar") {
  ExperimentResult res =
      run_experiment(parse_spec_text(tiny_throughput_spec(2), "cfg"));
  auto csv_path = temp_path("sim_out.csv");
  write_results(res, csv_path.string(), "csv");

  std::ifstream in(csv_path);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "mode,rho_db,constellation,antennas,tau,tau_ci95,fer,"
                  "packets,seed");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4);

  std::ifstream meta(csv_path.string() + ".meta.json");
  REQUIRE(meta.good());
  nlohmann::json j = nlohmann::json::parse(meta);
  CHECK(j.contains("spec"));
  CHECK(j["spec"]["master_seed"].get<std::uint64_t>() == 11);

  SUBCASE("json format is self-describing") {
    auto json_path = temp_path("sim_out.json");
    write_results(res, json_path.string(), "json");
    std::ifstream jin(json_path);
    nlohmann::json full = nlohmann::json::parse(jin);
    CHECK(full.contains("rows"));
    CHECK(full["rows"].size() == 4u);
  }
  SUBCASE("unknown format and empty results are rejected") {
    CHECK_THROWS_AS(write_results(res, temp_path("x.bin").string(), "xml"),
                    ConfigError);
    ExperimentResult empty;
    empty.spec = res.spec;
    auto refuse = temp_path("must_not_exist.csv");
    std::filesystem::remove(refuse);
    CHECK_THROWS_AS(write_results(empty, refuse.string(), "csv"),
                    ConfigError);
    CHECK(!std::filesystem::exists(refuse));
  }
}

TEST_CASE("post_snr of the no-feedback mode matches accumulation") {
  std::string text = R"([experiment]
kind = post_snr
rho_db = 3
packets_per_point = 1500
master_seed = 4
workers = 1
n_max = 4
[mode plain]
type = CHASE
)";
  ExperimentResult res = run_experiment(parse_spec_text(text, "cfg"));
  REQUIRE(res.rows.size() == 1u);  // one row per (mode, rho) at n = n_max
  const ResultRow& row = res.rows[0];
  CHECK(row.n == 4);
  CHECK(row.packets == 1500);
  // Repetition over n unit-power Rayleigh rounds averages to n*rho.
  double want_db = linear_to_db(row.n * db_to_linear(3.0));
  CHECK(std::abs(row.mean_snr_db - want_db) < 0.3);
}

TEST_CASE("pe_vs_n orders the beamforming schemes") {
  std::string text = R"([experiment]
kind = pe_vs_n
rho_db = 0
n_list = 1 2 3
packets_per_point = 2000
master_seed = 6
workers = 1
[antenna]
scheme = miso_bf
mt = 2
[scheme ideal]
csi = perfect
[scheme open_loop]
csi = none
)";
  ExperimentResult res = run_experiment(parse_spec_text(text, "cfg"));
  REQUIRE(res.rows.size() == 6u);
  auto pe_of = [&](const std::string& scheme, int n) {
    for (const ResultRow& row : res.rows)
      if (row.mode == scheme && row.n == n) return row.pe;
    REQUIRE(false);
    return 0.0;
  };
  for (int n : {1, 2, 3}) {
    CHECK(pe_of("ideal", n) <= pe_of("open_loop", n));
    CHECK(pe_of("ideal", n) >= 0.0);
    CHECK(pe_of("open_loop", n) <= 1.0);
  }
  // More rounds help both schemes.
  CHECK(pe_of("ideal", 3) < pe_of("ideal", 1));
  CHECK(pe_of("open_loop", 3) < pe_of("open_loop", 1));
}

TEST_CASE("decibel helpers") {
  CHECK(db_to_linear(10.0) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(db_to_linear(0.0) == 1.0);
  CHECK(linear_to_db(db_to_linear(-7.3)) == doctest::Approx(-7.3).epsilon(1e-12));
}

}  // TEST_SUITE
