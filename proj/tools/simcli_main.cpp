// Command line front end: run spec-file experiments, tune the feedback gain,
// and sanity-check beamforming codebook files.
#include <cmath>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "cofarq/errors.hpp"
#include "cofarq/lfc.hpp"
#include "cofarq/multiantenna.hpp"
#include "cofarq/sim.hpp"

namespace {

int cmd_simulate(const std::string& spec_path, const std::string& out,
                 int workers, long long seed, const std::string& format) {
  cofarq::ExperimentSpec spec = cofarq::parse_spec_file(spec_path);
  if (workers >= 0) spec.workers = workers;
  if (seed >= 0) spec.master_seed = static_cast<std::uint64_t>(seed);
  cofarq::ExperimentResult result = cofarq::run_experiment(spec);
  cofarq::write_results(result, out, format);
  std::printf("wrote %zu rows to %s\n", result.rows.size(), out.c_str());
  return 0;
}

int cmd_gamma_opt(double rho_db, double sigma2, int n) {
  double rho = cofarq::db_to_linear(rho_db);
  double gamma = cofarq::optimize_gamma(rho, sigma2, n);
  double snr = cofarq::awgn_post_snr(gamma, rho, sigma2, n);
  double base = cofarq::awgn_post_snr(0.0, rho, sigma2, n);
  std::printf("rho_db=%g sigma2=%g n=%d\n", rho_db, sigma2, n);
  std::printf("gamma_opt=%.10g\n", gamma);
  std::printf("post_snr_db=%.10g (no-feedback %.10g)\n",
              cofarq::linear_to_db(snr), cofarq::linear_to_db(base));
  return 0;
}

int cmd_codebook_check(const std::string& path) {
  cofarq::BeamformingCodebook cb = cofarq::load_codebook(path);
  double d = cofarq::min_chordal_distance(cb);
  std::printf("mt=%d b=%d vectors=%zu\n", cb.mt, cb.b, cb.vectors.size());
  std::printf("min_chordal_distance=%.10g\n", d);
  if (cb.declared_min_dist > 0.0) {
    std::printf("declared_min_dist=%.10g\n", cb.declared_min_dist);
    if (std::abs(d - cb.declared_min_dist) > 1e-6)
      throw cofarq::ConfigError("codebook min distance does not match the "
                                "declared value");
  }
  std::printf("ok\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linear-feedback HARQ link simulator"};
  app.require_subcommand(1);

  std::string spec_path, out = "results.csv", format = "csv";
  int workers = -1;
  long long seed = -1;
  CLI::App* sim = app.add_subcommand("simulate", "run an experiment spec");
  sim->add_option("spec", spec_path, "experiment spec file")->required();
  sim->add_option("--out", out, "output table path");
  sim->add_option("--workers", workers, "worker threads (0 = all cores)");
  sim->add_option("--seed", seed, "override master seed");
  sim->add_option("--format", format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  double rho_db = 0.0, sigma2 = 0.0;
  int n = 4;
  CLI::App* gopt = app.add_subcommand("gamma-opt",
                                      "optimize the feedback gain");
  gopt->add_option("--rho", rho_db, "forward SNR in dB")->required();
  gopt->add_option("--sigma2", sigma2, "feedback noise variance")->required();
  gopt->add_option("--n", n, "block length");

  std::string cb_path;
  CLI::App* cbc = app.add_subcommand("codebook-check",
                                     "validate a codebook file");
  cbc->add_option("file", cb_path, "codebook file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(spec_path, out, workers, seed, format);
    if (gopt->parsed()) return cmd_gamma_opt(rho_db, sigma2, n);
    if (cbc->parsed()) return cmd_codebook_check(cb_path);
  } catch (const cofarq::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const cofarq::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
