#include "cofarq/sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cofarq/errors.hpp"

namespace cofarq {

namespace {

using json = nlohmann::json;

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct Section {
  std::string kind;
  std::string name;
  std::map<std::string, std::string> kv;
  std::map<std::string, int> lines;
  int line = 0;
};

std::vector<Section> tokenize(const std::string& text,
                              const std::string& origin) {
  std::vector<Section> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": unterminated section header");
      std::istringstream hs(t.substr(1, t.size() - 2));
      Section s;
      s.line = lineno;
      hs >> s.kind;
      std::string rest;
      std::getline(hs, rest);
      s.name = trim(rest);
      out.push_back(std::move(s));
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    if (out.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": key outside any section");
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": empty key or value");
    out.back().kv[key] = val;
    out.back().lines[key] = lineno;
  }
  return out;
}

class KvReader {
 public:
  KvReader(const Section& s, const std::string& origin)
      : s_(s), origin_(origin) {}

  ~KvReader() = default;

  bool has(const std::string& key) const { return s_.kv.count(key) > 0; }

  std::string str(const std::string& key, const std::string& def = "") {
    used_.insert(key);
    auto it = s_.kv.find(key);
    return it == s_.kv.end() ? def : it->second;
  }

  double num(const std::string& key, double def) {
    used_.insert(key);
    auto it = s_.kv.find(key);
    if (it == s_.kv.end()) return def;
    try {
      std::size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": '" + it->second + "' is not a number");
    }
  }

  long long integer(const std::string& key, long long def) {
    double v = num(key, static_cast<double>(def));
    auto r = static_cast<long long>(std::llround(v));
    if (static_cast<double>(r) != v)
      throw ConfigError(where(key) + ": expected an integer");
    return r;
  }

  bool flag(const std::string& key, bool def) {
    used_.insert(key);
    auto it = s_.kv.find(key);
    if (it == s_.kv.end()) return def;
    const std::string& v = it->second;
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError(where(key) + ": expected a boolean, got '" + v + "'");
  }

  // Items separated by commas and/or whitespace.
  std::vector<double> num_list(const std::string& key) {
    used_.insert(key);
    auto it = s_.kv.find(key);
    std::vector<double> out;
    if (it == s_.kv.end()) return out;
    std::string value = it->second;
    for (char& c : value)
      if (c == ',') c = ' ';
    std::istringstream is(value);
    std::string item;
    while (is >> item) {
      try {
        std::size_t pos = 0;
        double v = std::stod(item, &pos);
        if (pos != item.size()) throw std::invalid_argument("");
        out.push_back(v);
      } catch (const std::exception&) {
        throw ConfigError(where(key) + ": '" + item + "' is not a number");
      }
    }
    return out;
  }

  std::string where(const std::string& key) const {
    auto it = s_.lines.find(key);
    int line = it == s_.lines.end() ? s_.line : it->second;
    return origin_ + ":" + std::to_string(line);
  }

  void check_unknown() const {
    for (const auto& [k, v] : s_.kv)
      if (!used_.count(k))
        throw ConfigError(where(k) + ": unknown key '" + k + "' in [" +
                          s_.kind + "]");
  }

 private:
  const Section& s_;
  std::string origin_;
  std::set<std::string> used_;
};

HarqMode parse_mode(const std::string& v, const std::string& where) {
  if (v == "CHASE" || v == "chase") return HarqMode::kChase;
  if (v == "FPF" || v == "fpf") return HarqMode::kFpf;
  if (v == "PPF" || v == "ppf") return HarqMode::kPpf;
  if (v == "PPF_PC" || v == "ppf_pc") return HarqMode::kPpfPc;
  if (v == "FPF_QUANT" || v == "fpf_quant") return HarqMode::kFpfQuant;
  if (v == "IR" || v == "IR_BASELINE" || v == "ir") return HarqMode::kIrBaseline;
  throw ConfigError(where + ": unknown mode type '" + v + "'");
}

int parse_constellation(const std::string& v, const std::string& where) {
  if (v == "qpsk" || v == "QPSK" || v == "4") return 4;
  if (v == "16qam" || v == "16QAM" || v == "16") return 16;
  if (v == "64qam" || v == "64QAM" || v == "64") return 64;
  throw ConfigError(where + ": unknown constellation '" + v + "'");
}

std::string constellation_token(int m_points) {
  switch (m_points) {
    case 4: return "qpsk";
    case 16: return "16qam";
    case 64: return "64qam";
  }
  return "?";
}

CsiQuant parse_csi(const std::string& v, const std::string& where) {
  if (v == "perfect") return CsiQuant::kPerfect;
  if (v == "rvq") return CsiQuant::kRvq;
  if (v == "file" || v == "grassmannian") return CsiQuant::kFile;
  if (v == "none") return CsiQuant::kNone;
  throw ConfigError(where + ": unknown csi source '" + v + "'");
}

AntennaScheme parse_antenna(const std::string& v, const std::string& where) {
  if (v == "siso") return AntennaScheme::kSiso;
  if (v == "miso_bf") return AntennaScheme::kMisoBf;
  if (v == "mimo_svd") return AntennaScheme::kMimoSvd;
  throw ConfigError(where + ": unknown antenna scheme '" + v + "'");
}

}  // namespace

void ExperimentSpec::validate() const {
  if (packets_per_point < 1)
    throw ConfigError("spec: packets_per_point must be >= 1");
  if (modes.empty()) throw ConfigError("spec: at least one mode required");
  if (kind == ExperimentKind::kPeVsN) {
    if (n_list.empty()) throw ConfigError("spec: pe_vs_n needs n_list");
    if (rho_db.size() != 1)
      throw ConfigError("spec: pe_vs_n needs exactly one rho_db value");
  } else if (rho_db.empty()) {
    throw ConfigError("spec: rho_db sweep must not be empty");
  }
  if (n_max < 1) throw ConfigError("spec: n_max must be >= 1");
  if (l_info < 20) throw ConfigError("spec: l_info too small");
}

ExperimentSpec parse_spec_text(const std::string& text,
                               const std::string& origin) {
  ExperimentSpec spec;
  bool saw_experiment = false;
  for (const Section& s : tokenize(text, origin)) {
    KvReader r(s, origin);
    if (s.kind == "experiment") {
      saw_experiment = true;
      std::string kind = r.str("kind", "throughput");
      if (kind == "throughput") spec.kind = ExperimentKind::kThroughput;
      else if (kind == "post_snr") spec.kind = ExperimentKind::kPostSnr;
      else if (kind == "pe_vs_n") spec.kind = ExperimentKind::kPeVsN;
      else throw ConfigError(r.where("kind") + ": unknown kind '" + kind + "'");
      spec.rho_db = r.num_list("rho_db");
      for (double n : r.num_list("n_list"))
        spec.n_list.push_back(static_cast<int>(n));
      spec.packets_per_point =
          static_cast<int>(r.integer("packets_per_point", 1000));
      spec.master_seed =
          static_cast<std::uint64_t>(r.integer("master_seed", 1));
      spec.workers = static_cast<int>(r.integer("workers", 0));
      spec.n_max = static_cast<int>(r.integer("n_max", 4));
      spec.genie_ack = r.flag("genie_ack", false);
      if (r.has("constellation"))
        spec.pe_m_points =
            parse_constellation(r.str("constellation"), r.where("constellation"));
      r.check_unknown();
    } else if (s.kind == "fec") {
      spec.l_info = static_cast<int>(r.integer("l_info", 2020));
      spec.iterations = static_cast<int>(r.integer("iterations", 8));
      r.check_unknown();
    } else if (s.kind == "antenna") {
      spec.antenna = parse_antenna(r.str("scheme", "siso"), r.where("scheme"));
      spec.mr = static_cast<int>(r.integer("mr", 1));
      spec.mt = static_cast<int>(r.integer("mt", 1));
      spec.csi = parse_csi(r.str("csi", "perfect"), r.where("csi"));
      spec.codebook_bits = static_cast<int>(r.integer("codebook_bits", 2));
      spec.codebook_seed =
          static_cast<std::uint64_t>(r.integer("codebook_seed", 1));
      spec.codebook_file = r.str("codebook_file", "");
      r.check_unknown();
    } else if (s.kind == "mode" || s.kind == "scheme") {
      ModeSpec m;
      m.name = s.name.empty() ? s.kind + std::to_string(spec.modes.size())
                              : s.name;
      if (s.kind == "mode") {
        m.mode = parse_mode(r.str("type", "CHASE"), r.where("type"));
        m.m_points = parse_constellation(r.str("constellation", "qpsk"),
                                         r.where("constellation"));
        std::string g = r.str("gamma", "auto");
        m.gamma = g == "auto" ? -1.0 : std::stod(g);
        m.sigma2 = r.num("sigma2", 0.0);
        m.t_sym_frac = r.num("t_sym_frac", 0.5);
        m.quant_bits = static_cast<int>(r.integer("quant_bits", 5));
      } else {
        m.csi = parse_csi(r.str("csi", "perfect"), r.where("csi"));
        m.codebook_bits = static_cast<int>(r.integer("codebook_bits", 2));
        m.codebook_seed =
            static_cast<std::uint64_t>(r.integer("codebook_seed", 1));
        m.codebook_file = r.str("codebook_file", "");
      }
      r.check_unknown();
      spec.modes.push_back(std::move(m));
    } else {
      throw ConfigError(origin + ":" + std::to_string(s.line) +
                        ": unknown section '" + s.kind + "'");
    }
  }
  if (!saw_experiment)
    throw ConfigError(origin + ": missing [experiment] section");
  spec.validate();
  return spec;
}

ExperimentSpec parse_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open spec file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_spec_text(ss.str(), path);
}

namespace {

int resolve_workers(const ExperimentSpec& spec) {
  if (spec.workers > 0) return spec.workers;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs fn(t) for t in [0, tasks) across workers.
void parallel_for(int workers, long long tasks,
                  const std::function<void(long long)>& fn) {
  if (workers <= 1 || tasks <= 1) {
    for (long long t = 0; t < tasks; ++t) fn(t);
    return;
  }
  std::atomic<long long> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mu;
  auto body = [&] {
    for (;;) {
      long long t = next.fetch_add(1);
      if (t >= tasks) return;
      try {
        fn(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  pool.reserve(workers);
  for (int i = 0; i < workers; ++i) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::string antennas_token(const ExperimentSpec& spec) {
  return std::to_string(spec.mr) + "x" + std::to_string(spec.mt);
}

std::shared_ptr<BeamformingCodebook> make_codebook(CsiQuant csi, int mt,
                                                   int bits,
                                                   std::uint64_t seed,
                                                   const std::string& file) {
  if (csi == CsiQuant::kRvq)
    return std::make_shared<BeamformingCodebook>(
        build_rvq_codebook(mt, bits, seed));
  if (csi == CsiQuant::kFile)
    return std::make_shared<BeamformingCodebook>(load_codebook(file));
  return nullptr;
}

ExperimentResult run_throughput(const ExperimentSpec& spec) {
  TurboCodec codec(CodecConfig{.l_info = spec.l_info,
                               .iterations = spec.iterations});
  auto codebook = make_codebook(spec.csi, spec.mt, spec.codebook_bits,
                                spec.codebook_seed, spec.codebook_file);

  struct Point {
    std::size_t mode_idx;
    std::size_t rho_idx;
    HarqConfig hc;
  };
  std::vector<Point> points;
  for (std::size_t mi = 0; mi < spec.modes.size(); ++mi) {
    const ModeSpec& m = spec.modes[mi];
    for (std::size_t ri = 0; ri < spec.rho_db.size(); ++ri) {
      HarqConfig hc;
      hc.mode = m.mode;
      hc.n_max = spec.n_max;
      hc.rho = db_to_linear(spec.rho_db[ri]);
      hc.gamma = m.gamma;
      hc.sigma2 = m.sigma2;
      hc.t_sym_frac = m.t_sym_frac;
      hc.quant_bits = m.quant_bits;
      hc.m_points = m.m_points;
      hc.antenna = spec.antenna;
      hc.mr = spec.mr;
      hc.mt = spec.mt;
      hc.csi = spec.csi;
      hc.codebook = codebook.get();
      hc.genie_ack = spec.genie_ack;
      hc.codec = &codec;
      hc.validate();
      points.push_back(Point{mi, ri, hc});
    }
  }

  const int packets = spec.packets_per_point;
  const int payload_len = spec.l_info - kCrcBits;
  std::vector<SessionResult> sessions(points.size() *
                                      static_cast<std::size_t>(packets));
  std::vector<double> walls(sessions.size());

  parallel_for(resolve_workers(spec),
               static_cast<long long>(sessions.size()), [&](long long t) {
    std::size_t p = static_cast<std::size_t>(t) / packets;
    std::size_t i = static_cast<std::size_t>(t) % packets;
    std::uint64_t seed =
        derive_seed(spec.master_seed, {points[p].rho_idx, i});
    Rng payload_rng(derive_seed(seed, {0xD4}));
    std::vector<int> payload(payload_len);
    for (int b = 0; b < payload_len; ++b)
      payload[b] = payload_rng.uniform() < 0.5 ? 0 : 1;
    auto t0 = std::chrono::steady_clock::now();
    sessions[t] = run_session(points[p].hc, payload, seed);
    walls[t] = std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - t0)
                   .count();
  });

  ExperimentResult out;
  out.kind = spec.kind;
  out.spec = spec;
  for (std::size_t p = 0; p < points.size(); ++p) {
    std::span<const SessionResult> slice(&sessions[p * packets],
                                         static_cast<std::size_t>(packets));
    ThroughputEstimate est = throughput(slice, spec.n_max);
    ResultRow row;
    row.mode = spec.modes[points[p].mode_idx].name;
    row.rho_db = spec.rho_db[points[p].rho_idx];
    row.constellation =
        constellation_token(spec.modes[points[p].mode_idx].m_points);
    row.antennas = antennas_token(spec);
    row.tau = est.tau;
    row.tau_ci95 = est.ci95;
    row.fer = est.fer;
    row.packets = packets;
    row.seed = spec.master_seed;
    row.round_snr_mean.assign(spec.n_max, 0.0);
    std::vector<long long> counts(spec.n_max, 0);
    double wall = 0.0;
    for (std::size_t i = 0; i < slice.size(); ++i) {
      wall += walls[p * packets + i];
      for (const RoundRecord& rec : slice[i].per_round) {
        row.round_snr_mean[rec.round - 1] += rec.snr_post;
        counts[rec.round - 1] += 1;
      }
    }
    for (int k = 0; k < spec.n_max; ++k)
      if (counts[k]) row.round_snr_mean[k] /= static_cast<double>(counts[k]);
    row.wall_ms = wall;
    out.rows.push_back(std::move(row));
  }
  return out;
}

ExperimentResult run_post_snr(const ExperimentSpec& spec) {
  struct Point {
    std::size_t mode_idx;
    std::size_t rho_idx;
    double rho;
    double gamma;
  };
  std::vector<Point> points;
  for (std::size_t mi = 0; mi < spec.modes.size(); ++mi)
    for (std::size_t ri = 0; ri < spec.rho_db.size(); ++ri) {
      double rho = db_to_linear(spec.rho_db[ri]);
      const ModeSpec& m = spec.modes[mi];
      // Same resolution as the session driver: CHASE is the gamma = 0 path.
      double gamma = m.mode == HarqMode::kChase ? 0.0 : m.gamma;
      if (gamma == -1.0)
        gamma = m.sigma2 == 0.0 ? 1.0
                                : optimize_gamma(rho, m.sigma2, spec.n_max);
      points.push_back(Point{mi, ri, rho, gamma});
    }

  const int traces = spec.packets_per_point;
  const int chunk = 512;
  const int chunks = (traces + chunk - 1) / chunk;
  // sums[point][chunk] merged in deterministic order afterwards.
  std::vector<std::vector<double>> sums(
      points.size(), std::vector<double>(chunks, 0.0));
  std::vector<std::vector<double>> sq_sums(
      points.size(), std::vector<double>(chunks, 0.0));

  parallel_for(resolve_workers(spec), chunks, [&](long long c) {
    int lo = static_cast<int>(c) * chunk;
    int hi = std::min(traces, lo + chunk);
    for (int t = lo; t < hi; ++t) {
      for (std::size_t p = 0; p < points.size(); ++p) {
        std::uint64_t seed =
            derive_seed(spec.master_seed,
                        {points[p].rho_idx, static_cast<std::uint64_t>(t)});
        Rng rng(seed);
        std::vector<cdouble> gains(spec.n_max);
        for (int k = 0; k < spec.n_max; ++k) gains[k] = rng.cnormal();
        FeedbackCode code = build_code(gains, points[p].rho, points[p].gamma,
                                       spec.modes[points[p].mode_idx].sigma2);
        double snr = post_snr(code);
        sums[p][c] += snr;
        sq_sums[p][c] += snr * snr;
      }
    }
  });

  ExperimentResult out;
  out.kind = spec.kind;
  out.spec = spec;
  for (std::size_t p = 0; p < points.size(); ++p) {
    double s = 0.0, ss = 0.0;
    for (int c = 0; c < chunks; ++c) {
      s += sums[p][c];
      ss += sq_sums[p][c];
    }
    double mean = s / traces;
    double var = std::max(0.0, ss / traces - mean * mean);
    double hw = 1.96 * std::sqrt(var / traces);
    ResultRow row;
    row.mode = spec.modes[points[p].mode_idx].name;
    row.rho_db = spec.rho_db[points[p].rho_idx];
    row.n = spec.n_max;
    row.mean_snr_db = linear_to_db(mean);
    row.tau_ci95 = linear_to_db(mean + hw) - linear_to_db(mean);
    row.packets = traces;
    row.seed = spec.master_seed;
    row.antennas = antennas_token(spec);
    out.rows.push_back(std::move(row));
  }
  return out;
}

ExperimentResult run_pe_vs_n(const ExperimentSpec& spec) {
  const double rho = db_to_linear(spec.rho_db[0]);
  const Constellation con = build_constellation(spec.pe_m_points, rho);
  const int max_n = *std::max_element(spec.n_list.begin(), spec.n_list.end());

  std::vector<std::shared_ptr<BeamformingCodebook>> cbs;
  for (const ModeSpec& m : spec.modes)
    cbs.push_back(make_codebook(m.csi, spec.mt, m.codebook_bits,
                                m.codebook_seed, m.codebook_file));

  const int traces = spec.packets_per_point;
  const int chunk = 512;
  const int chunks = (traces + chunk - 1) / chunk;
  const std::size_t cells = spec.modes.size() * spec.n_list.size();
  std::vector<std::vector<double>> sums(cells,
                                        std::vector<double>(chunks, 0.0));

  parallel_for(resolve_workers(spec), chunks, [&](long long c) {
    int lo = static_cast<int>(c) * chunk;
    int hi = std::min(traces, lo + chunk);
    std::vector<double> lambdas(max_n);
    std::vector<cdouble> zeros(max_n, cdouble{0.0, 0.0});
    std::vector<cdouble> gains(max_n);
    for (int t = lo; t < hi; ++t) {
      // Common channel draws for every scheme (paired comparison).
      Rng rng(derive_seed(spec.master_seed, {0x7E,
                                             static_cast<std::uint64_t>(t)}));
      std::vector<Eigen::VectorXcd> hs(max_n);
      for (int k = 0; k < max_n; ++k) {
        hs[k].resize(spec.mt);
        for (int i = 0; i < spec.mt; ++i) hs[k](i) = rng.cnormal();
      }
      for (std::size_t si = 0; si < spec.modes.size(); ++si) {
        for (int k = 0; k < max_n; ++k) {
          Eigen::VectorXcd w;
          switch (spec.modes[si].csi) {
            case CsiQuant::kPerfect: w = perfect_csi_beamformer(hs[k]); break;
            case CsiQuant::kNone:
              w = Eigen::VectorXcd::Zero(spec.mt);
              w(0) = 1.0;
              break;
            default: w = select_beamformer(hs[k], *cbs[si]).second; break;
          }
          lambdas[k] = miso_effective(hs[k], w, 0.0).lambda;
          gains[k] = cdouble{lambdas[k], 0.0};
        }
        for (std::size_t ni = 0; ni < spec.n_list.size(); ++ni) {
          int n = spec.n_list[ni];
          EstimatorState st = combine_perfect(
              std::span<const cdouble>(zeros.data(), n),
              std::span<const cdouble>(gains.data(), n), rho);
          double pe = qam_symbol_error_prob(con, st.err_var);
          sums[si * spec.n_list.size() + ni][c] += pe;
        }
      }
    }
  });

  ExperimentResult out;
  out.kind = spec.kind;
  out.spec = spec;
  for (std::size_t si = 0; si < spec.modes.size(); ++si)
    for (std::size_t ni = 0; ni < spec.n_list.size(); ++ni) {
      double s = 0.0;
      for (int c = 0; c < chunks; ++c)
        s += sums[si * spec.n_list.size() + ni][c];
      ResultRow row;
      row.mode = spec.modes[si].name;
      row.rho_db = spec.rho_db[0];
      row.n = spec.n_list[ni];
      row.pe = s / traces;
      row.packets = traces;
      row.seed = spec.master_seed;
      row.antennas = antennas_token(spec);
      row.constellation = constellation_token(spec.pe_m_points);
      out.rows.push_back(std::move(row));
    }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ExperimentKind::kThroughput: return run_throughput(spec);
    case ExperimentKind::kPostSnr: return run_post_snr(spec);
    case ExperimentKind::kPeVsN: return run_pe_vs_n(spec);
  }
  throw ConfigError("unknown experiment kind");
}

namespace {

std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json spec_to_json(const ExperimentSpec& s) {
  json j;
  j["kind"] = s.kind == ExperimentKind::kThroughput ? "throughput"
              : s.kind == ExperimentKind::kPostSnr  ? "post_snr"
                                                    : "pe_vs_n";
  j["rho_db"] = s.rho_db;
  j["n_list"] = s.n_list;
  j["packets_per_point"] = s.packets_per_point;
  j["master_seed"] = s.master_seed;
  j["n_max"] = s.n_max;
  j["genie_ack"] = s.genie_ack;
  j["fec"] = {{"l_info", s.l_info}, {"iterations", s.iterations}};
  j["antenna"] = {{"scheme", s.antenna == AntennaScheme::kSiso      ? "siso"
                             : s.antenna == AntennaScheme::kMisoBf ? "miso_bf"
                                                                   : "mimo_svd"},
                  {"mr", s.mr},
                  {"mt", s.mt}};
  json modes = json::array();
  for (const ModeSpec& m : s.modes) {
    json jm;
    jm["name"] = m.name;
    jm["type"] = to_string(m.mode);
    jm["constellation"] = constellation_token(m.m_points);
    jm["gamma"] = m.gamma;
    jm["sigma2"] = m.sigma2;
    jm["t_sym_frac"] = m.t_sym_frac;
    jm["quant_bits"] = m.quant_bits;
    modes.push_back(jm);
  }
  j["modes"] = modes;
  return j;
}

json rows_to_json(const ExperimentResult& r) {
  json rows = json::array();
  for (const ResultRow& row : r.rows) {
    json jr;
    jr["mode"] = row.mode;
    jr["rho_db"] = row.rho_db;
    jr["constellation"] = row.constellation;
    jr["antennas"] = row.antennas;
    jr["n"] = row.n;
    jr["tau"] = row.tau;
    jr["tau_ci95"] = row.tau_ci95;
    jr["fer"] = row.fer;
    jr["mean_snr_db"] = row.mean_snr_db;
    jr["pe"] = row.pe;
    jr["packets"] = row.packets;
    jr["seed"] = row.seed;
    jr["round_snr_mean"] = row.round_snr_mean;
    jr["wall_ms"] = row.wall_ms;
    rows.push_back(jr);
  }
  return rows;
}

}  // namespace

std::string results_csv(const ExperimentResult& result) {
  std::ostringstream os;
  if (result.kind == ExperimentKind::kThroughput) {
    os << "mode,rho_db,constellation,antennas,tau,tau_ci95,fer,packets,seed\n";
    for (const ResultRow& r : result.rows)
      os << r.mode << ',' << fmt_num(r.rho_db) << ',' << r.constellation
         << ',' << r.antennas << ',' << fmt_num(r.tau) << ','
         << fmt_num(r.tau_ci95) << ',' << fmt_num(r.fer) << ',' << r.packets
         << ',' << r.seed << '\n';
  } else if (result.kind == ExperimentKind::kPostSnr) {
    os << "mode,rho_db,n,mean_snr_db,ci95,traces,seed\n";
    for (const ResultRow& r : result.rows)
      os << r.mode << ',' << fmt_num(r.rho_db) << ',' << r.n << ','
         << fmt_num(r.mean_snr_db) << ',' << fmt_num(r.tau_ci95) << ','
         << r.packets << ',' << r.seed << '\n';
  } else {
    os << "scheme,n,pe,traces,seed\n";
    for (const ResultRow& r : result.rows)
      os << r.mode << ',' << r.n << ',' << fmt_num(r.pe) << ',' << r.packets
         << ',' << r.seed << '\n';
  }
  return os.str();
}

void write_results(const ExperimentResult& result, const std::string& path,
                   const std::string& format) {
  if (result.rows.empty())
    throw ConfigError("write_results: empty result, refusing to write");
  if (format != "csv" && format != "json")
    throw ConfigError("write_results: format must be csv or json");

  if (format == "csv") {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write: " + path);
    out << results_csv(result);
    if (!out) throw IoError("write failed: " + path);

    json sidecar;
    sidecar["spec"] = spec_to_json(result.spec);
    sidecar["rows"] = rows_to_json(result);
    std::ofstream meta(path + ".meta.json");
    if (!meta) throw IoError("cannot write: " + path + ".meta.json");
    meta << sidecar.dump(2) << '\n';
  } else {
    json j;
    j["spec"] = spec_to_json(result.spec);
    j["rows"] = rows_to_json(result);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write: " + path);
    out << j.dump(2) << '\n';
  }
}

}  // namespace cofarq
