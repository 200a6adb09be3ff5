#include "cofarq/multiantenna.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cofarq/errors.hpp"

namespace cofarq {

BeamformingCodebook build_rvq_codebook(int mt, int b, std::uint64_t seed) {
  if (mt < 1) throw ConfigError("mt must be >= 1");
  if (b < 1) throw ConfigError("b must be >= 1");
  BeamformingCodebook cb;
  cb.kind = BeamformingCodebook::Kind::kRvq;
  cb.mt = mt;
  cb.b = b;
  Rng rng(seed);
  int count = 1 << b;
  cb.vectors.reserve(count);
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXcd v(mt);
    do {
      for (int j = 0; j < mt; ++j) v(j) = rng.cnormal();
    } while (v.norm() < 1e-12);
    v /= v.norm();
    cb.vectors.push_back(std::move(v));
  }
  return cb;
}

BeamformingCodebook load_codebook(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open codebook file: " + path);

  BeamformingCodebook cb;
  cb.kind = BeamformingCodebook::Kind::kFile;

  std::string line;
  int lineno = 0;
  auto next_data_line = [&](bool required) -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      if (line[line.find_first_not_of(" \t")] == '#') {
        std::istringstream hs(line);
        std::string hash, key;
        hs >> hash >> key;
        if (hash == "#" && key == "min_dist") hs >> cb.declared_min_dist;
        continue;
      }
      return true;
    }
    if (required)
      throw IoError(path + ": unexpected end of file after line " +
                    std::to_string(lineno));
    return false;
  };

  next_data_line(true);
  {
    std::istringstream hs(line);
    if (!(hs >> cb.mt >> cb.b) || cb.mt < 1 || cb.b < 1)
      throw IoError(path + ": line " + std::to_string(lineno) +
                    ": expected header 'Mt B'");
  }
  int count = 1 << cb.b;
  for (int i = 0; i < count; ++i) {
    next_data_line(true);
    std::istringstream vs(line);
    Eigen::VectorXcd v(cb.mt);
    for (int j = 0; j < cb.mt; ++j) {
      double re, im;
      if (!(vs >> re >> im))
        throw IoError(path + ": line " + std::to_string(lineno) +
                      ": expected " + std::to_string(2 * cb.mt) + " reals");
      v(j) = {re, im};
    }
    double extra;
    if (vs >> extra)
      throw IoError(path + ": line " + std::to_string(lineno) +
                    ": trailing values");
    if (std::abs(v.norm() - 1.0) > 1e-6)
      throw IoError(path + ": line " + std::to_string(lineno) +
                    ": vector is not unit norm");
    cb.vectors.push_back(std::move(v));
  }
  while (next_data_line(false)) {
    throw IoError(path + ": line " + std::to_string(lineno) +
                  ": unexpected extra data");
  }
  return cb;
}

double min_chordal_distance(const BeamformingCodebook& cb) {
  double best = 1.0;
  for (std::size_t i = 0; i < cb.vectors.size(); ++i)
    for (std::size_t j = i + 1; j < cb.vectors.size(); ++j) {
      double c = std::norm(cb.vectors[i].dot(cb.vectors[j]));
      best = std::min(best, std::sqrt(std::max(0.0, 1.0 - c)));
    }
  return best;
}

std::pair<int, Eigen::VectorXcd> select_beamformer(
    const Eigen::VectorXcd& h, const BeamformingCodebook& cb) {
  if (h.size() != cb.mt)
    throw DimensionError("select_beamformer: channel/codebook dim mismatch");
  int best = 0;
  double best_v = -1.0;
  for (std::size_t j = 0; j < cb.vectors.size(); ++j) {
    double v = std::norm((h.transpose() * cb.vectors[j]).value());
    if (v > best_v) {  // strict improvement: ties keep the lowest index
      best_v = v;
      best = static_cast<int>(j);
    }
  }
  return {best, cb.vectors[best]};
}

Eigen::VectorXcd perfect_csi_beamformer(const Eigen::VectorXcd& h) {
  double n = h.norm();
  if (n < 1e-300) throw DegenerateChannelError("zero channel vector");
  return h.conjugate() / n;
}

MisoEffective miso_effective(const Eigen::VectorXcd& h,
                             const Eigen::VectorXcd& w, cdouble y) {
  cdouble hw = (h.transpose() * w).value();
  double lambda = std::abs(hw);
  cdouble rot = lambda > 0.0 ? std::conj(hw) / lambda : cdouble{1.0, 0.0};
  return {lambda, rot * y};
}

SpatialDecomposition svd_waterfill(const Eigen::MatrixXcd& h, double rho) {
  if (rho <= 0.0) throw ConfigError("rho must be > 0");
  if (h.norm() < 1e-300) throw DegenerateChannelError("all-zero channel");

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(
      h, Eigen::ComputeThinU | Eigen::ComputeThinV);

  SpatialDecomposition d;
  d.u = svd.matrixU();
  d.v = svd.matrixV();
  d.lambda = svd.singularValues();
  const int m = static_cast<int>(d.lambda.size());

  // Waterfilling for sum log(1 + rho*xi*lambda^2), sum xi = 1: active set in
  // descending lambda order; water level 1/nu shared by active channels.
  d.xi = Eigen::VectorXd::Zero(m);
  int active = m;
  while (active > 0) {
    if (d.lambda(active - 1) <= 0.0) {
      --active;
      continue;
    }
    double inv_sum = 0.0;
    for (int i = 0; i < active; ++i)
      inv_sum += 1.0 / (rho * d.lambda(i) * d.lambda(i));
    double level = (1.0 + inv_sum) / active;  // = 1/nu
    double xi_last =
        level - 1.0 / (rho * d.lambda(active - 1) * d.lambda(active - 1));
    if (xi_last > 0.0) {
      for (int i = 0; i < active; ++i)
        d.xi(i) = level - 1.0 / (rho * d.lambda(i) * d.lambda(i));
      break;
    }
    --active;
  }
  if (active == 0) throw DegenerateChannelError("no usable subchannel");

  d.effective_gains.resize(m);
  for (int i = 0; i < m; ++i)
    d.effective_gains(i) = d.lambda(i) * std::sqrt(std::max(0.0, d.xi(i)));
  return d;
}

Eigen::MatrixXcd outdated_shrink_matrix(const Eigen::MatrixXcd& h, double rho,
                                        double rho_scale) {
  Eigen::MatrixXcd a = rho_scale * rho * (h.adjoint() * h);
  a += Eigen::MatrixXcd::Identity(a.rows(), a.cols());
  if ((a - a.adjoint()).norm() > 1e-8 * a.norm())
    throw NumericError("shrink matrix drifted from Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
  Eigen::VectorXd ev = es.eigenvalues();
  Eigen::VectorXd inv_sqrt(ev.size());
  for (int i = 0; i < ev.size(); ++i) inv_sqrt(i) = 1.0 / std::sqrt(ev(i));
  return es.eigenvectors() * inv_sqrt.asDiagonal() *
         es.eigenvectors().adjoint();
}

Eigen::VectorXcd outdated_encode_step(const Eigen::VectorXcd& x_k,
                                      const Eigen::MatrixXcd& h_k,
                                      const Eigen::VectorXcd& z_k, double rho,
                                      double rho_scale) {
  // The correction coefficient must match the shrink-matrix constant or the
  // decoder's bias identity breaks.
  Eigen::MatrixXcd b = outdated_shrink_matrix(h_k, rho, rho_scale);
  return b * (x_k - rho_scale * rho * (h_k.adjoint() * z_k));
}

OutdatedMimoDecoder::OutdatedMimoDecoder(int m, double rho, double rho_scale)
    : rho_(rho), rho_scale_(rho_scale) {
  if (m < 1) throw ConfigError("m must be >= 1");
  phi_ = Eigen::MatrixXcd::Identity(m, m);
  theta_hat_ = Eigen::VectorXcd::Zero(m);
}

void OutdatedMimoDecoder::absorb(const Eigen::MatrixXcd& h_k,
                                 const Eigen::VectorXcd& y_k) {
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(phi_.rows(), phi_.cols());
  a += rho_scale_ * rho_ * (h_k.adjoint() * h_k);
  Eigen::VectorXcd w =
      a.llt().solve(rho_scale_ * rho_ * (h_k.adjoint() * y_k));
  theta_hat_ += phi_.adjoint() * w;
  phi_ = outdated_shrink_matrix(h_k, rho_, rho_scale_) * phi_;
}

Eigen::VectorXcd OutdatedMimoDecoder::unbiased() const {
  Eigen::MatrixXcd bias =
      Eigen::MatrixXcd::Identity(phi_.rows(), phi_.cols()) -
      phi_.adjoint() * phi_;
  if (bias.norm() < 1e-12)
    throw DegenerateChannelError("no information absorbed yet");
  return bias.lu().solve(theta_hat_);
}

}  // namespace cofarq
