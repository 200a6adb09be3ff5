#pragma once
// Spatial front-ends that reduce MISO/MIMO channels to scalar subchannels:
// limited-feedback beamforming (RVQ or file-loaded packings), SVD plus
// waterfilling, and the outdated-CSI matrix recursion.

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cofarq/channel.hpp"
#include "cofarq/rng.hpp"

namespace cofarq {

struct BeamformingCodebook {
  enum class Kind { kRvq, kFile };
  Kind kind = Kind::kRvq;
  int mt = 0;
  int b = 0;  // feedback bits, 2^b vectors
  std::vector<Eigen::VectorXcd> vectors;  // unit norm
  double declared_min_dist = -1.0;        // from the file, if present
};

BeamformingCodebook build_rvq_codebook(int mt, int b, std::uint64_t seed);

// File format: first line "Mt B"; then 2^B lines of 2*Mt whitespace-separated
// reals (re/im interleaved); optional trailing "# min_dist <value>".
BeamformingCodebook load_codebook(const std::string& path);

// Minimum pairwise chordal distance sqrt(1 - |u* v|^2) over the codebook.
double min_chordal_distance(const BeamformingCodebook& cb);

// w = argmax_j |h^T f_j|^2, ties to the lowest index.
std::pair<int, Eigen::VectorXcd> select_beamformer(
    const Eigen::VectorXcd& h, const BeamformingCodebook& cb);

// Unquantized optimum: w = conj(h)/||h||, so h^T w = ||h||.
Eigen::VectorXcd perfect_csi_beamformer(const Eigen::VectorXcd& h);

// Effective scalar channel of the beamformed MISO link and the de-rotated
// observation; noise statistics are rotation invariant.
struct MisoEffective {
  double lambda;  // |h^T w|
  cdouble y;      // e^{-j angle(h^T w)} * y
};
MisoEffective miso_effective(const Eigen::VectorXcd& h,
                             const Eigen::VectorXcd& w, cdouble y);

struct SpatialDecomposition {
  Eigen::MatrixXcd u;       // Mr x M
  Eigen::VectorXd lambda;   // singular values, descending
  Eigen::MatrixXcd v;       // Mt x M
  Eigen::VectorXd xi;       // waterfilling fractions, sum 1
  Eigen::VectorXd effective_gains;  // lambda_i * sqrt(xi_i)
};

// Compact SVD plus waterfilling maximizing sum log(1 + rho*xi_i*lambda_i^2)
// subject to sum xi = 1.
SpatialDecomposition svd_waterfill(const Eigen::MatrixXcd& h, double rho);

// Outdated-CSI MIMO recursion (perfect COI):
//   x[k+1] = B[k] (x[k] - rho H[k]* z[k]),  B[k] = (I + rho H* H)^(-1/2)
//   Phi[k] = B[k] ... B[1]
//   theta_hat[k] = theta_hat[k-1] + Phi[k-1]* (I + rho H* H)^{-1} rho H* y[k]
// with E[theta_hat[k]] = (I - Phi[k]* Phi[k]) theta.
// Hermitian inverse square root (I + scale*rho*H*H)^(-1/2) via
// eigendecomposition; throws on numerical drift from Hermitian symmetry.
Eigen::MatrixXcd outdated_shrink_matrix(const Eigen::MatrixXcd& h, double rho,
                                        double rho_scale = 1.0);

// One encoder round; z_k is the residual the source recovers from feedback.
Eigen::VectorXcd outdated_encode_step(const Eigen::VectorXcd& x_k,
                                      const Eigen::MatrixXcd& h_k,
                                      const Eigen::VectorXcd& z_k, double rho,
                                      double rho_scale = 1.0);

// Destination-side accumulator for the matched decoder.
// rho_scale is configurable because the two self-consistent readings of the
// shrink matrix differ by a factor of M; both encoder and decoder must use
// the same value.
class OutdatedMimoDecoder {
 public:
  OutdatedMimoDecoder(int m, double rho, double rho_scale = 1.0);

  // Folds observation y[k] (with its channel) into the running estimate.
  void absorb(const Eigen::MatrixXcd& h_k, const Eigen::VectorXcd& y_k);

  const Eigen::VectorXcd& theta_hat() const { return theta_hat_; }
  const Eigen::MatrixXcd& phi() const { return phi_; }  // B[k]...B[1]
  Eigen::VectorXcd unbiased() const;  // (I - Phi* Phi)^{-1} theta_hat

 private:
  double rho_;
  double rho_scale_;
  Eigen::MatrixXcd phi_;
  Eigen::VectorXcd theta_hat_;
};

}  // namespace cofarq
