#pragma once

#include <functional>
#include <span>
#include <vector>

#include "barysid/barycentric.hpp"
#include "barysid/lmi.hpp"
#include "barysid/plant_lab.hpp"

namespace barysid {

/// X = [[X1_hat, X0_hat], [X0_hat^T, X2_hat]] with X1_hat scalar.
struct CovariancePartition {
  Matrix X;
  double X1_hat = 0.0;
  RowVector X0_hat;
  Matrix X2_hat;

  /// Symmetrizes X and splits it.
  static CovariancePartition from_matrix(const Matrix& X);
  Index weight_dim() const { return X2_hat.rows(); }
};

/// How sampled u and y are reconstructed between samples when they are fed
/// through the basis systems. Zoh holds each sample; Foh interpolates
/// linearly, which removes the half-sample lag Zoh puts on y.
enum class Hold { Zoh, Foh };

/// x = N u - M y through the basis systems, zero initial state, computed as
/// two whole-system simulations. Channel 0 is D u - y, the rest is the basis
/// state.
MultiSignal drive_bases(const BasisPair& bases, const SampledSignal& u,
                        const SampledSignal& y, Hold hold = Hold::Foh);
MultiSignal drive_bases(const BasisPair& bases, const ExperimentRecord& record,
                        bool include_steady_state = false, Hold hold = Hold::Foh);

/// Streams x = N u - M y for a record in chunks, exploiting the block
/// diagonal A_cal: every 2x2 rotation block (and the DC integrator) is
/// discretized on its own, so a step costs O(l) instead of O(l^2).
class BasisDriver {
 public:
  BasisDriver(const BasisPair& bases, double D, double fs, Hold hold = Hold::Foh);

  Index channels() const { return 1 + dim_; }
  void stream(const Vector& u, const Vector& y, Index chunk,
              const std::function<void(const Matrix&)>& sink) const;

 private:
  Index dim_;  // state dimension 2l + 1
  double D_;
  // z_{k+1} = phi z_k + gamma_a v_k + gamma_b v_{k+1}, v = (u, y)
  Eigen::RowVector2d dc_a_, dc_b_;      // DC integrator
  std::vector<Eigen::Matrix2d> phi_;    // per rotation block
  std::vector<Eigen::Matrix2d> gamma_a_;
  std::vector<Eigen::Matrix2d> gamma_b_;
};

/// X = sum_k (1/n_k) sum_i x_i x_i^T, symmetrized and partitioned.
CovariancePartition covariance(std::span<const MultiSignal> signals);

struct CovarianceOptions {
  bool include_steady_state = false;
  bool parallel = true;
  Hold hold = Hold::Foh;
  Index chunk = 1024;
};

/// Covariance over all records with non-empty data, through BasisDriver.
CovariancePartition covariance_from_records(
    const BasisPair& bases, double D, std::span<const ExperimentRecord> records,
    const CovarianceOptions& options = {});

/// [1 W] X [1 W]^T
double problem1_cost(const CovariancePartition& cov, const RowVector& W);

struct ExplicitOptions {
  /// Add eps I to X2_hat, eps = 1e-10 trace / dim, instead of failing on a
  /// rank-deficient X2_hat. Only an all-zero X2_hat still fails.
  bool ridge = false;
};

/// W = -X0_hat X2_hat^{-1} by Cholesky. Throws SingularCovariance when the
/// smallest eigenvalue of D^{-1/2} X2_hat D^{-1/2}, D = diag(X2_hat), is
/// below 1e-10 (that matrix has trace / dim = 1).
RowVector solve_explicit(const CovariancePartition& cov,
                         const ExplicitOptions& options = {});

struct StableOptions {
  double margin = 1e-8;        // strict inequalities become  >= margin I
  double p_bound = 1e4;        // P <= p_bound I in scaled coordinates
  lmi::Options solver;
  ExplicitOptions explicit_options;
};

struct StableSolveResult {
  RowVector W_hat;
  double gamma = 0.0;
  Matrix P;
  RowVector Q;
  double alpha = 0.0;
  double cost_bound = 0.0;   // gamma - X0 X2^{-1} X0^T + X1
  RowVector W_explicit;
  int newton_steps = 0;
  bool used_phase1 = false;
};

/// Stability-constrained weights:
///   min gamma  s.t.  P > 0,  [gamma Q; Q^T 2P - X2] > 0,
///   Y P - B_M Q + P Y^T - Q^T B_M^T < -2 alpha P,
/// with Y = A_cal - B_M W_explicit, and W = Q P^{-1} + W_explicit.
StableSolveResult solve_stable(const CovariancePartition& cov,
                               const BasisPair& bases, double alpha,
                               const StableOptions& options = {});

}  // namespace barysid
