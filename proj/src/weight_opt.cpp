#include "barysid/weight_opt.hpp"

#include <cmath>
#include <sstream>

#include "barysid/errors.hpp"
#include "barysid/kernels.hpp"

namespace barysid {

CovariancePartition CovariancePartition::from_matrix(const Matrix& X) {
  if (X.rows() != X.cols() || X.rows() < 2) {
    throw DimensionMismatch("covariance: X must be square with size >= 2");
  }
  CovariancePartition c;
  c.X = 0.5 * (X + X.transpose());
  const Index n = c.X.rows() - 1;
  c.X1_hat = c.X(0, 0);
  c.X0_hat = c.X.block(0, 1, 1, n);
  c.X2_hat = c.X.bottomRightCorner(n, n);
  return c;
}

MultiSignal drive_bases(const BasisPair& bases, const SampledSignal& u,
                        const SampledSignal& y, Hold hold) {
  if (u.size() != y.size()) {
    throw DimensionMismatch("drive_bases: u and y lengths differ");
  }
  if (u.fs != y.fs) throw DimensionMismatch("drive_bases: sample rates differ");
  const MultiSignal us{u.fs, u.samples.transpose()};
  const MultiSignal ys{y.fs, y.samples.transpose()};
  const MultiSignal nu =
      hold == Hold::Zoh ? simulate_zoh(bases.N_sys, us) : simulate_foh(bases.N_sys, us);
  const MultiSignal my =
      hold == Hold::Zoh ? simulate_zoh(bases.M_sys, ys) : simulate_foh(bases.M_sys, ys);
  return MultiSignal{u.fs, nu.samples - my.samples};
}

MultiSignal drive_bases(const BasisPair& bases, const ExperimentRecord& record,
                        bool include_steady_state, Hold hold) {
  if (include_steady_state) {
    return drive_bases(bases, record.full_u(), record.full_y(), hold);
  }
  return drive_bases(bases, record.u_transient, record.y_transient, hold);
}

BasisDriver::BasisDriver(const BasisPair& bases, double D, double fs, Hold hold)
    : dim_(bases.state_dim()), D_(D) {
  const double dt = 1.0 / fs;
  // DC integrator z0' = K u - y
  const Eigen::RowVector2d g0(bases.B_N(0) * dt, -bases.B_M(0) * dt);
  if (hold == Hold::Zoh) {
    dc_a_ = g0;
    dc_b_.setZero();
  } else {
    dc_a_ = 0.5 * g0;
    dc_b_ = 0.5 * g0;
  }
  const Index pairs = (dim_ - 1) / 2;
  for (Index k = 0; k < pairs; ++k) {
    const Index i = 1 + 2 * k;
    Matrix B(2, 2);
    B.col(0) = bases.B_N.segment(i, 2);
    B.col(1) = -bases.B_M.segment(i, 2);
    const StateSpace blk(bases.A_cal.block(i, i, 2, 2), B, Matrix::Identity(2, 2),
                         Matrix::Zero(2, 2));
    if (hold == Hold::Zoh) {
      const DiscreteStateSpace d = discretize_zoh(blk, dt);
      phi_.push_back(d.Ad);
      gamma_a_.push_back(d.Bd);
      gamma_b_.push_back(Eigen::Matrix2d::Zero());
    } else {
      const DiscreteFohStateSpace d = discretize_foh(blk, dt);
      phi_.push_back(d.Ad);
      gamma_a_.push_back(d.B0 - d.B1);
      gamma_b_.push_back(d.B1);
    }
  }
}

void BasisDriver::stream(const Vector& u, const Vector& y, Index chunk,
                         const std::function<void(const Matrix&)>& sink) const {
  if (u.size() != y.size()) {
    throw DimensionMismatch("BasisDriver: u and y lengths differ");
  }
  const Index len = u.size();
  const Index pairs = static_cast<Index>(phi_.size());
  Vector z = Vector::Zero(dim_);
  Matrix block;
  for (Index start = 0; start < len; start += chunk) {
    const Index cnt = std::min(chunk, len - start);
    block.resize(1 + dim_, cnt);
    for (Index j = 0; j < cnt; ++j) {
      const Index k = start + j;
      const Eigen::Vector2d v(u(k), y(k));
      block(0, j) = D_ * v(0) - v(1);
      block.col(j).tail(dim_) = z;
      if (k + 1 == len) break;
      const Eigen::Vector2d vn(u(k + 1), y(k + 1));
      z(0) += dc_a_.dot(v) + dc_b_.dot(vn);
      for (Index p = 0; p < pairs; ++p) {
        const Index i = 1 + 2 * p;
        const auto q = static_cast<std::size_t>(p);
        const Eigen::Vector2d nz = phi_[q] * Eigen::Vector2d(z(i), z(i + 1)) +
                                   gamma_a_[q] * v + gamma_b_[q] * vn;
        z(i) = nz(0);
        z(i + 1) = nz(1);
      }
    }
    sink(block);
  }
}

CovariancePartition covariance(std::span<const MultiSignal> signals) {
  if (signals.empty()) throw ValidationError("covariance: no signals");
  const Index dim = signals.front().channels();
  for (const auto& s : signals) {
    if (s.channels() != dim) throw DimensionMismatch("covariance: channel counts differ");
    if (s.size() == 0) throw ValidationError("covariance: empty signal");
  }
  const Matrix X = kernels::omp::accumulate_covariance(
      dim, static_cast<Index>(signals.size()),
      [&](Index k, const kernels::ChunkSink& sink) {
        sink(signals[static_cast<std::size_t>(k)].samples);
      });
  return CovariancePartition::from_matrix(X);
}

CovariancePartition covariance_from_records(
    const BasisPair& bases, double D, std::span<const ExperimentRecord> records,
    const CovarianceOptions& options) {
  std::vector<const ExperimentRecord*> used;
  for (const auto& r : records) {
    const Index n = r.u_transient.size() +
                    (options.include_steady_state ? r.u_steady.size() : 0);
    if (n > 0) used.push_back(&r);
  }
  if (used.empty()) {
    throw SingularCovariance("covariance: every record has an empty transient");
  }
  const double fs = used.front()->config.fs;
  for (const auto* r : used) {
    if (r->config.fs != fs) {
      throw ValidationError("covariance: records use different sample rates");
    }
  }
  const BasisDriver driver(bases, D, fs, options.hold);
  auto stream = [&](Index k, const kernels::ChunkSink& sink) {
    const ExperimentRecord& r = *used[static_cast<std::size_t>(k)];
    if (options.include_steady_state) {
      driver.stream(r.full_u().samples, r.full_y().samples, options.chunk, sink);
    } else {
      driver.stream(r.u_transient.samples, r.y_transient.samples, options.chunk,
                    sink);
    }
  };
  const Index dim = driver.channels();
  const auto count = static_cast<Index>(used.size());
  const Matrix X = options.parallel
                       ? kernels::omp::accumulate_covariance(dim, count, stream)
                       : kernels::serial::accumulate_covariance(dim, count, stream);
  return CovariancePartition::from_matrix(X);
}

double problem1_cost(const CovariancePartition& cov, const RowVector& W) {
  if (W.size() != cov.weight_dim()) {
    throw DimensionMismatch("problem1_cost: weight width mismatch");
  }
  return cov.X1_hat + 2.0 * cov.X0_hat.dot(W) + W * cov.X2_hat * W.transpose();
}

RowVector solve_explicit(const CovariancePartition& cov,
                         const ExplicitOptions& options) {
  const Index n = cov.weight_dim();
  Matrix X2 = cov.X2_hat;
  const double tol = 1e-10 * X2.trace() / static_cast<double>(n);
  if (options.ridge) X2.diagonal().array() += tol;
  // Basis states differ in scale by orders of magnitude (the DC integrator
  // against a fast rotation block), so the test runs on the unit-diagonal
  // rescaling, whose trace / dim is 1.
  const Vector dinv = X2.diagonal().cwiseMax(0.0).cwiseSqrt().cwiseInverse();
  double lmin = -1.0;
  if (dinv.allFinite()) {
    const Matrix S = dinv.asDiagonal() * X2 * dinv.asDiagonal();
    lmin = Eigen::SelfAdjointEigenSolver<Matrix>(S, Eigen::EigenvaluesOnly).eigenvalues()(0);
  }
  if (!(tol > 0.0) || (!options.ridge && !(lmin > 1e-10))) {
    std::ostringstream os;
    os << "X2_hat is not positive definite (min eigenvalue of the unit-diagonal"
       << " rescaling " << lmin << ", threshold 1e-10)";
    throw SingularCovariance(os.str());
  }
  Eigen::LLT<Matrix> llt(X2);
  if (llt.info() != Eigen::Success) {
    throw SingularCovariance("X2_hat Cholesky factorization failed");
  }
  const Vector w = llt.solve(-cov.X0_hat.transpose());
  return w.transpose();
}

StableSolveResult solve_stable(const CovariancePartition& cov,
                               const BasisPair& bases, double alpha,
                               const StableOptions& options) {
  if (!(alpha > 0.0)) throw ValidationError("solve_stable: alpha must be > 0");
  const Index n = cov.weight_dim();
  if (bases.state_dim() != n) {
    throw DimensionMismatch("solve_stable: bases and covariance sizes differ");
  }
  const RowVector W_exp = solve_explicit(cov, options.explicit_options);
  Matrix X2 = cov.X2_hat;
  if (options.explicit_options.ridge) {
    X2.diagonal().array() += 1e-10 * X2.trace() / static_cast<double>(n);
  }
  const Eigen::LLT<Matrix> llt(X2);
  const Matrix L = llt.matrixL();
  const auto Linv_apply = [&](const Matrix& M) -> Matrix {
    return llt.matrixL().solve(M);
  };

  // Closed loop A_cal - B_M W with W = Z + W_exp is Y - B_M Z.
  const Matrix Y = bases.A_cal - bases.B_M * W_exp;
  const double c_min = cov.X1_hat + W_exp.dot(cov.X0_hat);
  const double scale = std::max(c_min, 1e-12 * std::max(cov.X1_hat, 1e-300));

  // Congruence scaling P = L Pt L^T, Q = sqrt(c) Qt L^T, gamma = c gt turns
  // 2P - X2 into L (2 Pt - I) L^T and normalizes gamma to the optimal cost.
  const Matrix Yt = Linv_apply(Y * L);
  const Vector Bt = std::sqrt(scale) * Linv_apply(bases.B_M);
  const Matrix I = Matrix::Identity(n, n);
  const double delta = options.margin;

  lmi::Problem prob;
  const int vP = prob.add_variable(n, n, true);
  const int vQ = prob.add_variable(1, n);
  const int vG = prob.add_variable(1, 1);
  {
    lmi::Block& b = prob.add_block(n);
    b.constant = -delta * I;
    b.terms.push_back({vP, I, I, 0, 0});
  }
  {
    lmi::Block& b = prob.add_block(n);
    b.constant = options.p_bound * I;
    b.terms.push_back({vP, -I, I, 0, 0});
  }
  {
    lmi::Block& b = prob.add_block(n + 1);
    b.constant = -delta * Matrix::Identity(n + 1, n + 1);
    b.constant.bottomRightCorner(n, n) -= I;
    b.terms.push_back({vG, Matrix::Ones(1, 1), Matrix::Ones(1, 1), 0, 0});
    b.terms.push_back({vQ, Matrix::Constant(1, 1, 2.0), I, 0, 1});
    b.terms.push_back({vP, 2.0 * I, I, 1, 1});
  }
  {
    lmi::Block& b = prob.add_block(n);
    b.constant = -delta * I;
    b.terms.push_back({vP, -2.0 * (Yt + alpha * I), I, 0, 0});
    b.terms.push_back({vQ, 2.0 * Bt, I, 0, 0});
  }
  prob.set_objective(vG, Matrix::Ones(1, 1));

  // Start from the explicit solution (Qt = 0) when it already has the decay
  // margin; otherwise phase 1 takes over from Pt = I.
  lmi::Point start{I, RowVector::Zero(n), Matrix::Ones(1, 1)};
  const Matrix Ya = Yt + alpha * I;
  if (spectral_abscissa(Ya) < 0.0) {
    try {
      Matrix P0 = solve_lyapunov(Ya, I);
      Eigen::SelfAdjointEigenSolver<Matrix> es(P0, Eigen::EigenvaluesOnly);
      const double lo = es.eigenvalues()(0);
      const double hi = es.eigenvalues()(n - 1);
      if (lo > 0.0 && hi / lo < 0.5 * options.p_bound) {
        P0 *= 1.0 / lo;
        start[0] = P0;
      }
    } catch (const NumericalFailure&) {
    }
  }

  const lmi::Result res = lmi::solve(prob, options.solver, start);
  const Matrix& Pt = res.x[static_cast<std::size_t>(vP)];
  const RowVector Qt = res.x[static_cast<std::size_t>(vQ)];
  const double gt = res.x[static_cast<std::size_t>(vG)](0, 0);

  StableSolveResult out;
  out.alpha = alpha;
  out.P = L * Pt * L.transpose();
  out.P = 0.5 * (out.P + out.P.transpose());
  out.Q = std::sqrt(scale) * Qt * L.transpose();
  out.gamma = scale * gt;
  // Z = Q P^{-1} = sqrt(c) Qt Pt^{-1} L^{-1}
  const RowVector QtPinv = Pt.llt().solve(Qt.transpose()).transpose();
  const RowVector Z =
      std::sqrt(scale) *
      L.triangularView<Eigen::Lower>().solve<Eigen::OnTheRight>(QtPinv);
  out.W_hat = Z + W_exp;
  out.W_explicit = W_exp;
  out.cost_bound = out.gamma + c_min;
  out.newton_steps = res.newton_steps;
  out.used_phase1 = res.used_phase1;
  return out;
}

}  // namespace barysid
