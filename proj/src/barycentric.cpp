#include "barysid/barycentric.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "barysid/errors.hpp"

namespace barysid {

namespace {

bool same_frequency(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
}

}  // namespace

void InterpolationData::validate() const {
  if (!std::isfinite(D) || !std::isfinite(K)) {
    throw ValidationError("interpolation data: D and K must be finite");
  }
  for (const auto& p : points) {
    if (!(p.omega > 0.0) || !std::isfinite(p.omega)) {
      throw ValidationError("interpolation data: frequencies must be positive");
    }
    if (!std::isfinite(p.value.real()) || !std::isfinite(p.value.imag())) {
      throw ValidationError("interpolation data: non-finite response");
    }
  }
  std::vector<double> w;
  w.reserve(points.size());
  for (const auto& p : points) w.push_back(p.omega);
  std::sort(w.begin(), w.end());
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (same_frequency(w[i - 1], w[i])) {
      std::ostringstream os;
      os << "interpolation data: duplicate frequency " << w[i] << " rad/s";
      throw DuplicateFrequency(os.str());
    }
  }
}

BasisPair build_bases(const InterpolationData& data) {
  data.validate();
  const Index l = data.size();
  const Index n = 2 * l + 1;
  Matrix A = Matrix::Zero(n, n);
  Vector bm = Vector::Zero(n);
  Vector bn = Vector::Zero(n);
  bm(0) = 1.0;
  bn(0) = data.K;
  for (Index k = 0; k < l; ++k) {
    const auto& p = data.points[static_cast<std::size_t>(k)];
    const Index i = 1 + 2 * k;
    A(i, i + 1) = p.omega;
    A(i + 1, i) = -p.omega;
    bm(i) = 1.0;
    bn(i) = p.value.real();
    bn(i + 1) = -p.value.imag();
  }
  // Outputs: feedthrough row, then the state itself.
  Matrix C = Matrix::Zero(n + 1, n);
  C.bottomRows(n) = Matrix::Identity(n, n);
  Matrix DM = Matrix::Zero(n + 1, 1);
  DM(0, 0) = 1.0;
  Matrix DN = Matrix::Zero(n + 1, 1);
  DN(0, 0) = data.D;
  StateSpace M(A, bm, C, DM);
  StateSpace N(A, bn, C, DN);
  return BasisPair{std::move(A), std::move(bm), std::move(bn), std::move(M),
                   std::move(N)};
}

InterpolantModel assemble_model(const BasisPair& bases,
                                const InterpolationData& data,
                                const RowVector& weights) {
  const Index n = bases.state_dim();
  if (weights.size() != n || data.state_dim() != n) {
    throw DimensionMismatch("assemble_model: weight row has width " +
                            std::to_string(weights.size()) + ", bases have " +
                            std::to_string(n) + " states");
  }
  Matrix A = bases.A_cal - bases.B_M * weights;
  Matrix B = bases.B_M * data.D - bases.B_N;
  Matrix C = -weights;
  Matrix D = Matrix::Constant(1, 1, data.D);
  return InterpolantModel{data, bases, weights,
                          StateSpace(std::move(A), std::move(B), std::move(C),
                                     std::move(D))};
}

std::vector<bool> InterpolantModel::active_points() const {
  std::vector<bool> active(data.points.size());
  for (std::size_t k = 0; k < active.size(); ++k) {
    const Index i = 1 + 2 * static_cast<Index>(k);
    active[k] = std::hypot(weights(i), weights(i + 1)) > kActiveWeightThreshold;
  }
  return active;
}

bool InterpolantModel::dc_active() const {
  return std::abs(weights(0)) > kActiveWeightThreshold;
}

InterpolantValue eval_interpolant(const InterpolantModel& model, double omega) {
  const auto& pts = model.data.points;
  const RowVector& w = model.weights;
  if (omega == 0.0 && w(0) != 0.0) return {Complex(model.data.K), true};
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const Index i = 1 + 2 * static_cast<Index>(k);
    const bool nonzero = w(i) != 0.0 || w(i + 1) != 0.0;
    if (nonzero && (same_frequency(std::abs(omega), pts[k].omega))) {
      return {omega > 0 ? pts[k].value : std::conj(pts[k].value), true};
    }
  }

  const Complex s(0.0, omega);
  Complex M(1.0);
  Complex N(model.data.D);
  if (w(0) != 0.0) {
    M += w(0) / s;
    N += w(0) * model.data.K / s;
  }
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const Index i = 1 + 2 * static_cast<Index>(k);
    const Complex c(0.5 * w(i), 0.5 * w(i + 1));
    if (c == Complex(0.0)) continue;
    const Complex node(0.0, pts[k].omega);
    const Complex g = pts[k].value;
    M += c / (s - node) + std::conj(c) / (s + node);
    N += c * g / (s - node) + std::conj(c * g) / (s + node);
  }
  return {N / M, false};
}

}  // namespace barysid
