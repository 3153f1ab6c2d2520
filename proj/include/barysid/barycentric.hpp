#pragma once

#include <vector>

#include "barysid/lti.hpp"

namespace barysid {

struct FrequencySample {
  double omega = 0.0;  // rad/s
  Complex value;
};

/// Interpolation data: feedthrough D, DC gain K = G(0) and the measured
/// responses at distinct positive frequencies.
struct InterpolationData {
  double D = 0.0;
  double K = 0.0;
  std::vector<FrequencySample> points;

  Index size() const { return static_cast<Index>(points.size()); }
  /// 2l + 1: one DC state plus a rotation pair per point.
  Index state_dim() const { return 2 * size() + 1; }

  /// Throws ValidationError / DuplicateFrequency.
  void validate() const;
};

/// Weight-independent basis systems sharing A_cal.
///
/// State ordering is (DC, pair 1 row 1, pair 1 row 2, ..., pair l row 2).
/// M_sys and N_sys have 2l + 2 outputs: the feedthrough row followed by the
/// full state.
struct BasisPair {
  Matrix A_cal;
  Vector B_M;
  Vector B_N;
  StateSpace M_sys;
  StateSpace N_sys;

  Index state_dim() const { return A_cal.rows(); }
};

BasisPair build_bases(const InterpolationData& data);

/// Interpolant assembled from a weight row; R is the realization
///   [A_cal - B_M w | B_M D - B_N ; -w | D].
struct InterpolantModel {
  InterpolationData data;
  BasisPair bases;
  RowVector weights;
  StateSpace R;

  /// A point is active when its weight block has norm above 1e-12; only
  /// active points are interpolated exactly.
  std::vector<bool> active_points() const;
  bool dc_active() const;
};

inline constexpr double kActiveWeightThreshold = 1e-12;

InterpolantModel assemble_model(const BasisPair& bases,
                                const InterpolationData& data,
                                const RowVector& weights);

struct InterpolantValue {
  Complex value;
  /// omega coincides with an interpolation node; value is the stored data
  /// there rather than the (removable-singularity) rational formula.
  bool at_node = false;
};

/// Evaluates N(jw)/M(jw) from the barycentric sums. Each real weight pair
/// (a, b) becomes the complex weight c = (a + jb)/2 on the node jw_k and its
/// conjugate on -jw_k.
InterpolantValue eval_interpolant(const InterpolantModel& model, double omega);

}  // namespace barysid
