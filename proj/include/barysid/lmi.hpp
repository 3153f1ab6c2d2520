#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "barysid/lti.hpp"

// Small dense semidefinite programs with linear objective and affine linear
// matrix inequality constraints, solved by a log-barrier path-following
// method.
//
// Every block is written as
//
//   F(x) = F0 + sum_t sym(embed_t(L_t V_t R_t)) + sum_s v_s C_s  >  0
//
// with sym(M) = (M + M^T)/2 and embed_t placing its product at (row, col) of
// the block. V_t is a matrix variable (general or symmetric), v_s a 1x1
// variable. Writing the affine map in this factored form lets the barrier
// Hessian be assembled entrywise in O(n^4) per block instead of
// O(m^2 n^2) for m scalar unknowns.
namespace barysid::lmi {

struct Variable {
  Index rows = 1;
  Index cols = 1;
  bool symmetric = false;
};

struct Term {
  int var = 0;
  Matrix left;   // (term rows) x var.rows
  Matrix right;  // var.cols x (term cols)
  Index row = 0;
  Index col = 0;
};

struct ScalarTerm {
  int var = 0;     // must be a 1x1 variable
  Matrix coeff;    // block-sized, symmetric
};

struct Block {
  Matrix constant;  // block-sized, symmetric
  std::vector<Term> terms;
  std::vector<ScalarTerm> scalar_terms;

  Index size() const { return constant.rows(); }
};

struct Problem {
  std::vector<Variable> variables;
  std::vector<Block> blocks;
  /// Objective sum_v <C_v, V_v> (Frobenius); empty entries mean zero.
  std::vector<Matrix> objective;

  int add_variable(Index rows, Index cols, bool symmetric = false);
  Block& add_block(Index size);
  void set_objective(int var, Matrix coeff);
};

/// One value per variable, shaped like the variable.
using Point = std::vector<Matrix>;

struct Options {
  double gap_tol = 1e-6;      // stop when (sum of block sizes) / t < gap_tol
  /// First barrier weight; <= 0 picks (sum of block sizes) / |objective| at
  /// the feasible start, so the first centering is at the starting scale.
  double t_init = 0.0;
  double t_growth = 20.0;
  double centering_tol = 1e-9;  // Newton decrement^2 / 2
  int max_newton = 2000;        // over both phases
  /// Stop at the first strictly feasible point.
  bool feasibility_only = false;
  /// JSON-lines per Newton step: phase, t, newton decrement, block minimum
  /// eigenvalues.
  std::ostream* diagnostics = nullptr;
};

struct Result {
  Point x;
  double objective = 0.0;
  double t = 0.0;
  int newton_steps = 0;
  bool used_phase1 = false;
  std::vector<double> min_eigenvalues;  // per block at x
};

/// Block values at x.
std::vector<Matrix> evaluate_blocks(const Problem& problem, const Point& x);

double objective_value(const Problem& problem, const Point& x);

/// Throws Infeasible when phase 1 cannot reach a strictly feasible point,
/// MaxIterations when the Newton budget runs out and NumericalFailure when a
/// line search stalls. `start` defaults to all zeros; an infeasible start
/// triggers phase 1.
Result solve(const Problem& problem, const Options& options = {},
             const std::optional<Point>& start = std::nullopt);

}  // namespace barysid::lmi
