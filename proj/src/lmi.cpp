#include "barysid/lmi.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "barysid/errors.hpp"

namespace barysid::lmi {

int Problem::add_variable(Index rows, Index cols, bool symmetric) {
  if (symmetric && rows != cols) {
    throw ValidationError("lmi: symmetric variable must be square");
  }
  variables.push_back({rows, cols, symmetric});
  objective.emplace_back();
  return static_cast<int>(variables.size()) - 1;
}

Block& Problem::add_block(Index size) {
  blocks.push_back(Block{Matrix::Zero(size, size), {}, {}});
  return blocks.back();
}

void Problem::set_objective(int var, Matrix coeff) {
  objective.at(static_cast<std::size_t>(var)) = std::move(coeff);
}

namespace {

// Maps between the full entry vector (every entry of every variable) and the
// reduced coordinates (upper triangle for symmetric variables).
struct Layout {
  std::vector<Index> full_offset;
  Index full_size = 0;
  std::vector<std::vector<Index>> reduced_to_full;

  explicit Layout(const Problem& p) {
    for (const Variable& v : p.variables) {
      full_offset.push_back(full_size);
      const Index base = full_size;
      full_size += v.rows * v.cols;
      if (v.symmetric) {
        for (Index a = 0; a < v.rows; ++a) {
          for (Index b = a; b < v.cols; ++b) {
            if (a == b) {
              reduced_to_full.push_back({base + a * v.cols + b});
            } else {
              reduced_to_full.push_back(
                  {base + a * v.cols + b, base + b * v.cols + a});
            }
          }
        }
      } else {
        for (Index a = 0; a < v.rows; ++a) {
          for (Index b = 0; b < v.cols; ++b) {
            reduced_to_full.push_back({base + a * v.cols + b});
          }
        }
      }
    }
  }

  Index reduced_size() const { return static_cast<Index>(reduced_to_full.size()); }

  Vector reduce(const Vector& full) const {
    Vector r(reduced_size());
    for (Index i = 0; i < r.size(); ++i) {
      double s = 0.0;
      for (Index f : reduced_to_full[static_cast<std::size_t>(i)]) s += full(f);
      r(i) = s;
    }
    return r;
  }

  // Sums the columns of `full` that map to each reduced unknown.
  Matrix reduce_cols(const Matrix& full) const {
    const Index m = reduced_size();
    Matrix cols(full.rows(), m);
    for (Index j = 0; j < m; ++j) {
      const auto& fj = reduced_to_full[static_cast<std::size_t>(j)];
      cols.col(j) = full.col(fj[0]);
      for (std::size_t k = 1; k < fj.size(); ++k) cols.col(j) += full.col(fj[k]);
    }
    return cols;
  }

  Matrix reduce(const Matrix& full) const {
    const Matrix half = reduce_cols(full).transpose();
    return reduce_cols(half).transpose();
  }

  Point expand(const Problem& p, const Vector& x) const {
    Vector full(full_size);
    for (Index i = 0; i < x.size(); ++i) {
      for (Index f : reduced_to_full[static_cast<std::size_t>(i)]) full(f) = x(i);
    }
    Point pt;
    for (std::size_t v = 0; v < p.variables.size(); ++v) {
      const Variable& var = p.variables[v];
      Matrix M(var.rows, var.cols);
      for (Index a = 0; a < var.rows; ++a) {
        for (Index b = 0; b < var.cols; ++b) {
          M(a, b) = full(full_offset[v] + a * var.cols + b);
        }
      }
      pt.push_back(std::move(M));
    }
    return pt;
  }

  Vector flatten(const Problem& p, const Point& pt) const {
    Vector x(reduced_size());
    Index i = 0;
    for (std::size_t v = 0; v < p.variables.size(); ++v) {
      const Variable& var = p.variables[v];
      const Matrix& M = pt.at(v);
      if (M.rows() != var.rows || M.cols() != var.cols) {
        throw DimensionMismatch("lmi: start point has wrong variable shape");
      }
      for (Index a = 0; a < var.rows; ++a) {
        for (Index b = var.symmetric ? a : 0; b < var.cols; ++b) {
          x(i++) = var.symmetric ? 0.5 * (M(a, b) + M(b, a)) : M(a, b);
        }
      }
    }
    return x;
  }
};

void validate(const Problem& p) {
  const auto nv = static_cast<int>(p.variables.size());
  for (const Block& blk : p.blocks) {
    const Index n = blk.size();
    if (blk.constant.cols() != n) throw DimensionMismatch("lmi: block constant not square");
    for (const Term& t : blk.terms) {
      if (t.var < 0 || t.var >= nv) throw ValidationError("lmi: bad variable index");
      const Variable& v = p.variables[static_cast<std::size_t>(t.var)];
      if (t.left.cols() != v.rows || t.right.rows() != v.cols ||
          t.row + t.left.rows() > n || t.col + t.right.cols() > n ||
          t.row < 0 || t.col < 0) {
        throw DimensionMismatch("lmi: term shape does not fit its block");
      }
    }
    for (const ScalarTerm& s : blk.scalar_terms) {
      if (s.var < 0 || s.var >= nv) throw ValidationError("lmi: bad variable index");
      const Variable& v = p.variables[static_cast<std::size_t>(s.var)];
      if (v.rows != 1 || v.cols != 1) {
        throw DimensionMismatch("lmi: scalar term on a non-scalar variable");
      }
      if (s.coeff.rows() != n || s.coeff.cols() != n) {
        throw DimensionMismatch("lmi: scalar term coefficient size");
      }
    }
  }
  if (p.objective.size() != p.variables.size()) {
    throw DimensionMismatch("lmi: objective count differs from variables");
  }
  for (std::size_t v = 0; v < p.variables.size(); ++v) {
    const Matrix& c = p.objective[v];
    if (c.size() != 0 && (c.rows() != p.variables[v].rows ||
                          c.cols() != p.variables[v].cols)) {
      throw DimensionMismatch("lmi: objective coefficient shape");
    }
  }
}

Matrix block_value(const Block& blk, const Point& x) {
  Matrix F = blk.constant;
  for (const Term& t : blk.terms) {
    const Matrix X = t.left * x[static_cast<std::size_t>(t.var)] * t.right;
    F.block(t.row, t.col, X.rows(), X.cols()) += 0.5 * X;
    F.block(t.col, t.row, X.cols(), X.rows()) += 0.5 * X.transpose();
  }
  for (const ScalarTerm& s : blk.scalar_terms) {
    F += x[static_cast<std::size_t>(s.var)](0, 0) * s.coeff;
  }
  return F;
}

Vector objective_vector(const Problem& p, const Layout& layout) {
  Vector full = Vector::Zero(layout.full_size);
  for (std::size_t v = 0; v < p.variables.size(); ++v) {
    const Matrix& c = p.objective[v];
    if (c.size() == 0) continue;
    const Variable& var = p.variables[v];
    for (Index a = 0; a < var.rows; ++a) {
      for (Index b = 0; b < var.cols; ++b) {
        full(layout.full_offset[v] + a * var.cols + b) = c(a, b);
      }
    }
  }
  return layout.reduce(full);
}

struct BlockFactor {
  Matrix inverse;
  double logdet = 0.0;
};

bool factor(const Matrix& F, BlockFactor& out) {
  Eigen::LLT<Matrix> llt(F);
  if (llt.info() != Eigen::Success) return false;
  const auto& L = llt.matrixLLT();
  double ld = 0.0;
  for (Index i = 0; i < L.rows(); ++i) {
    const double d = L(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    ld += std::log(d);
  }
  out.logdet = 2.0 * ld;
  out.inverse = llt.solve(Matrix::Identity(F.rows(), F.cols()));
  return true;
}

// Gradient and Hessian of -log det F with respect to the full entries.
void add_derivatives(const Layout& layout, const Block& blk,
                     const Matrix& Si, Vector& g, Matrix* H) {
  auto term_full_offset = [&](int var) {
    return layout.full_offset[static_cast<std::size_t>(var)];
  };
  for (const Term& t : blk.terms) {
    const Matrix G =
        t.left.transpose() *
        Si.block(t.row, t.col, t.left.rows(), t.right.cols()) *
        t.right.transpose();
    const Index off = term_full_offset(t.var);
    const Index cols = G.cols();
    for (Index a = 0; a < G.rows(); ++a) {
      for (Index b = 0; b < cols; ++b) g(off + a * cols + b) -= G(a, b);
    }
  }
  std::vector<Matrix> W;
  for (const ScalarTerm& s : blk.scalar_terms) {
    g(term_full_offset(s.var)) -= (Si.cwiseProduct(s.coeff)).sum();
    if (H) W.push_back(Si * s.coeff * Si);
  }
  if (!H) return;

  // H accumulates sum_{t1 < t2} h(t1, t2) + sum_t h(t, t) / 2; the caller
  // adds the transpose.
  Matrix& Hm = *H;
  const auto& terms = blk.terms;
  for (std::size_t i1 = 0; i1 < terms.size(); ++i1) {
    const Term& t1 = terms[i1];
    const Index r1 = t1.left.cols(), c1 = t1.right.rows();
    const Index off1 = term_full_offset(t1.var);
    for (std::size_t i2 = i1; i2 < terms.size(); ++i2) {
      const Term& t2 = terms[i2];
      const Index r2 = t2.left.cols(), c2 = t2.right.rows();
      const Index off2 = term_full_offset(t2.var);
      const Index n_i1 = t1.left.rows(), n_j1 = t1.right.cols();
      const Index n_i2 = t2.left.rows(), n_j2 = t2.right.cols();
      const Matrix P1 = t2.right * Si.block(t2.col, t1.row, n_j2, n_i1) * t1.left;
      const Matrix P2 = t1.right * Si.block(t1.col, t2.row, n_j1, n_i2) * t2.left;
      const Matrix P3 =
          t2.left.transpose() * Si.block(t2.row, t1.row, n_i2, n_i1) * t1.left;
      const Matrix P4 =
          t1.right * Si.block(t1.col, t2.col, n_j1, n_j2) * t2.right.transpose();
      const double w = (i1 == i2) ? 0.25 : 0.5;
      for (Index c = 0; c < r2; ++c) {
        for (Index d = 0; d < c2; ++d) {
          const Index col = off2 + c * c2 + d;
          for (Index a = 0; a < r1; ++a) {
            const double p1 = w * P1(d, a);
            const double p3 = w * P3(c, a);
            const Index row0 = off1 + a * c1;
            for (Index b = 0; b < c1; ++b) {
              Hm(row0 + b, col) += p1 * P2(b, c) + p3 * P4(b, d);
            }
          }
        }
      }
    }
  }
  const auto& scalars = blk.scalar_terms;
  for (std::size_t s = 0; s < scalars.size(); ++s) {
    const Index is = term_full_offset(scalars[s].var);
    for (const Term& t2 : terms) {
      const Matrix V =
          t2.left.transpose() *
          W[s].block(t2.row, t2.col, t2.left.rows(), t2.right.cols()) *
          t2.right.transpose();
      const Index off2 = term_full_offset(t2.var);
      for (Index c = 0; c < V.rows(); ++c) {
        for (Index d = 0; d < V.cols(); ++d) {
          Hm(is, off2 + c * V.cols() + d) += V(c, d);
        }
      }
    }
    for (std::size_t s2 = s; s2 < scalars.size(); ++s2) {
      const double v = W[s].cwiseProduct(scalars[s2].coeff).sum();
      Hm(is, term_full_offset(scalars[s2].var)) += (s == s2 ? 0.5 : 1.0) * v;
    }
  }
}

struct Evaluation {
  bool feasible = false;
  double value = 0.0;  // t c^T x - sum log det
  Vector grad;
  Matrix hess;
};

class BarrierSolver {
 public:
  BarrierSolver(const Problem& p, const Options& opt)
      : p_(p), opt_(opt), layout_(p), c_(objective_vector(p, layout_)) {
    for (const Block& b : p.blocks) total_size_ += static_cast<double>(b.size());
  }

  const Layout& layout() const { return layout_; }
  const Vector& cost() const { return c_; }
  double total_size() const { return total_size_; }

  bool feasible(const Vector& x) const {
    const Point pt = layout_.expand(p_, x);
    BlockFactor f;
    for (const Block& b : p_.blocks) {
      if (!factor(block_value(b, pt), f)) return false;
    }
    return true;
  }

  Evaluation evaluate(const Vector& x, double t, bool derivatives) const {
    Evaluation ev;
    const Point pt = layout_.expand(p_, x);
    ev.value = t * c_.dot(x);
    Vector g_full = Vector::Zero(layout_.full_size);
    Matrix H_full;
    if (derivatives) H_full = Matrix::Zero(layout_.full_size, layout_.full_size);
    for (const Block& b : p_.blocks) {
      BlockFactor f;
      if (!factor(block_value(b, pt), f)) return ev;
      ev.value -= f.logdet;
      if (derivatives) {
        add_derivatives(layout_, b, f.inverse, g_full, &H_full);
      }
    }
    ev.feasible = true;
    if (derivatives) {
      ev.grad = t * c_ + layout_.reduce(g_full);
      const Matrix Hr = layout_.reduce(H_full);
      ev.hess = Hr + Hr.transpose();
    }
    return ev;
  }

  std::vector<double> min_eigenvalues(const Vector& x) const {
    const Point pt = layout_.expand(p_, x);
    std::vector<double> out;
    for (const Block& b : p_.blocks) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(block_value(b, pt),
                                               Eigen::EigenvaluesOnly);
      out.push_back(es.eigenvalues()(0));
    }
    return out;
  }

  void log_step(int phase, double t, double decrement, const Vector& x) const {
    if (!opt_.diagnostics) return;
    std::ostream& os = *opt_.diagnostics;
    os.precision(17);
    os << "{\"schema_version\":1,\"phase\":" << phase << ",\"t\":" << t
       << ",\"newton_decrement\":" << decrement << ",\"min_eigs\":[";
    const auto eigs = min_eigenvalues(x);
    for (std::size_t i = 0; i < eigs.size(); ++i) {
      os << (i ? "," : "") << eigs[i];
    }
    os << "]}\n";
  }

  // Damped Newton centering at fixed t. `stop` may end it early.
  template <typename Stop>
  bool center(Vector& x, double t, int phase, int& steps, Stop stop) const {
    int full_steps = 0;
    for (;;) {
      if (steps >= opt_.max_newton) {
        throw MaxIterations("lmi: Newton step budget exhausted (t = " +
                            std::to_string(t) + ")");
      }
      Evaluation ev = evaluate(x, t, false);
      if (!ev.feasible) throw NumericalFailure("lmi: iterate left the feasible set");
      const Direction dir = scaled_direction(x, t);
      const Vector& dx = dir.dx;
      const double slope = dir.slope;
      const double dec2 = -slope;
      log_step(phase, t, std::sqrt(std::max(dec2, 0.0)), x);
      if (dec2 / 2.0 <= opt_.centering_tol) return false;
      double s = 1.0;
      Vector trial = x + dx;
      while (!feasible(trial)) {
        s *= 0.5;
        if (s < 1e-20) throw NumericalFailure("lmi: no feasible step along Newton direction");
        trial = x + s * dx;
      }
      // Inside the quadratic convergence region of a self-concordant barrier
      // the full step always decreases it; the barrier values themselves are
      // too close to compare reliably there.
      if (std::sqrt(std::max(dec2, 0.0)) < 0.25 && s == 1.0) {
        // Rounding floor of an ill-conditioned Hessian: accept the point once
        // repeated full steps stop reducing the decrement.
        if (++full_steps > 6 && dec2 < 2.5e-3) return false;
        x = trial;
        ++steps;
        if (stop(x)) return true;
        continue;
      }
      Evaluation et = evaluate(trial, t, false);
      while (!(et.value <= ev.value + 0.25 * s * slope)) {
        s *= 0.5;
        if (s < 1e-20) {
          // Rounding floor: the decrease predicted by the model is below the
          // resolution of the barrier value.
          if (dec2 < 1e-6) return false;
          throw NumericalFailure("lmi: line search stalled");
        }
        trial = x + s * dx;
        et = evaluate(trial, t, false);
      }
      x = trial;
      ++steps;
      if (stop(x)) return true;
    }
  }

 private:
  struct Direction {
    Vector dx;
    double slope = 0.0;  // gradient . dx, minus the squared Newton decrement
  };

  // Newton step computed after the congruence V = S Vh S^T that maps every
  // positive definite symmetric variable to Vh = I (S its Cholesky factor).
  // The step is invariant under this change of variables, but the Hessian
  // of an iterate with widely spread eigenvalues is far better conditioned
  // in the new coordinates.
  Direction scaled_direction(const Vector& x, double t) const {
    const Point pt = layout_.expand(p_, x);
    const std::size_t nv = p_.variables.size();
    std::vector<Matrix> S(nv);
    Problem ps = p_;
    Point pth = pt;
    for (std::size_t v = 0; v < nv; ++v) {
      const Variable& var = p_.variables[v];
      if (!var.symmetric || var.rows < 2) continue;
      Eigen::LLT<Matrix> llt(pt[v]);
      if (llt.info() != Eigen::Success) continue;
      S[v] = llt.matrixL();
      if (!(S[v].diagonal().minCoeff() > 0.0)) {
        S[v].resize(0, 0);
        continue;
      }
      pth[v] = Matrix::Identity(var.rows, var.cols);
      if (ps.objective[v].size() != 0) {
        ps.objective[v] = S[v].transpose() * ps.objective[v] * S[v];
      }
    }
    for (Block& b : ps.blocks) {
      for (Term& term : b.terms) {
        const Matrix& Sv = S[static_cast<std::size_t>(term.var)];
        if (Sv.size() == 0) continue;
        term.left = term.left * Sv;
        term.right = Sv.transpose() * term.right;
      }
    }
    const BarrierSolver scaled(ps, opt_);
    const Evaluation ev = scaled.evaluate(layout_.flatten(ps, pth), t, true);
    if (!ev.feasible) throw NumericalFailure("lmi: iterate left the feasible set");
    const Vector dh = newton_direction(ev);
    Point dpt = layout_.expand(p_, dh);
    for (std::size_t v = 0; v < nv; ++v) {
      if (S[v].size() != 0) dpt[v] = S[v] * dpt[v] * S[v].transpose();
    }
    return {layout_.flatten(p_, dpt), ev.grad.dot(dh)};
  }

  static Vector newton_direction(const Evaluation& ev) {
    // Jacobi equilibration: unknowns of very different magnitude otherwise
    // cost most of the accuracy of the Cholesky solve.
    Vector d = ev.hess.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    Matrix H = d.asDiagonal() * ev.hess * d.asDiagonal();
    const Vector g = d.cwiseProduct(ev.grad);
    Eigen::LLT<Matrix> llt(H);
    if (llt.info() == Eigen::Success) return -d.cwiseProduct(llt.solve(g));
    H.diagonal().array() += 1e-12;
    Eigen::LDLT<Matrix> ldlt(H);
    if (ldlt.info() != Eigen::Success) {
      throw NumericalFailure("lmi: singular Newton system");
    }
    return -d.cwiseProduct(ldlt.solve(g));
  }

  const Problem& p_;
  const Options& opt_;
  Layout layout_;
  Vector c_;
  double total_size_ = 0.0;
};

// Phase 1: minimize s over F_i(x) + s I > 0 and s > -floor.
Vector find_feasible(const Problem& p, const Options& opt, const Point& x0,
                     int& steps) {
  const BarrierSolver base(p, opt);
  const Vector xb = base.layout().flatten(p, x0);
  double lam = std::numeric_limits<double>::infinity();
  for (double e : base.min_eigenvalues(xb)) lam = std::min(lam, e);
  const double s0 = std::max(-lam, 0.0) * 1.5 + std::max(1.0, std::abs(lam)) * 0.1;

  Problem aux = p;
  const int s_var = aux.add_variable(1, 1);
  for (Block& b : aux.blocks) {
    b.scalar_terms.push_back({s_var, Matrix::Identity(b.size(), b.size())});
  }
  Block& floor_blk = aux.add_block(1);
  floor_blk.constant(0, 0) = 2.0 * s0;
  floor_blk.scalar_terms.push_back({s_var, Matrix::Ones(1, 1)});
  // The original objective stays in with a small weight: without it, any
  // direction along which the constraints only grow (typically a free
  // epigraph variable and what it bounds) is a recession direction of the
  // barrier and the centering diverges.
  const double c0 = std::abs(objective_value(p, x0));
  const double eps = 1e-3 * std::min(1.0, s0 / std::max(c0, 1e-300));
  for (auto& c : aux.objective) {
    if (c.size() != 0) c *= eps;
  }
  aux.set_objective(s_var, Matrix::Ones(1, 1));

  Point start = x0;
  start.push_back(Matrix::Constant(1, 1, s0));
  const BarrierSolver solver(aux, opt);
  Vector x = solver.layout().flatten(aux, start);
  const Index s_idx = x.size() - 1;
  const double target = -1e-3 * s0;

  auto done = [&](const Vector& z) {
    return z(s_idx) < target && base.feasible(z.head(s_idx));
  };
  double t = solver.total_size() / s0;
  for (;;) {
    if (solver.center(x, t, 1, steps, done)) return x.head(s_idx);
    if (solver.total_size() / t < opt.gap_tol * s0) break;
    t *= opt.t_growth;
  }
  if (x(s_idx) < 0.0 && base.feasible(x.head(s_idx))) return x.head(s_idx);
  std::ostringstream os;
  os << "lmi: no strictly feasible point (phase-1 optimum s = " << x(s_idx)
     << ", block minimum eigenvalues";
  for (double e : base.min_eigenvalues(x.head(s_idx))) os << " " << e;
  os << ")";
  throw Infeasible(os.str());
}

}  // namespace

std::vector<Matrix> evaluate_blocks(const Problem& problem, const Point& x) {
  validate(problem);
  std::vector<Matrix> out;
  for (const Block& b : problem.blocks) out.push_back(block_value(b, x));
  return out;
}

double objective_value(const Problem& problem, const Point& x) {
  double v = 0.0;
  for (std::size_t i = 0; i < problem.variables.size(); ++i) {
    if (problem.objective[i].size() != 0) {
      v += problem.objective[i].cwiseProduct(x.at(i)).sum();
    }
  }
  return v;
}

Result solve(const Problem& problem, const Options& options,
             const std::optional<Point>& start) {
  validate(problem);
  BarrierSolver solver(problem, options);
  Point x0;
  if (start) {
    x0 = *start;
  } else {
    for (const Variable& v : problem.variables) x0.push_back(Matrix::Zero(v.rows, v.cols));
  }
  Result res;
  int steps = 0;
  Vector x = solver.layout().flatten(problem, x0);
  if (!solver.feasible(x)) {
    x = find_feasible(problem, options, x0, steps);
    res.used_phase1 = true;
  }

  double t = options.t_init;
  if (!(t > 0.0)) {
    const double c0 = std::abs(solver.cost().dot(x));
    t = c0 > 0.0 ? solver.total_size() / c0 : 1.0;
  }
  if (!options.feasibility_only) {
    auto never = [](const Vector&) { return false; };
    for (;;) {
      solver.center(x, t, 2, steps, never);
      if (solver.total_size() / t < options.gap_tol) break;
      t *= options.t_growth;
    }
  }
  res.x = solver.layout().expand(problem, x);
  res.objective = solver.cost().dot(x);
  res.t = t;
  res.newton_steps = steps;
  res.min_eigenvalues = solver.min_eigenvalues(x);
  return res;
}

}  // namespace barysid::lmi
