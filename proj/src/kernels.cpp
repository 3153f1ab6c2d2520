#include "barysid/kernels.hpp"

#include <omp.h>

#include "barysid/errors.hpp"

namespace barysid::kernels {

namespace serial {

GridResponse response_grid(const FrequencyResponseEvaluator& eval,
                           std::span<const double> omegas) {
  GridResponse out{std::vector<Complex>(omegas.size()),
                   std::vector<char>(omegas.size(), 1)};
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    try {
      out.values[i] = eval.evaluate(omegas[i]);
    } catch (const SingularAtFrequency&) {
      out.ok[i] = 0;
    }
  }
  return out;
}

Matrix accumulate_covariance(Index dim, Index records,
                             const RecordStream& stream) {
  Matrix X = Matrix::Zero(dim, dim);
  for (Index k = 0; k < records; ++k) {
    Matrix Xk = Matrix::Zero(dim, dim);
    Index n = 0;
    stream(k, [&](const Matrix& chunk) {
      for (Index i = 0; i < chunk.cols(); ++i) {
        for (Index a = 0; a < dim; ++a) {
          for (Index b = 0; b < dim; ++b) {
            Xk(a, b) += chunk(a, i) * chunk(b, i);
          }
        }
      }
      n += chunk.cols();
    });
    if (n > 0) X += Xk / static_cast<double>(n);
  }
  return X;
}

}  // namespace serial

namespace omp {

GridResponse response_grid(const FrequencyResponseEvaluator& eval,
                           std::span<const double> omegas) {
  GridResponse out{std::vector<Complex>(omegas.size()),
                   std::vector<char>(omegas.size(), 1)};
  const auto count = static_cast<long>(omegas.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < count; ++i) {
    try {
      out.values[i] = eval.evaluate(omegas[i]);
    } catch (const SingularAtFrequency&) {
      out.ok[i] = 0;
    }
  }
  return out;
}

Matrix accumulate_covariance(Index dim, Index records,
                             const RecordStream& stream) {
  std::vector<Matrix> partial(static_cast<std::size_t>(records));
  std::vector<std::exception_ptr> failure(static_cast<std::size_t>(records));
#pragma omp parallel for schedule(dynamic, 1)
  for (Index k = 0; k < records; ++k) {
    try {
      Matrix Xk = Matrix::Zero(dim, dim);
      Index n = 0;
      stream(k, [&](const Matrix& chunk) {
        Xk.selfadjointView<Eigen::Lower>().rankUpdate(chunk);
        n += chunk.cols();
      });
      Xk.triangularView<Eigen::StrictlyUpper>() = Xk.transpose();
      if (n > 0) Xk /= static_cast<double>(n);
      partial[static_cast<std::size_t>(k)] = n > 0 ? Xk : Matrix::Zero(dim, dim);
    } catch (...) {
      failure[static_cast<std::size_t>(k)] = std::current_exception();
    }
  }
  for (const auto& f : failure) {
    if (f) std::rethrow_exception(f);
  }
  Matrix X = Matrix::Zero(dim, dim);
  for (const Matrix& Xk : partial) X += Xk;
  return X;
}

}  // namespace omp

}  // namespace barysid::kernels
