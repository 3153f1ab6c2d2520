#pragma once

#include <functional>
#include <span>
#include <vector>

#include "barysid/lti.hpp"

// Data-parallel inner loops. Every kernel has a plain serial version, kept as
// the reference the OpenMP version is tested and benchmarked against. The two
// agree to rounding; the OpenMP result does not depend on the thread count
// because reductions combine per-item partials in item order.
namespace barysid::kernels {

struct GridResponse {
  std::vector<Complex> values;
  std::vector<char> ok;  // 0 where the evaluator hit an undamped pole
};

/// Streams the channel samples of one record, in time order, as a sequence of
/// (channels x chunk) blocks handed to `sink`.
using ChunkSink = std::function<void(const Matrix& chunk)>;
using RecordStream = std::function<void(Index record, const ChunkSink& sink)>;

namespace serial {

GridResponse response_grid(const FrequencyResponseEvaluator& eval,
                           std::span<const double> omegas);

/// X = sum_k (1/n_k) sum_i x_i x_i^T, one sample at a time.
Matrix accumulate_covariance(Index dim, Index records,
                             const RecordStream& stream);

}  // namespace serial

namespace omp {

GridResponse response_grid(const FrequencyResponseEvaluator& eval,
                           std::span<const double> omegas);

/// Same sum; records in parallel, rank-k updates per chunk.
Matrix accumulate_covariance(Index dim, Index records,
                             const RecordStream& stream);

}  // namespace omp

}  // namespace barysid::kernels
