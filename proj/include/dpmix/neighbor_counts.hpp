// Exact closed-ball neighbour counts for many radii at once.
//
// counts(i, j) = #{ y in X : ‖q_i − y‖ ≤ radii[j] }, radii ascending. Distances
// are compared as squared norms of coordinate differences; tiled GEMM is used
// for speed, and any pair whose GEMM distance lands within rounding error of a
// threshold is recomputed directly, so the result matches the direct formula.
#ifndef DPMIX_NEIGHBOR_COUNTS_HPP
#define DPMIX_NEIGHBOR_COUNTS_HPP

#include <cstdint>
#include <vector>

#include "dpmix/core.hpp"

namespace dpmix {

using CountMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Every row of X against all of X (self included).
CountMatrix ball_counts_self(const Mat& X, const std::vector<double>& radii);

// Rows of Q against all of X.
CountMatrix ball_counts(const Mat& Q, const Mat& X, const std::vector<double>& radii);

// Reference implementation (direct loops), used by tests.
CountMatrix ball_counts_direct(const Mat& Q, const Mat& X, const std::vector<double>& radii);

}  // namespace dpmix

#endif  // DPMIX_NEIGHBOR_COUNTS_HPP
