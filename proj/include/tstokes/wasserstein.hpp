#pragma once

#include "tstokes/cloud.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace tstokes {

// Largest count for which the exact assignment path is used.
inline constexpr std::size_t kExactAssignmentLimit = 4096;

struct Assignment {
  std::vector<std::size_t> row_to_col;
  double cost = 0.0;  // recomputed from the matching, not from the duals
};

// Min-cost perfect matching on a dense n x n row-major cost matrix
// (shortest augmenting paths with potentials, O(n^3)). Ties go to the
// lowest column index.
Assignment solve_assignment(std::span<const double> cost, std::size_t n);

struct W1Result {
  double value = 0.0;  // exact cost, or the upper bound when !exact
  double lower = 0.0;
  double upper = 0.0;
  bool exact = false;
  std::vector<std::size_t> matching;  // a[i] -> b[matching[i]], exact path only
};

// Wasserstein-1 distance between two clouds of equal total mass. Equal
// counts with uniform weights (n <= kExactAssignmentLimit) are solved
// exactly; otherwise a greedy transport plan gives the upper bound and
// sliced one-dimensional distances give a lower bound.
W1Result wasserstein1(const ParticleCloud& a, const ParticleCloud& b);

// One-dimensional W1 between weighted point sets (exact, CDF integral).
double wasserstein1_1d(std::span<const double> xa, std::span<const double> wa,
                       std::span<const double> xb, std::span<const double> wb);

}  // namespace tstokes
