#pragma once

// Random instances and oracles shared by the unit tests and the acceptance
// runner.

#include <algorithm>
#include <cmath>
#include <random>

#include "dwb/ot_core.hpp"

namespace testing {

using dwb::Index;
using dwb::Matrix;
using dwb::Vector;

inline Vector randomSorted(std::mt19937_64& rng, Index n, double scale = 3.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(n);
  for (Index j = 0; j < n; ++j) v[j] = normal(rng);
  std::sort(v.begin(), v.end());
  return v;
}

inline Vector randomSimplex(std::mt19937_64& rng, Index k) {
  std::exponential_distribution<double> expo(1.0);
  Vector v(k);
  for (Index i = 0; i < k; ++i) v[i] = expo(rng);
  return v / v.sum();
}

inline Matrix randomStates(std::mt19937_64& rng, Index n, Index k) {
  Matrix q(n, k);
  for (Index c = 0; c < k; ++c) q.col(c) = randomSorted(rng, n);
  return q;
}

inline Matrix randomLatent(std::mt19937_64& rng, Index k, Index count) {
  Matrix x(k, count);
  for (Index i = 0; i < count; ++i) x.col(i) = randomSimplex(rng, k);
  return x;
}

/// Independent step-function oracle: on the common refinement with L = n*m
/// cells, both step functions are constant on every cell.
inline double lcmStepW2(const Vector& a, const Vector& b) {
  const Index n = a.size(), m = b.size(), L = n * m;
  double total = 0.0;
  for (Index i = 0; i < L; ++i) {
    const double d = a[i / m] - b[i / n];
    total += d * d;
  }
  return total / static_cast<double>(L);
}

}  // namespace testing
