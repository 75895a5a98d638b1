#pragma once

#include <cstdint>
#include <vector>

#include "dwb/ot_core.hpp"

namespace dwb {

/// Pairwise squared W2 between sorted windows: A[i,j] = (1/n)||y_i - y_j||^2.
Matrix windowAffinity(const WindowedSeries& windows);

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Eigenvalues are
/// returned ascending with matching eigenvector columns.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};
SymmetricEigen jacobiEigen(const Matrix& symmetric, double tol = 1e-14,
                           int maxSweeps = 100);

struct KMeansResult {
  std::vector<int> labels;  // 0-based cluster index per row
  Matrix centers;           // k x d
  double inertia = 0.0;
  /// Inertia after each Lloyd iteration of the winning restart.
  std::vector<double> history;
};

/// Lloyd's algorithm with k-means++ seeding; best inertia over `restarts`.
/// A restart that empties a cluster is re-seeded, at most 20 times.
KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed,
                    int restarts = 10, int maxIters = 300);

/// Cluster labels (0-based) from a similarity matrix with entries in (0, 1]:
/// symmetric normalized Laplacian, K smallest eigenvectors, row
/// normalization, then k-means.
std::vector<int> spectralCluster(const Matrix& similarity, int k,
                                 std::uint64_t seed);

/// Column k is the entrywise mean of the windows labelled k.
Matrix initialPureStates(const Matrix& sortedWindows,
                         const std::vector<int>& labels, int k);

/// Every latent coordinate at 1/K.
Matrix initialLatentPath(int k, Index count);

}  // namespace dwb
