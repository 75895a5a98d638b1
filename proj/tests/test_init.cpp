#include <random>
#include <set>

#include "helpers.hpp"

#include "dwb/init.hpp"
#include "dwb/model.hpp"

using namespace dwb;
using testing::requireError;

namespace {

Matrix randomSymmetric(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(n, n);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  return 0.5 * (a + a.transpose());
}

// Partition-invariant check that clusterings agree up to relabeling.
bool samePartition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

}  // namespace

TEST_CASE("Jacobi eigendecomposition reconstructs the matrix") {
  std::mt19937_64 rng(41);
  for (Index n : {1, 2, 3, 5, 12, 30}) {
    const Matrix a = randomSymmetric(rng, n);
    const SymmetricEigen e = jacobiEigen(a);
    const Matrix rebuilt = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    CHECK((rebuilt - a).cwiseAbs().maxCoeff() <= 1e-11);
    CHECK((e.vectors.transpose() * e.vectors - Matrix::Identity(n, n))
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
    for (Index i = 1; i < n; ++i) CHECK(e.values[i - 1] <= e.values[i]);
  }
}

TEST_CASE("3x3 eigenvalues are roots of the characteristic polynomial") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = randomSymmetric(rng, 3);
    const SymmetricEigen e = jacobiEigen(a);
    // det(A - t I) = -t^3 + tr t^2 - c2 t + det
    const double tr = a.trace();
    const double c2 = a(0, 0) * a(1, 1) + a(0, 0) * a(2, 2) + a(1, 1) * a(2, 2) -
                      a(0, 1) * a(0, 1) - a(0, 2) * a(0, 2) - a(1, 2) * a(1, 2);
    const double det = a.determinant();
    for (Index i = 0; i < 3; ++i) {
      const double t = e.values[i];
      CHECK(std::abs(-t * t * t + tr * t * t - c2 * t + det) <= 1e-10);
    }
    CHECK(e.values.sum() == doctest::Approx(tr).scale(1.0));
    CHECK(e.values.prod() == doctest::Approx(det).scale(1.0));
  }
}

TEST_CASE("Jacobi handles diagonal and repeated eigenvalues") {
  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 3.0, 1.0, 1.0;
  const SymmetricEigen e = jacobiEigen(d);
  CHECK(e.values[0] == 1.0);
  CHECK(e.values[2] == 3.0);
  requireError([] { jacobiEigen(Matrix::Zero(2, 3)); }, "square");
}

TEST_CASE("k-means separates well-spaced blobs deterministically") {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> noise(0.0, 0.05);
  Matrix pts(60, 2);
  std::vector<int> truth;
  for (Index i = 0; i < 60; ++i) {
    const int c = static_cast<int>(i % 3);
    pts(i, 0) = 5.0 * c + noise(rng);
    pts(i, 1) = (c == 1 ? 4.0 : 0.0) + noise(rng);
    truth.push_back(c);
  }
  const KMeansResult a = kmeans(pts, 3, 7);
  const KMeansResult b = kmeans(pts, 3, 7);
  CHECK(samePartition(a.labels, truth));
  CHECK(a.labels == b.labels);
  for (std::size_t i = 1; i < a.history.size(); ++i)
    CHECK(a.history[i] <= a.history[i - 1] + 1e-12);
  CHECK(std::set<int>(a.labels.begin(), a.labels.end()).size() == 3);
}

TEST_CASE("k-means edge cases") {
  const Matrix pts = Matrix::Random(5, 2);
  const KMeansResult one = kmeans(pts, 1, 0);
  CHECK(std::set<int>(one.labels.begin(), one.labels.end()) == std::set<int>{0});
  requireError([&] { kmeans(pts, 6, 0); }, "k <= number of points");
  // Identical points cannot fill two clusters.
  requireError([] { kmeans(Matrix::Ones(4, 2), 2, 0); }, "degenerate clustering",
               ErrorKind::Numerical);
}

TEST_CASE("spectral clustering recovers block structure") {
  const Index N = 12;
  Matrix s = Matrix::Constant(N, N, 1e-4);
  for (Index i = 0; i < N; ++i)
    for (Index j = 0; j < N; ++j)
      if (i / 4 == j / 4) s(i, j) = 1.0;
  const std::vector<int> labels = spectralCluster(s, 3, 1);
  std::vector<int> truth;
  for (Index i = 0; i < N; ++i) truth.push_back(static_cast<int>(i / 4));
  CHECK(samePartition(labels, truth));
  Matrix zero = s;
  zero.row(2).setZero();
  requireError([&] { spectralCluster(zero, 3, 1); }, "zero degree");
}

TEST_CASE("window affinity holds pairwise squared W2") {
  WindowedSeries w;
  w.windowSize = 2;
  w.sorted.resize(2, 3);
  w.sorted << 0, 1, 0, 1, 2, 3;
  w.starts = {0, 2, 4};
  const Matrix a = windowAffinity(w);
  CHECK(a(0, 0) == 0.0);
  CHECK(a(0, 1) == doctest::Approx(1.0));
  CHECK(a(0, 2) == doctest::Approx(2.0));
  CHECK(a(2, 0) == a(0, 2));
}

TEST_CASE("initial pure states average their clusters") {
  Matrix y(2, 4);
  y << 0, 2, 10, 12, 1, 3, 11, 13;
  const Matrix q = initialPureStates(y, {0, 0, 1, 1}, 2);
  CHECK(q(0, 0) == 1.0);
  CHECK(q(1, 1) == 12.0);
  requireError([&] { initialPureStates(y, {0, 0, 0, 0}, 2); }, "empty cluster",
               ErrorKind::Numerical);
  requireError([&] { initialPureStates(y, {0, 1}, 2); }, "label count");
  const Matrix x = initialLatentPath(4, 3);
  CHECK(x(2, 1) == 0.25);
}
