#include "dwb/init.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dwb/error.hpp"
#include "dwb/rng.hpp"

namespace dwb {

Matrix windowAffinity(const WindowedSeries& windows) {
  const Matrix& y = windows.sorted;
  const Index N = y.cols();
  const double n = static_cast<double>(y.rows());
  Matrix a = Matrix::Zero(N, N);
  for (Index i = 0; i < N; ++i) {
    for (Index j = i + 1; j < N; ++j) {
      const double d = (y.col(i) - y.col(j)).squaredNorm() / n;
      a(i, j) = d;
      a(j, i) = d;
    }
  }
  return a;
}

SymmetricEigen jacobiEigen(const Matrix& symmetric, double tol, int maxSweeps) {
  const Index n = symmetric.rows();
  if (symmetric.cols() != n) throw dataError("eigensolver needs a square matrix");
  Matrix a = 0.5 * (symmetric + symmetric.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double scale = std::max(a.norm(), std::numeric_limits<double>::min());

  for (int sweep = 0; sweep < maxSweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) <= tol * scale) break;

    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= std::numeric_limits<double>::min()) continue;
        // Rotation angle zeroing a(p, q); the smaller root keeps it stable.
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return a(i, i) < a(j, j); });
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (Index i = 0; i < n; ++i) {
    const Index src = order[static_cast<std::size_t>(i)];
    out.values[i] = a(src, src);
    out.vectors.col(i) = v.col(src);
  }
  return out;
}

namespace {

constexpr int kMaxReseeds = 20;

Matrix seedPlusPlus(const Matrix& points, int k, Rng& rng) {
  const Index rows = points.rows();
  Matrix centers(k, points.cols());
  centers.row(0) = points.row(
      static_cast<Index>(uniformIndex(rng, static_cast<std::uint64_t>(rows))));
  Vector nearest = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = nearest.sum();
    Index pick = rows - 1;
    if (total > 0.0) {
      const double target = uniformHalfOpen(rng) * total;
      double running = 0.0;
      for (Index i = 0; i < rows; ++i) {
        running += nearest[i];
        if (running > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(
          uniformIndex(rng, static_cast<std::uint64_t>(rows)));
    }
    centers.row(c) = points.row(pick);
    nearest = nearest.cwiseMin(
        (points.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

// Lloyd iterations from the given centers. Returns false if a cluster empties.
bool lloyd(const Matrix& points, Matrix& centers, std::vector<int>& labels,
           std::vector<double>& history, int maxIters) {
  const Index rows = points.rows();
  const int k = static_cast<int>(centers.rows());
  labels.assign(static_cast<std::size_t>(rows), -1);
  history.clear();
  for (int it = 0; it < maxIters; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (Index i = 0; i < rows; ++i) {
      int best = 0;
      double bestDist = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (points.row(i) - centers.row(c)).squaredNorm();
        if (d < bestDist) {
          bestDist = d;
          best = c;
        }
      }
      inertia += bestDist;
      if (labels[static_cast<std::size_t>(i)] != best) {
        labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    history.push_back(inertia);

    Matrix sums = Matrix::Zero(k, points.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < rows; ++i) {
      const int c = labels[static_cast<std::size_t>(i)];
      sums.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) return false;
      centers.row(c) =
          sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
    if (!changed && it > 0) break;
  }
  return true;
}

double inertiaOf(const Matrix& points, const Matrix& centers,
                 const std::vector<int>& labels) {
  double total = 0.0;
  for (Index i = 0; i < points.rows(); ++i)
    total += (points.row(i) - centers.row(labels[static_cast<std::size_t>(i)]))
                 .squaredNorm();
  return total;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed,
                    int restarts, int maxIters) {
  if (k < 1 || points.rows() < k)
    throw dataError("k-means needs 1 <= k <= number of points");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  if (k == 1) {
    best.labels.assign(static_cast<std::size_t>(points.rows()), 0);
    best.centers = points.colwise().mean();
    best.inertia = inertiaOf(points, best.centers, best.labels);
    best.history = {best.inertia};
    return best;
  }

  int reseeds = 0;
  for (int r = 0; r < restarts; ++r) {
    Rng rng(deriveSeed(seed, static_cast<std::uint64_t>(r)));
    Matrix centers;
    std::vector<int> labels;
    std::vector<double> history;
    for (;;) {
      centers = seedPlusPlus(points, k, rng);
      if (lloyd(points, centers, labels, history, maxIters)) break;
      if (++reseeds > kMaxReseeds) throw numericalError("degenerate clustering");
    }
    const double inertia = inertiaOf(points, centers, labels);
    if (inertia < best.inertia) {
      best.labels = std::move(labels);
      best.centers = std::move(centers);
      best.inertia = inertia;
      best.history = std::move(history);
    }
  }
  return best;
}

std::vector<int> spectralCluster(const Matrix& similarity, int k,
                                 std::uint64_t seed) {
  const Index N = similarity.rows();
  if (similarity.cols() != N) throw dataError("similarity must be square");
  if (k < 1 || k > N) throw dataError("cluster count must lie in [1, N]");
  if (k == 1) return std::vector<int>(static_cast<std::size_t>(N), 0);

  const Vector degree = similarity.rowwise().sum();
  Vector invSqrt(N);
  for (Index i = 0; i < N; ++i) {
    if (!(degree[i] > 0.0)) throw dataError("similarity row has zero degree");
    invSqrt[i] = 1.0 / std::sqrt(degree[i]);
  }
  Matrix laplacian = -(invSqrt.asDiagonal() * similarity * invSqrt.asDiagonal());
  laplacian.diagonal().array() += 1.0;

  const SymmetricEigen eig = jacobiEigen(laplacian);
  Matrix embedding = eig.vectors.leftCols(k);
  for (Index i = 0; i < N; ++i) {
    const double norm = embedding.row(i).norm();
    if (norm > 0.0) embedding.row(i) /= norm;
  }
  return kmeans(embedding, k, seed).labels;
}

Matrix initialPureStates(const Matrix& sortedWindows,
                         const std::vector<int>& labels, int k) {
  if (static_cast<Index>(labels.size()) != sortedWindows.cols())
    throw dataError("label count does not match window count");
  Matrix q = Matrix::Zero(sortedWindows.rows(), k);
  std::vector<Index> counts(static_cast<std::size_t>(k), 0);
  for (Index i = 0; i < sortedWindows.cols(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    if (c < 0 || c >= k) throw dataError("cluster label out of range");
    q.col(c) += sortedWindows.col(i);
    ++counts[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0)
      throw numericalError("empty cluster");
    q.col(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }
  return q;
}

Matrix initialLatentPath(int k, Index count) {
  return Matrix::Constant(k, count, 1.0 / static_cast<double>(k));
}

}  // namespace dwb
