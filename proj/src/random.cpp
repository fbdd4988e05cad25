#include "mlvamp/random.hpp"

#include <Eigen/QR>

namespace mlvamp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ fnv1a(tag)) + index);
}

Vector gaussian_vector(Rng& rng, Index n, double sd) {
  std::normal_distribution<double> normal(0.0, sd);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Matrix gaussian_matrix(Rng& rng, Index rows, Index cols, double sd) {
  std::normal_distribution<double> normal(0.0, sd);
  Matrix m(rows, cols);
  // Column-major fill keeps the draw order independent of Eigen internals.
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

Matrix haar_orthogonal(Rng& rng, Index n) {
  const Matrix g = gaussian_matrix(rng, n, n);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix& r = qr.matrixQR();
  for (Index j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

}  // namespace mlvamp
