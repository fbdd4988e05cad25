#include "mlvamp/quadrature.hpp"

#include "mlvamp/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <mutex>

namespace mlvamp::quad {

namespace {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights mu0 * v0^2.
Rule golub_welsch(int n, double mu0, double (*offdiag)(int)) {
  if (n < 1) throw ConfigError("quadrature rule needs at least one node");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max(n - 1, 1));
  for (int k = 1; k < n; ++k) sub(k - 1) = offdiag(k);
  Rule rule;
  if (n == 1) {
    rule.nodes = {0.0};
    rule.weights = {mu0};
    return rule;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeFromTridiagonal(diag, sub.head(n - 1), Eigen::ComputeEigenvectors);
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = eig.eigenvalues()(i);
    const double v0 = eig.eigenvectors()(0, i);
    rule.weights[i] = mu0 * v0 * v0;
  }
  // Symmetrize to remove eigen-solver noise.
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

double hermite_offdiag(int k) { return std::sqrt(static_cast<double>(k)); }

double legendre_offdiag(int k) {
  const double kk = static_cast<double>(k);
  return kk / std::sqrt(4.0 * kk * kk - 1.0);
}

const Rule& cached(std::map<int, Rule>& cache, int n, double mu0, double (*offdiag)(int)) {
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, golub_welsch(n, mu0, offdiag)).first;
  return it->second;
}

}  // namespace

const Rule& gauss_hermite(int n) {
  static std::map<int, Rule> cache;
  return cached(cache, n, 1.0, &hermite_offdiag);
}

const Rule& gauss_legendre(int n) {
  static std::map<int, Rule> cache;
  return cached(cache, n, 2.0, &legendre_offdiag);
}

}  // namespace mlvamp::quad
