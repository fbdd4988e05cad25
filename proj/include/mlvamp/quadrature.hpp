#pragma once

#include <span>
#include <vector>

namespace mlvamp::quad {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Probabilists' Gauss-Hermite rule: sum w_i f(x_i) ~ E f(X), X ~ N(0, 1). Cached per n.
const Rule& gauss_hermite(int n);

// Gauss-Legendre rule on [-1, 1]. Cached per n.
const Rule& gauss_legendre(int n);

}  // namespace mlvamp::quad
