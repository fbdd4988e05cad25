#pragma once

#include "mlvamp/types.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace mlvamp {

using Rng = std::mt19937_64;

// Deterministic child seed for an independent stream, keyed by a tag and an index.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

Vector gaussian_vector(Rng& rng, Index n, double sd = 1.0);
Matrix gaussian_matrix(Rng& rng, Index rows, Index cols, double sd = 1.0);

// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the sign of diag(R) fixed).
Matrix haar_orthogonal(Rng& rng, Index n);

}  // namespace mlvamp
