#pragma once

#include <cstddef>
#include <vector>

namespace ecpipe {

/// Dense row-major matrix of 64-bit reals. All training arithmetic runs in
/// double precision; on-disk embeddings are float and widened on load.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

  double* row(std::size_t r) { return a.data() + r * cols; }
  const double* row(std::size_t r) const { return a.data() + r * cols; }
};

}  // namespace ecpipe
