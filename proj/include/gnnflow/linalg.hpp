#pragma once

#include <vector>

#include "gnnflow/dense_matrix.hpp"

namespace gnnflow::linalg {

// Singular values of m in descending order (min(rows, cols) of them).
std::vector<double> singular_values(const DenseMatrix& m);

// The min(rows, cols)-th largest singular value. Throws DimensionError on an
// empty matrix.
double smallest_singular_value(const DenseMatrix& m);

// Smallest eigenvalue of the cols x cols Gram matrix BᵀB. Equals
// smallest_singular_value(B)² when rows >= cols and is exactly 0 when
// rows < cols (the Gram matrix is then rank deficient).
double smallest_gram_eigenvalue(const DenseMatrix& b);

struct LeastSquaresSolution {
    double residual = 0.0;  // min over Z of ||Z*A - Y||_F^2
    DenseMatrix minimizer;  // minimum-Frobenius-norm attaining Z
};

// Minimizes ||Z*A - Y||_F^2 over Z for A (p x n) and Y (m x n). Singular
// values below max(p, n) * eps * sigma_max are treated as zero, which makes
// the minimizer the minimum-norm one on rank-deficient inputs.
LeastSquaresSolution least_squares_residual(const DenseMatrix& a, const DenseMatrix& y);

}  // namespace gnnflow::linalg
