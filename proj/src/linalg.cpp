#include "gnnflow/linalg.hpp"

#include <Eigen/Core>
#include <Eigen/SVD>

#include <limits>
#include <string>

#include "gnnflow/common.hpp"

namespace gnnflow::linalg {

namespace {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EigenRowMajor> as_eigen(const DenseMatrix& m) {
    return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

void require_nonempty(const DenseMatrix& m, const char* op) {
    if (m.empty()) {
        throw DimensionError(std::string(op) + ": empty matrix");
    }
}

}  // namespace

std::vector<double> singular_values(const DenseMatrix& m) {
    require_nonempty(m, "singular_values");
    // BDCSVD falls back to Jacobi below its internal threshold; both are
    // deterministic for identical inputs.
    Eigen::BDCSVD<EigenRowMajor> svd(as_eigen(m));
    const auto& sv = svd.singularValues();
    return {sv.data(), sv.data() + sv.size()};
}

double smallest_singular_value(const DenseMatrix& m) {
    const auto sv = singular_values(m);
    return sv.back();
}

double smallest_gram_eigenvalue(const DenseMatrix& b) {
    require_nonempty(b, "smallest_gram_eigenvalue");
    if (b.rows() < b.cols()) return 0.0;
    const double s = smallest_singular_value(b);
    return s * s;
}

LeastSquaresSolution least_squares_residual(const DenseMatrix& a, const DenseMatrix& y) {
    require_nonempty(a, "least_squares_residual");
    require_nonempty(y, "least_squares_residual");
    if (a.cols() != y.cols()) {
        throw DimensionError("least_squares_residual: A has " + std::to_string(a.cols()) +
                             " columns, Y has " + std::to_string(y.cols()));
    }

    // Z*A ~ Y  <=>  Aᵀ Zᵀ ~ Yᵀ; solve with the truncated pseudo-inverse of A.
    Eigen::BDCSVD<EigenRowMajor> svd(as_eigen(a), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double sigma_max = sv.size() > 0 ? sv(0) : 0.0;
    const double tol = static_cast<double>(std::max(a.rows(), a.cols())) *
                       std::numeric_limits<double>::epsilon() * sigma_max;

    Eigen::VectorXd inv_sv(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        inv_sv(i) = sv(i) > tol ? 1.0 / sv(i) : 0.0;
    }

    // Z = Y * pinv(A) = Y * V * S⁺ * Uᵀ.
    const EigenRowMajor z =
        as_eigen(y) * svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();

    LeastSquaresSolution out;
    out.minimizer = DenseMatrix(static_cast<std::size_t>(z.rows()),
                                static_cast<std::size_t>(z.cols()),
                                {z.data(), z.data() + z.size()});
    const DenseMatrix fitted = out.minimizer * a;
    DenseMatrix diff = fitted;
    diff -= y;
    out.residual = diff.squared_frobenius_norm();
    return out;
}

}  // namespace gnnflow::linalg
