#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace gnnflow {

// Dense row-major matrix of doubles. Construction from raw entries validates
// finiteness; arithmetic between existing matrices is closed and unchecked.
// All reductions owned by this class run in row-major ascending-index order.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols);  // zero-filled
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries);
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    const std::vector<double>& entries() const { return data_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool all_finite() const;
    DenseMatrix transposed() const;
    // Column restriction M_{*idx}; indices must lie in [0, cols).
    DenseMatrix columns(std::span<const int> idx) const;

    double squared_frobenius_norm() const;
    double frobenius_norm() const;
    double max_abs() const;

    DenseMatrix& operator+=(const DenseMatrix& rhs);
    DenseMatrix& operator-=(const DenseMatrix& rhs);
    DenseMatrix& operator*=(double scale);

    friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(double scale, DenseMatrix m);
// Matrix product; throws DimensionError on inner-dimension mismatch.
DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);

// Frobenius inner product <a, b>.
double frobenius_dot(const DenseMatrix& a, const DenseMatrix& b);

// Vertical concatenation of equally wide blocks.
DenseMatrix vstack(std::span<const DenseMatrix> blocks);

// Entrywise max |a - b|; shapes must agree.
double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace gnnflow
