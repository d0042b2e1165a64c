#include "gnnflow/dense_matrix.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>

#include "gnnflow/common.hpp"

namespace gnnflow {

namespace {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EigenRowMajor> as_eigen(const DenseMatrix& m) {
    return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

Eigen::Map<EigenRowMajor> as_eigen(DenseMatrix& m) {
    return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                             "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                             "x" + std::to_string(b.cols()));
    }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("DenseMatrix: entry count " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows_) + "x" +
                             std::to_string(cols_));
    }
    if (!all_finite()) {
        throw ConfigError("DenseMatrix: non-finite entry");
    }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
        if (row.size() != cols_) {
            throw DimensionError("DenseMatrix: ragged initializer");
        }
        data_.insert(data_.end(), row.begin(), row.end());
    }
    if (!all_finite()) {
        throw ConfigError("DenseMatrix: non-finite entry");
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool DenseMatrix::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) {
            out(j, i) = (*this)(i, j);
        }
    }
    return out;
}

DenseMatrix DenseMatrix::columns(std::span<const int> idx) const {
    DenseMatrix out(rows_, idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const int j = idx[k];
        if (j < 0 || static_cast<std::size_t>(j) >= cols_) {
            throw DimensionError("columns: index " + std::to_string(j) + " out of range for " +
                                 std::to_string(cols_) + " columns");
        }
    }
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t k = 0; k < idx.size(); ++k) {
            out(i, k) = (*this)(i, static_cast<std::size_t>(idx[k]));
        }
    }
    return out;
}

double DenseMatrix::squared_frobenius_norm() const {
    double sum = 0.0;
    for (double v : data_) sum += v * v;
    return sum;
}

double DenseMatrix::frobenius_norm() const { return std::sqrt(squared_frobenius_norm()); }

double DenseMatrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& rhs) {
    require_same_shape(*this, rhs, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
    return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& rhs) {
    require_same_shape(*this, rhs, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
    return *this;
}

DenseMatrix& DenseMatrix::operator*=(double scale) {
    for (double& v : data_) v *= scale;
    return *this;
}

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }

DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }

DenseMatrix operator*(double scale, DenseMatrix m) { return m *= scale; }

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("operator*: inner dimensions " + std::to_string(a.cols()) + " vs " +
                             std::to_string(b.rows()));
    }
    DenseMatrix out(a.rows(), b.cols());
    as_eigen(out).noalias() = as_eigen(a) * as_eigen(b);
    return out;
}

double frobenius_dot(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "frobenius_dot");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.entries().size(); ++i) {
        sum += a.entries()[i] * b.entries()[i];
    }
    return sum;
}

DenseMatrix vstack(std::span<const DenseMatrix> blocks) {
    if (blocks.empty()) return {};
    std::size_t rows = 0;
    const std::size_t cols = blocks.front().cols();
    for (const auto& block : blocks) {
        if (block.cols() != cols) {
            throw DimensionError("vstack: column count mismatch");
        }
        rows += block.rows();
    }
    DenseMatrix out(rows, cols);
    std::size_t offset = 0;
    for (const auto& block : blocks) {
        std::copy(block.entries().begin(), block.entries().end(), out.data() + offset);
        offset += block.entries().size();
    }
    return out;
}

double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "max_abs_difference");
    double m = 0.0;
    for (std::size_t i = 0; i < a.entries().size(); ++i) {
        m = std::max(m, std::abs(a.entries()[i] - b.entries()[i]));
    }
    return m;
}

}  // namespace gnnflow
