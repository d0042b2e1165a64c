#pragma once

#include <span>
#include <string>
#include <vector>

#include "gnnflow/dense_matrix.hpp"
#include "gnnflow/graph.hpp"
#include "gnnflow/model.hpp"

namespace gnnflow {

enum class LossKind { SquaredFrobenius, CrossEntropySum };

const char* to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

// Loss value and its derivative with respect to the model output.
struct ResidualGrad {
    double loss = 0.0;
    DenseMatrix v;  // m_y x n_bar
};

// SquaredFrobenius: loss = ||Yhat - Y||_F^2 (no 1/n_bar factor), V = 2(Yhat - Y).
// CrossEntropySum: Y must be one-hot columns; loss sums -log softmax(col)[class]
// over training nodes and V = softmax - onehot per column.
ResidualGrad loss_and_residual_grad(const DenseMatrix& y_hat, const DenseMatrix& y,
                                    LossKind kind);

// Gradients shaped like the parameter set they differentiate.
struct GradientSet {
    std::vector<DenseMatrix> d_w;
    std::vector<DenseMatrix> d_b;

    // Sum of squared Frobenius norms over all blocks, in w-then-b order.
    double squared_norm() const;
};

// Exact gradients of the configured loss. Linear architectures use the
// closed-form layer/head factorizations; ReLU architectures use reverse mode.
GradientSet analytic_gradients(const GnnParams& params, const DenseMatrix& x,
                               const DenseMatrix& s, const TrainIndex& idx,
                               const ResidualGrad& rg);

// Hot-path overload for linear architectures: `restricted_features` must hold
// X(S^l)_{*idx} for l = 0..depth (see propagated_sequence).
GradientSet analytic_gradients_linear(const GnnParams& params,
                                      std::span<const DenseMatrix> restricted_features,
                                      const ResidualGrad& rg);

// Central differences (L(theta + eps e) - L(theta - eps e)) / (2 eps) over
// every scalar parameter. Verification oracle; works for every architecture.
GradientSet finite_difference_gradients(const GnnParams& params, const DenseMatrix& x,
                                        const DenseMatrix& s, const TrainIndex& idx,
                                        const DenseMatrix& y, LossKind kind,
                                        double eps = 1e-5);

}  // namespace gnnflow
