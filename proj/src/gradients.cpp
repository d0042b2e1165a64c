#include "gnnflow/gradients.hpp"

#include <algorithm>
#include <cmath>

#include "gnnflow/common.hpp"

namespace gnnflow {

const char* to_string(LossKind kind) {
    return kind == LossKind::SquaredFrobenius ? "sq" : "ce";
}

LossKind loss_kind_from_string(const std::string& name) {
    if (name == "sq" || name == "squared") return LossKind::SquaredFrobenius;
    if (name == "ce" || name == "cross_entropy") return LossKind::CrossEntropySum;
    throw ConfigError("unknown loss kind: " + name);
}

namespace {

int one_hot_class(const DenseMatrix& y, std::size_t col) {
    int cls = -1;
    for (std::size_t i = 0; i < y.rows(); ++i) {
        const double v = y(i, col);
        if (v == 1.0 && cls < 0) {
            cls = static_cast<int>(i);
        } else if (v != 0.0) {
            throw ConfigError("cross-entropy labels must be one-hot columns (column " +
                              std::to_string(col) + ")");
        }
    }
    if (cls < 0) {
        throw ConfigError("cross-entropy labels must be one-hot columns (column " +
                          std::to_string(col) + ")");
    }
    return cls;
}

}  // namespace

ResidualGrad loss_and_residual_grad(const DenseMatrix& y_hat, const DenseMatrix& y,
                                    LossKind kind) {
    if (y_hat.rows() != y.rows() || y_hat.cols() != y.cols()) {
        throw DimensionError("loss: prediction is " + std::to_string(y_hat.rows()) + "x" +
                             std::to_string(y_hat.cols()) + " but labels are " +
                             std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
    }
    ResidualGrad rg;
    rg.v = DenseMatrix(y_hat.rows(), y_hat.cols());
    if (kind == LossKind::SquaredFrobenius) {
        double loss = 0.0;
        for (std::size_t i = 0; i < y_hat.rows(); ++i) {
            for (std::size_t j = 0; j < y_hat.cols(); ++j) {
                const double d = y_hat(i, j) - y(i, j);
                loss += d * d;
                rg.v(i, j) = 2.0 * d;
            }
        }
        rg.loss = loss;
        return rg;
    }
    // Cross entropy, summed over training nodes.
    double loss = 0.0;
    for (std::size_t j = 0; j < y_hat.cols(); ++j) {
        const int cls = one_hot_class(y, j);
        double max_logit = y_hat(0, j);
        for (std::size_t i = 1; i < y_hat.rows(); ++i) max_logit = std::max(max_logit, y_hat(i, j));
        double denom = 0.0;
        for (std::size_t i = 0; i < y_hat.rows(); ++i) denom += std::exp(y_hat(i, j) - max_logit);
        loss += std::log(denom) + max_logit - y_hat(static_cast<std::size_t>(cls), j);
        for (std::size_t i = 0; i < y_hat.rows(); ++i) {
            rg.v(i, j) = std::exp(y_hat(i, j) - max_logit) / denom;
        }
        rg.v(static_cast<std::size_t>(cls), j) -= 1.0;
    }
    rg.loss = loss;
    return rg;
}

double GradientSet::squared_norm() const {
    double sum = 0.0;
    for (const auto& m : d_w) sum += m.squared_frobenius_norm();
    for (const auto& m : d_b) sum += m.squared_frobenius_norm();
    return sum;
}

namespace {

void require_v_shape(const GnnParams& params, const ResidualGrad& rg, std::size_t n_bar) {
    if (rg.v.rows() != static_cast<std::size_t>(params.output_dim) || rg.v.cols() != n_bar) {
        throw DimensionError("residual gradient must be m_y x n_bar");
    }
}

// Closed-form gradients of the single-head network: dW = V (X_(H))_{*I}ᵀ and
// dB_(l) = (W B_(H)..B_(l+1))ᵀ V (X_(l-1) S^{H-l+1})_{*I}ᵀ, with the hidden
// features expressed through the restricted propagated inputs.
GradientSet single_scale_linear_gradients(const GnnParams& params,
                                          std::span<const DenseMatrix> features,
                                          const ResidualGrad& rg) {
    const int depth = params.depth;
    const auto& c_top = features[static_cast<std::size_t>(depth)];

    // g[l] = B̄^{(1:l)} * C_H = (X_(l))_{*I} for the linear network.
    std::vector<DenseMatrix> g;
    g.reserve(static_cast<std::size_t>(depth) + 1);
    g.push_back(c_top);
    for (int l = 1; l <= depth; ++l) {
        g.push_back(params.b[static_cast<std::size_t>(l) - 1] * g.back());
    }
    // tails[l] = W * B̄^{(l+1:H)}.
    std::vector<DenseMatrix> tails(static_cast<std::size_t>(depth) + 1);
    tails[static_cast<std::size_t>(depth)] = params.w[0];
    for (int l = depth; l >= 1; --l) {
        tails[static_cast<std::size_t>(l) - 1] =
            tails[static_cast<std::size_t>(l)] * params.b[static_cast<std::size_t>(l) - 1];
    }

    GradientSet grads;
    grads.d_w.push_back(rg.v * g[static_cast<std::size_t>(depth)].transposed());
    grads.d_b.reserve(static_cast<std::size_t>(depth));
    for (int l = 1; l <= depth; ++l) {
        grads.d_b.push_back((tails[static_cast<std::size_t>(l)].transposed() * rg.v) *
                            g[static_cast<std::size_t>(l) - 1].transposed());
    }
    return grads;
}

// Closed-form gradients of the multiscale network: dW_(l) = V (X_(l))_{*I}ᵀ
// and dB_(l) sums the per-scale head contributions k = l..H.
GradientSet multiscale_linear_gradients(const GnnParams& params,
                                        std::span<const DenseMatrix> features,
                                        const ResidualGrad& rg) {
    const int depth = params.depth;
    const auto prefixes = prefix_products(params);

    GradientSet grads;
    grads.d_w.reserve(static_cast<std::size_t>(depth) + 1);
    for (int l = 0; l <= depth; ++l) {
        const DenseMatrix d_l =
            prefixes[static_cast<std::size_t>(l)] * features[static_cast<std::size_t>(l)];
        grads.d_w.push_back(rg.v * d_l.transposed());
    }

    // n[k] = V * C_kᵀ.
    std::vector<DenseMatrix> n(static_cast<std::size_t>(depth) + 1);
    for (int k = 1; k <= depth; ++k) {
        n[static_cast<std::size_t>(k)] = rg.v * features[static_cast<std::size_t>(k)].transposed();
    }

    grads.d_b.resize(static_cast<std::size_t>(depth));
    // heads[k] = W_(k) * B̄^{(i+1:k)} for the current i, maintained while i
    // descends from H to 1.
    std::vector<DenseMatrix> heads(static_cast<std::size_t>(depth) + 1);
    for (int i = depth; i >= 1; --i) {
        heads[static_cast<std::size_t>(i)] = params.w[static_cast<std::size_t>(i)];
        DenseMatrix acc(static_cast<std::size_t>(params.dims[i]),
                        static_cast<std::size_t>(params.input_dim()));
        for (int k = i; k <= depth; ++k) {
            acc += heads[static_cast<std::size_t>(k)].transposed() * n[static_cast<std::size_t>(k)];
        }
        grads.d_b[static_cast<std::size_t>(i) - 1] =
            acc * prefixes[static_cast<std::size_t>(i) - 1].transposed();
        for (int k = i; k <= depth; ++k) {
            heads[static_cast<std::size_t>(k)] =
                heads[static_cast<std::size_t>(k)] * params.b[static_cast<std::size_t>(i) - 1];
        }
    }
    return grads;
}

// Scatters the restricted residual derivative into full-width columns.
DenseMatrix scatter_columns(const DenseMatrix& v, const TrainIndex& idx, std::size_t n) {
    DenseMatrix full(v.rows(), n);
    for (std::size_t k = 0; k < idx.indices.size(); ++k) {
        const auto j = static_cast<std::size_t>(idx.indices[k]);
        for (std::size_t i = 0; i < v.rows(); ++i) full(i, j) = v(i, k);
    }
    return full;
}

void relu_mask_in_place(DenseMatrix& grad, const DenseMatrix& pre_activation) {
    for (std::size_t i = 0; i < grad.rows(); ++i) {
        for (std::size_t j = 0; j < grad.cols(); ++j) {
            // Subgradient 0 at exactly zero pre-activation.
            if (pre_activation(i, j) <= 0.0) grad(i, j) = 0.0;
        }
    }
}

GradientSet relu_backprop_gradients(const GnnParams& params, const DenseMatrix& x,
                                    const DenseMatrix& s, const TrainIndex& idx,
                                    const ResidualGrad& rg) {
    const int depth = params.depth;
    const bool multiscale = is_multiscale(params.arch);

    // Forward pass caching layer inputs M_l = X_(l-1) * S and pre-activations.
    std::vector<DenseMatrix> layer_input(static_cast<std::size_t>(depth) + 1);
    std::vector<DenseMatrix> pre_act(static_cast<std::size_t>(depth) + 1);
    std::vector<DenseMatrix> post_act(static_cast<std::size_t>(depth) + 1);
    post_act[0] = x;
    for (int l = 1; l <= depth; ++l) {
        layer_input[static_cast<std::size_t>(l)] = post_act[static_cast<std::size_t>(l) - 1] * s;
        pre_act[static_cast<std::size_t>(l)] =
            params.b[static_cast<std::size_t>(l) - 1] * layer_input[static_cast<std::size_t>(l)];
        post_act[static_cast<std::size_t>(l)] = pre_act[static_cast<std::size_t>(l)];
        relu_mask_in_place(post_act[static_cast<std::size_t>(l)],
                           pre_act[static_cast<std::size_t>(l)]);
    }

    const DenseMatrix v_full = scatter_columns(rg.v, idx, s.rows());
    const DenseMatrix s_t = s.transposed();

    GradientSet grads;
    grads.d_b.resize(static_cast<std::size_t>(depth));
    if (multiscale) {
        grads.d_w.reserve(static_cast<std::size_t>(depth) + 1);
        for (int l = 0; l <= depth; ++l) {
            grads.d_w.push_back(
                rg.v * post_act[static_cast<std::size_t>(l)].columns(idx.indices).transposed());
        }
    } else {
        grads.d_w.push_back(
            rg.v * post_act[static_cast<std::size_t>(depth)].columns(idx.indices).transposed());
    }

    DenseMatrix d_hidden;  // gradient wrt X_(l), full width
    for (int l = depth; l >= 1; --l) {
        DenseMatrix head_term = multiscale ? params.w[static_cast<std::size_t>(l)].transposed() * v_full
                                           : DenseMatrix();
        if (l == depth) {
            d_hidden = multiscale ? std::move(head_term) : params.w[0].transposed() * v_full;
        } else if (multiscale) {
            d_hidden += head_term;
        }
        relu_mask_in_place(d_hidden, pre_act[static_cast<std::size_t>(l)]);
        grads.d_b[static_cast<std::size_t>(l) - 1] =
            d_hidden * layer_input[static_cast<std::size_t>(l)].transposed();
        if (l > 1) {
            d_hidden = (params.b[static_cast<std::size_t>(l) - 1].transposed() * d_hidden) * s_t;
        }
    }
    return grads;
}

}  // namespace

GradientSet analytic_gradients_linear(const GnnParams& params,
                                      std::span<const DenseMatrix> restricted_features,
                                      const ResidualGrad& rg) {
    if (has_relu(params.arch)) {
        throw UnsupportedError("analytic_gradients_linear: linear architectures only");
    }
    if (restricted_features.size() < static_cast<std::size_t>(params.depth) + 1) {
        throw DimensionError("analytic_gradients_linear: need features up to the network depth");
    }
    require_v_shape(params, rg, restricted_features[0].cols());
    return is_multiscale(params.arch)
               ? multiscale_linear_gradients(params, restricted_features, rg)
               : single_scale_linear_gradients(params, restricted_features, rg);
}

GradientSet analytic_gradients(const GnnParams& params, const DenseMatrix& x,
                               const DenseMatrix& s, const TrainIndex& idx,
                               const ResidualGrad& rg) {
    params.validate();
    require_v_shape(params, rg, idx.size());
    if (has_relu(params.arch)) {
        return relu_backprop_gradients(params, x, s, idx, rg);
    }
    const auto features = propagated_sequence(x, s, params.depth, idx);
    return analytic_gradients_linear(params, features, rg);
}

GradientSet finite_difference_gradients(const GnnParams& params, const DenseMatrix& x,
                                        const DenseMatrix& s, const TrainIndex& idx,
                                        const DenseMatrix& y, LossKind kind, double eps) {
    if (eps <= 0.0) {
        throw ConfigError("finite_difference_gradients: eps must be positive");
    }
    GnnParams probe = params;
    const auto loss_at = [&](const GnnParams& p) {
        return loss_and_residual_grad(forward(p, x, s, idx), y, kind).loss;
    };
    const auto central = [&](DenseMatrix& target) {
        DenseMatrix grad(target.rows(), target.cols());
        for (std::size_t i = 0; i < target.rows(); ++i) {
            for (std::size_t j = 0; j < target.cols(); ++j) {
                const double saved = target(i, j);
                target(i, j) = saved + eps;
                const double up = loss_at(probe);
                target(i, j) = saved - eps;
                const double down = loss_at(probe);
                target(i, j) = saved;
                grad(i, j) = (up - down) / (2.0 * eps);
            }
        }
        return grad;
    };

    GradientSet grads;
    for (auto& wm : probe.w) grads.d_w.push_back(central(wm));
    for (auto& bm : probe.b) grads.d_b.push_back(central(bm));
    return grads;
}

}  // namespace gnnflow
