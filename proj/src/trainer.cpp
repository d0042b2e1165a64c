#include "gnnflow/trainer.hpp"

#include <cmath>
#include <string>

#include "gnnflow/common.hpp"
#include "gnnflow/linalg.hpp"

namespace gnnflow {

const char* to_string(Integrator integrator) {
    return integrator == Integrator::Euler ? "euler" : "rk4";
}

Integrator integrator_from_string(const std::string& name) {
    if (name == "euler") return Integrator::Euler;
    if (name == "rk4") return Integrator::RungeKutta4;
    throw ConfigError("unknown integrator: " + name);
}

const char* to_string(OptimizerKind optimizer) {
    return optimizer == OptimizerKind::GradientDescent ? "gd" : "adam";
}

OptimizerKind optimizer_from_string(const std::string& name) {
    if (name == "gd") return OptimizerKind::GradientDescent;
    if (name == "adam") return OptimizerKind::Adam;
    throw ConfigError("unknown optimizer: " + name);
}

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ConfigError("TrainConfig: lr must be positive");
    if (steps < 0) throw ConfigError("TrainConfig: steps must be >= 0");
    if (record_every < 1) throw ConfigError("TrainConfig: record_every must be >= 1");
    if (divergence_threshold <= 0.0) throw ConfigError("TrainConfig: bad divergence threshold");
}

namespace {

// theta += alpha * grads, blockwise.
void axpy_params(GnnParams& params, const GradientSet& grads, double alpha) {
    for (std::size_t i = 0; i < params.w.size(); ++i) {
        for (std::size_t k = 0; k < params.w[i].entries().size(); ++k) {
            params.w[i].data()[k] += alpha * grads.d_w[i].entries()[k];
        }
    }
    for (std::size_t i = 0; i < params.b.size(); ++i) {
        for (std::size_t k = 0; k < params.b[i].entries().size(); ++k) {
            params.b[i].data()[k] += alpha * grads.d_b[i].entries()[k];
        }
    }
}

GradientSet zeros_like(const GnnParams& params) {
    GradientSet g;
    for (const auto& m : params.w) g.d_w.emplace_back(m.rows(), m.cols());
    for (const auto& m : params.b) g.d_b.emplace_back(m.rows(), m.cols());
    return g;
}

void accumulate(GradientSet& into, const GradientSet& from, double scale) {
    for (std::size_t i = 0; i < into.d_w.size(); ++i) {
        for (std::size_t k = 0; k < into.d_w[i].entries().size(); ++k) {
            into.d_w[i].data()[k] += scale * from.d_w[i].entries()[k];
        }
    }
    for (std::size_t i = 0; i < into.d_b.size(); ++i) {
        for (std::size_t k = 0; k < into.d_b[i].entries().size(); ++k) {
            into.d_b[i].data()[k] += scale * from.d_b[i].entries()[k];
        }
    }
}

struct AdamState {
    GradientSet m;
    GradientSet v;
    long step = 0;
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;
};

void adam_update_block(DenseMatrix& theta, DenseMatrix& m, DenseMatrix& v,
                       const DenseMatrix& grad, double lr, double bc1, double bc2) {
    for (std::size_t k = 0; k < theta.entries().size(); ++k) {
        const double g = grad.entries()[k];
        m.data()[k] = AdamState::kBeta1 * m.entries()[k] + (1.0 - AdamState::kBeta1) * g;
        v.data()[k] = AdamState::kBeta2 * v.entries()[k] + (1.0 - AdamState::kBeta2) * g * g;
        const double m_hat = m.entries()[k] / bc1;
        const double v_hat = v.entries()[k] / bc2;
        theta.data()[k] -= lr * m_hat / (std::sqrt(v_hat) + AdamState::kEpsilon);
    }
}

}  // namespace

TrainResult train(const GnnParams& initial, const DenseMatrix& x, const DenseMatrix& s,
                  const TrainIndex& idx, const DenseMatrix& y, const TrainConfig& cfg) {
    cfg.validate();
    initial.validate();
    const bool linear = !has_relu(initial.arch);
    if (cfg.compute_decomposition && !linear) {
        throw UnsupportedError("loss-reduction decomposition is defined for linear architectures");
    }
    if (y.cols() != idx.size()) {
        throw DimensionError("train: labels must have one column per training node");
    }

    // Data-side propagated features are parameter-free; precompute once for
    // the linear fast path (and for decomposition recording).
    std::vector<DenseMatrix> features;
    if (linear) {
        features = propagated_sequence(x, s, initial.depth, idx);
    }

    const auto evaluate = [&](const GnnParams& p) {
        const DenseMatrix y_hat =
            linear ? forward_restricted(p, features) : forward(p, x, s, idx);
        return loss_and_residual_grad(y_hat, y, cfg.loss);
    };
    const auto gradients_at = [&](const GnnParams& p, const ResidualGrad& rg) {
        return linear ? analytic_gradients_linear(p, features, rg)
                      : analytic_gradients(p, x, s, idx, rg);
    };

    TrainResult result;
    result.params = initial;
    result.trajectory.loss_kind = cfg.loss;
    result.trajectory.lr = cfg.lr;
    result.trajectory.depth = initial.depth;

    AdamState adam;
    if (cfg.optimizer == OptimizerKind::Adam) {
        adam.m = zeros_like(initial);
        adam.v = zeros_like(initial);
    }

    for (long step = 0; step <= cfg.steps; ++step) {
        const ResidualGrad rg = evaluate(result.params);
        if (!std::isfinite(rg.loss) || rg.loss > cfg.divergence_threshold) {
            result.trajectory.diverged = true;
            break;
        }
        if (step % cfg.record_every == 0 || step == cfg.steps) {
            TrajectoryCheckpoint cp;
            cp.step = step;
            cp.t = static_cast<double>(step) * cfg.lr;
            cp.loss = rg.loss;
            const auto prefixes = prefix_products(result.params);
            cp.lambda_min.reserve(prefixes.size());
            cp.lambda_min.push_back(1.0);  // scale 0 is the identity product
            for (std::size_t l = 1; l < prefixes.size(); ++l) {
                cp.lambda_min.push_back(linalg::smallest_gram_eigenvalue(prefixes[l]));
            }
            if (cfg.compute_decomposition) {
                cp.decomposition = loss_reduction_decomposition(result.params, features, rg);
            }
            if (cfg.snapshot_params) {
                cp.params = result.params;
            }
            result.trajectory.checkpoints.push_back(std::move(cp));
        }
        if (step == cfg.steps) break;

        if (cfg.optimizer == OptimizerKind::Adam) {
            const GradientSet grads = gradients_at(result.params, rg);
            ++adam.step;
            const double bc1 = 1.0 - std::pow(AdamState::kBeta1, adam.step);
            const double bc2 = 1.0 - std::pow(AdamState::kBeta2, adam.step);
            for (std::size_t i = 0; i < result.params.w.size(); ++i) {
                adam_update_block(result.params.w[i], adam.m.d_w[i], adam.v.d_w[i], grads.d_w[i],
                                  cfg.lr, bc1, bc2);
            }
            for (std::size_t i = 0; i < result.params.b.size(); ++i) {
                adam_update_block(result.params.b[i], adam.m.d_b[i], adam.v.d_b[i], grads.d_b[i],
                                  cfg.lr, bc1, bc2);
            }
            continue;
        }

        if (cfg.integrator == Integrator::Euler) {
            const GradientSet grads = gradients_at(result.params, rg);
            axpy_params(result.params, grads, -cfg.lr);
        } else {
            // Classical RK4 on the flow field f(theta) = -grad L(theta).
            const GradientSet k1 = gradients_at(result.params, rg);
            GnnParams stage = result.params;
            axpy_params(stage, k1, -0.5 * cfg.lr);
            const GradientSet k2 = gradients_at(stage, evaluate(stage));
            stage = result.params;
            axpy_params(stage, k2, -0.5 * cfg.lr);
            const GradientSet k3 = gradients_at(stage, evaluate(stage));
            stage = result.params;
            axpy_params(stage, k3, -cfg.lr);
            const GradientSet k4 = gradients_at(stage, evaluate(stage));
            GradientSet combined = zeros_like(result.params);
            accumulate(combined, k1, 1.0);
            accumulate(combined, k2, 2.0);
            accumulate(combined, k3, 2.0);
            accumulate(combined, k4, 1.0);
            axpy_params(result.params, combined, -cfg.lr / 6.0);
        }
    }
    return result;
}

std::vector<std::pair<double, double>> lambda_T_path(const TrajectoryRecord& traj, int layer) {
    if (traj.checkpoints.empty()) {
        throw ConfigError("lambda_T_path: empty trajectory");
    }
    if (layer < 0 || layer > traj.depth) {
        throw ConfigError("lambda_T_path: layer out of range");
    }
    std::vector<std::pair<double, double>> path;
    double running = traj.checkpoints.front().lambda_min[static_cast<std::size_t>(layer)];
    for (const auto& cp : traj.checkpoints) {
        running = std::min(running, cp.lambda_min[static_cast<std::size_t>(layer)]);
        path.emplace_back(cp.t, running);
    }
    return path;
}

}  // namespace gnnflow
