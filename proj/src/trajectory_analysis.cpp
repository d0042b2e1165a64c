#include "gnnflow/trajectory_analysis.hpp"

#include <algorithm>
#include <cmath>

#include "gnnflow/common.hpp"
#include "gnnflow/linalg.hpp"

namespace gnnflow {

namespace {

constexpr double kIntegratedSlack = 1.05;  // multiplicative; absorbs Euler discretization
constexpr double kPremiseTolerance = 1e-9;

double sigma_sq_min(const DenseMatrix& m) {
    const double s = linalg::smallest_singular_value(m);
    return s * s;
}

}  // namespace

MarginReport margin_trace(const TrajectoryRecord& traj, int layer) {
    if (traj.checkpoints.empty()) {
        throw ConfigError("margin_trace: empty trajectory");
    }
    if (layer < 1 || layer > traj.depth) {
        throw ConfigError("margin_trace: layer must lie in [1, H]");
    }
    const double initial_loss = traj.checkpoints.front().loss;
    const double level = initial_loss + 1e-12 * (1.0 + std::abs(initial_loss));

    MarginReport report;
    report.layer = layer;
    bool seen = false;
    for (const auto& cp : traj.checkpoints) {
        if (!cp.params.has_value()) continue;
        if (cp.loss > level) continue;
        const DenseMatrix product = layer_products(*cp.params, 1, layer);
        const double sigma = linalg::smallest_singular_value(product);
        const double lambda = linalg::smallest_gram_eigenvalue(product);
        if (!seen) {
            report.gamma_empirical = sigma;
            report.lambda_floor = lambda;
            seen = true;
        } else {
            report.gamma_empirical = std::min(report.gamma_empirical, sigma);
            report.lambda_floor = std::min(report.lambda_floor, lambda);
        }
    }
    if (!seen) {
        throw ConfigError("margin_trace: trajectory has no parameter snapshots");
    }
    const double gamma_sq = report.gamma_empirical * report.gamma_empirical;
    report.satisfied = report.lambda_floor >= gamma_sq - 1e-9 * (1.0 + gamma_sq);
    return report;
}

bool BoundTrace::all_satisfied() const {
    if (!premise_ok) return false;
    for (const auto& row : rows) {
        if (!row.satisfied) return false;
    }
    return true;
}

BoundTrace convergence_bound_trace(const TrajectoryRecord& traj, const DenseMatrix& x,
                                   const DenseMatrix& s, const TrainIndex& idx,
                                   const DenseMatrix& y, const BoundSpec& spec) {
    if (traj.loss_kind != LossKind::SquaredFrobenius) {
        throw UnsupportedError("convergence_bound_trace: squared loss only");
    }
    if (traj.checkpoints.empty()) {
        throw ConfigError("convergence_bound_trace: empty trajectory");
    }
    const int depth = traj.depth;
    for (const auto& cp : traj.checkpoints) {
        if (cp.lambda_min.size() != static_cast<std::size_t>(depth) + 1) {
            throw ConfigError("convergence_bound_trace: missing per-layer eigenvalue records");
        }
    }

    BoundTrace trace;
    trace.case_token = spec.token();

    const auto features = propagated_sequence(x, s, depth, idx);

    // Layers whose running-minimum eigenvalue feeds the rate, paired with the
    // data-side sigma² factors.
    std::vector<int> layers;
    std::vector<double> sigmas;
    switch (spec.kind) {
        case RateBoundKind::SingleScale: {
            layers = {depth};
            sigmas = {sigma_sq_min(features[static_cast<std::size_t>(depth)])};
            trace.optimum =
                linalg::least_squares_residual(features[static_cast<std::size_t>(depth)], y)
                    .residual;
            break;
        }
        case RateBoundKind::MultiscaleJoint: {
            for (int l = 0; l <= depth; ++l) layers.push_back(l);
            const DenseMatrix stacked = vstack(features);
            sigmas.assign(1, sigma_sq_min(stacked));
            trace.optimum = linalg::least_squares_residual(stacked, y).residual;
            break;
        }
        case RateBoundKind::MultiscaleBoundary: {
            const int h = spec.boundary_depth;
            if (h < 0 || h > depth) throw ConfigError("boundary depth must lie in [0, H]");
            layers = {h};
            sigmas = {sigma_sq_min(features[static_cast<std::size_t>(h)])};
            trace.optimum =
                linalg::least_squares_residual(features[static_cast<std::size_t>(h)], y).residual;
            break;
        }
        case RateBoundKind::MultiscaleMonotone: {
            const int from = spec.chain_from;
            const int to = spec.chain_to;
            if (from < 0 || to > depth || from >= to) {
                throw ConfigError("monotone chain needs 0 <= l < l' <= H");
            }
            std::vector<double> optima;
            for (int k = from; k <= to; ++k) {
                optima.push_back(
                    linalg::least_squares_residual(features[static_cast<std::size_t>(k)], y)
                        .residual);
            }
            bool non_increasing = true;
            bool non_decreasing = true;
            for (std::size_t k = 0; k + 1 < optima.size(); ++k) {
                if (optima[k + 1] > optima[k] + kPremiseTolerance) non_increasing = false;
                if (optima[k + 1] < optima[k] - kPremiseTolerance) non_decreasing = false;
            }
            if (!non_increasing && !non_decreasing) {
                trace.premise_ok = false;
                return trace;
            }
            trace.optimum = non_increasing ? optima.front() : optima.back();
            for (int k = from; k <= to; ++k) {
                layers.push_back(k);
                sigmas.push_back(sigma_sq_min(features[static_cast<std::size_t>(k)]));
            }
            break;
        }
    }

    const double initial_loss = traj.checkpoints.front().loss;
    trace.initial_gap = initial_loss - trace.optimum;

    std::vector<double> running(layers.size());
    for (std::size_t k = 0; k < layers.size(); ++k) {
        running[k] =
            traj.checkpoints.front().lambda_min[static_cast<std::size_t>(layers[k])];
    }

    for (const auto& cp : traj.checkpoints) {
        for (std::size_t k = 0; k < layers.size(); ++k) {
            running[k] =
                std::min(running[k], cp.lambda_min[static_cast<std::size_t>(layers[k])]);
        }
        double rate = 0.0;
        if (spec.kind == RateBoundKind::MultiscaleJoint) {
            // joint lambda = min over all scales, single sigma² factor
            double lambda = running.front();
            for (double v : running) lambda = std::min(lambda, v);
            rate = lambda * sigmas.front();
        } else {
            for (std::size_t k = 0; k < layers.size(); ++k) {
                rate += running[k] * sigmas[k];
            }
        }
        BoundTraceRow row;
        row.step = cp.step;
        row.t = cp.t;
        row.loss = cp.loss;
        row.lhs = cp.loss - trace.optimum;
        row.rhs = trace.initial_gap * std::exp(-4.0 * rate * cp.t);
        row.satisfied = row.lhs <= row.rhs * kIntegratedSlack + 1e-12 * (1.0 + trace.optimum);
        trace.rows.push_back(row);
    }
    return trace;
}

std::vector<SignalTermRow> signal_term_report(const TrajectoryRecord& traj) {
    std::vector<SignalTermRow> rows;
    for (const auto& cp : traj.checkpoints) {
        if (!cp.decomposition.has_value()) continue;
        SignalTermRow row;
        row.step = cp.step;
        row.t = cp.t;
        row.first_sum = cp.decomposition->first_sum();
        row.second_sum = cp.decomposition->second_sum();
        rows.push_back(row);
    }
    return rows;
}

}  // namespace gnnflow
