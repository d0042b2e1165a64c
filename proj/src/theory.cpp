#include "gnnflow/theory.hpp"

#include <algorithm>
#include <cmath>

#include "gnnflow/common.hpp"
#include "gnnflow/linalg.hpp"

namespace gnnflow {

namespace {

constexpr double kPointwiseSlack = 1e-8;
constexpr double kPremiseTolerance = 1e-9;

double sigma_sq_min(const DenseMatrix& m) {
    const double s = linalg::smallest_singular_value(m);
    return s * s;
}

void require_linear(const GnnParams& params, const char* op) {
    if (has_relu(params.arch)) {
        throw UnsupportedError(std::string(op) + ": linear architectures only");
    }
}

}  // namespace

ConditionReport condition_report(const DenseMatrix& x, const DenseMatrix& s,
                                 const TrainIndex& idx, const DenseMatrix& y, int max_depth,
                                 bool include_multiscale) {
    if (max_depth < 0) throw ConfigError("condition_report: negative depth");
    if (y.cols() != idx.size()) {
        throw DimensionError("condition_report: labels must have one column per training node");
    }
    const auto features = propagated_sequence(x, s, max_depth, idx);

    ConditionReport report;
    report.max_depth = max_depth;
    report.include_multiscale = include_multiscale;
    std::vector<DenseMatrix> blocks;
    for (int l = 0; l <= max_depth; ++l) {
        const auto& c_l = features[static_cast<std::size_t>(l)];
        report.sigma_sq_linear.push_back(sigma_sq_min(c_l));
        report.global_min_linear.push_back(linalg::least_squares_residual(c_l, y).residual);
        if (include_multiscale) {
            blocks.push_back(c_l);
            const DenseMatrix stacked = vstack(blocks);
            report.sigma_sq_multiscale.push_back(sigma_sq_min(stacked));
            report.global_min_multiscale.push_back(
                linalg::least_squares_residual(stacked, y).residual);
        }
    }
    return report;
}

double global_minimum_linear(const DenseMatrix& x, const DenseMatrix& s, const TrainIndex& idx,
                             const DenseMatrix& y, int depth) {
    const DenseMatrix features = propagated_features(x, s, depth, idx);
    return linalg::least_squares_residual(features, y).residual;
}

double global_minimum_multiscale(const DenseMatrix& x, const DenseMatrix& s,
                                 const TrainIndex& idx, const DenseMatrix& y, int depth) {
    const DenseMatrix stacked = stacked_features(x, s, depth, idx);
    return linalg::least_squares_residual(stacked, y).residual;
}

double DecompositionTerms::first_sum() const {
    double sum = 0.0;
    for (double v : first_terms) sum += v;
    return sum;
}

double DecompositionTerms::second_sum() const {
    double sum = 0.0;
    for (double v : second_terms) sum += v;
    return sum;
}

namespace {

// Sweep over layers i = H..1 producing, per layer, the contraction matrices
// J_{(i,l)} vec[N_l] = (W_(l) B̄^{(i+1:l)})ᵀ N_l (B̄^{(1:i-1)})ᵀ for every
// scale l that carries a head: l = i..H for multiscale parameters, l = H only
// for the single-head model. The head factors W_(l) B̄^{(i+1:l)} follow the
// recurrence head_{i,l} = head_{i+1,l} B_(i+1) and are exposed for reuse by
// the end-to-end dynamics formula.
class LayerContractionSweep {
public:
    LayerContractionSweep(const GnnParams& params, std::span<const DenseMatrix> prefixes,
                          std::span<const DenseMatrix> residuals)
        : params_(params),
          prefixes_(prefixes),
          residuals_(residuals),
          current_layer_(params.depth + 1),
          heads_(static_cast<std::size_t>(params.depth) + 1) {}

    int first_scale(int layer_i) const {
        return is_multiscale(params_.arch) ? layer_i : params_.depth;
    }

    // Moves to layer_i (one below the previous call) and returns the
    // contractions for scales first_scale(layer_i)..H, in ascending order.
    std::vector<DenseMatrix> descend(int layer_i) {
        const int depth = params_.depth;
        const bool multiscale = is_multiscale(params_.arch);
        if (layer_i != current_layer_ - 1 || layer_i < 1) {
            throw ConfigError("LayerContractionSweep: layers must descend one at a time");
        }
        current_layer_ = layer_i;
        if (layer_i == depth) {
            heads_[static_cast<std::size_t>(depth)] =
                multiscale ? params_.w[static_cast<std::size_t>(depth)] : params_.w[0];
        } else {
            for (int l = first_scale(layer_i + 1); l <= depth; ++l) {
                heads_[static_cast<std::size_t>(l)] =
                    heads_[static_cast<std::size_t>(l)] *
                    params_.b[static_cast<std::size_t>(layer_i)];
            }
            if (multiscale) {
                heads_[static_cast<std::size_t>(layer_i)] =
                    params_.w[static_cast<std::size_t>(layer_i)];
            }
        }

        const DenseMatrix prefix_t = prefixes_[static_cast<std::size_t>(layer_i) - 1].transposed();
        std::vector<DenseMatrix> out;
        for (int l = first_scale(layer_i); l <= depth; ++l) {
            out.push_back((heads_[static_cast<std::size_t>(l)].transposed() *
                           residuals_[static_cast<std::size_t>(l)]) *
                          prefix_t);
        }
        return out;
    }

    // W_(l) B̄^{(i+1:l)} at the current layer; valid for l >= first_scale.
    const DenseMatrix& head(int scale) const { return heads_[static_cast<std::size_t>(scale)]; }

private:
    const GnnParams& params_;
    std::span<const DenseMatrix> prefixes_;
    std::span<const DenseMatrix> residuals_;
    int current_layer_;
    std::vector<DenseMatrix> heads_;
};

// N_l = V C_lᵀ per scale.
std::vector<DenseMatrix> scale_residuals(std::span<const DenseMatrix> features,
                                         const ResidualGrad& rg, int depth) {
    std::vector<DenseMatrix> out(static_cast<std::size_t>(depth) + 1);
    for (int l = 0; l <= depth; ++l) {
        out[static_cast<std::size_t>(l)] =
            rg.v * features[static_cast<std::size_t>(l)].transposed();
    }
    return out;
}

}  // namespace

DecompositionTerms loss_reduction_decomposition(const GnnParams& params,
                                                std::span<const DenseMatrix> restricted_features,
                                                const ResidualGrad& rg) {
    require_linear(params, "loss_reduction_decomposition");
    params.validate();
    if (restricted_features.size() < static_cast<std::size_t>(params.depth) + 1) {
        throw DimensionError("loss_reduction_decomposition: need features up to the depth");
    }
    if (rg.v.rows() != static_cast<std::size_t>(params.output_dim) ||
        rg.v.cols() != restricted_features[0].cols()) {
        throw DimensionError("loss_reduction_decomposition: residual gradient shape mismatch");
    }

    const int depth = params.depth;
    const bool multiscale = is_multiscale(params.arch);
    const auto prefixes = prefix_products(params);
    const auto residuals = scale_residuals(restricted_features, rg, depth);

    DecompositionTerms terms;
    if (multiscale) {
        for (int l = 0; l <= depth; ++l) {
            const DenseMatrix m = prefixes[static_cast<std::size_t>(l)] *
                                  residuals[static_cast<std::size_t>(l)].transposed();
            terms.first_terms.push_back(m.squared_frobenius_norm());
        }
    } else {
        const DenseMatrix m = prefixes[static_cast<std::size_t>(depth)] *
                              residuals[static_cast<std::size_t>(depth)].transposed();
        terms.first_terms.push_back(m.squared_frobenius_norm());
    }

    terms.second_terms.assign(static_cast<std::size_t>(depth), 0.0);
    LayerContractionSweep sweep(params, prefixes, residuals);
    for (int i = depth; i >= 1; --i) {
        const auto contractions = sweep.descend(i);
        DenseMatrix total = contractions.front();
        for (std::size_t k = 1; k < contractions.size(); ++k) total += contractions[k];
        terms.second_terms[static_cast<std::size_t>(i) - 1] = total.squared_frobenius_norm();
    }

    double sum = 0.0;
    for (double v : terms.first_terms) sum += v;
    for (double v : terms.second_terms) sum += v;
    terms.loss_rate = -sum;
    return terms;
}

DecompositionTerms loss_reduction_decomposition(const GnnParams& params, const DenseMatrix& x,
                                                const DenseMatrix& s, const TrainIndex& idx,
                                                const ResidualGrad& rg) {
    require_linear(params, "loss_reduction_decomposition");
    const auto features = propagated_sequence(x, s, params.depth, idx);
    return loss_reduction_decomposition(params, features, rg);
}

BoundSpec BoundSpec::parse(const std::string& token) {
    BoundSpec spec;
    if (token == "thm6") {
        spec.kind = RateBoundKind::SingleScale;
        return spec;
    }
    if (token == "thm1i") {
        spec.kind = RateBoundKind::MultiscaleJoint;
        return spec;
    }
    if (token.rfind("thm1ii:", 0) == 0) {
        spec.kind = RateBoundKind::MultiscaleBoundary;
        spec.boundary_depth = std::stoi(token.substr(7));
        return spec;
    }
    if (token.rfind("thm1iii:", 0) == 0) {
        spec.kind = RateBoundKind::MultiscaleMonotone;
        const std::string rest = token.substr(8);
        const auto comma = rest.find(',');
        if (comma == std::string::npos) {
            throw ConfigError("case thm1iii needs two layer indices, e.g. thm1iii:0,2");
        }
        spec.chain_from = std::stoi(rest.substr(0, comma));
        spec.chain_to = std::stoi(rest.substr(comma + 1));
        return spec;
    }
    throw ConfigError("unknown verification case: " + token);
}

std::string BoundSpec::token() const {
    switch (kind) {
        case RateBoundKind::SingleScale: return "thm6";
        case RateBoundKind::MultiscaleJoint: return "thm1i";
        case RateBoundKind::MultiscaleBoundary:
            return "thm1ii:" + std::to_string(boundary_depth);
        case RateBoundKind::MultiscaleMonotone:
            return "thm1iii:" + std::to_string(chain_from) + "," + std::to_string(chain_to);
    }
    return "thm6";
}

namespace {

enum class ChainDirection { NonIncreasing, NonDecreasing, Broken };

ChainDirection chain_direction(std::span<const double> optima) {
    bool non_increasing = true;
    bool non_decreasing = true;
    for (std::size_t k = 0; k + 1 < optima.size(); ++k) {
        if (optima[k + 1] > optima[k] + kPremiseTolerance) non_increasing = false;
        if (optima[k + 1] < optima[k] - kPremiseTolerance) non_decreasing = false;
    }
    if (non_increasing) return ChainDirection::NonIncreasing;
    if (non_decreasing) return ChainDirection::NonDecreasing;
    return ChainDirection::Broken;
}

}  // namespace

InequalityReport differential_inequality_check(const GnnParams& params, const DenseMatrix& x,
                                               const DenseMatrix& s, const TrainIndex& idx,
                                               const DenseMatrix& y, const BoundSpec& spec) {
    params.validate();
    require_linear(params, "differential_inequality_check");
    const bool multiscale = is_multiscale(params.arch);
    if (spec.kind == RateBoundKind::SingleScale && multiscale) {
        throw UnsupportedError("case thm6 applies to non-multiscale parameters");
    }
    if (spec.kind != RateBoundKind::SingleScale && !multiscale) {
        throw UnsupportedError("cases thm1* apply to multiscale parameters");
    }

    const int depth = params.depth;
    const auto features = propagated_sequence(x, s, depth, idx);
    const DenseMatrix y_hat = forward_restricted(params, features);
    const ResidualGrad rg = loss_and_residual_grad(y_hat, y, LossKind::SquaredFrobenius);
    const DecompositionTerms terms = loss_reduction_decomposition(params, features, rg);
    const auto prefixes = prefix_products(params);

    InequalityReport report;
    report.case_token = spec.token();
    report.loss_rate = terms.loss_rate;

    const auto lambda_at = [&](int l) {
        return l == 0 ? 1.0
                      : linalg::smallest_gram_eigenvalue(prefixes[static_cast<std::size_t>(l)]);
    };

    double rate = 0.0;
    double optimum = 0.0;
    switch (spec.kind) {
        case RateBoundKind::SingleScale: {
            rate = lambda_at(depth) * sigma_sq_min(features[static_cast<std::size_t>(depth)]);
            optimum = linalg::least_squares_residual(features[static_cast<std::size_t>(depth)], y)
                          .residual;
            break;
        }
        case RateBoundKind::MultiscaleJoint: {
            double lambda = 1.0;  // scale 0 carries the identity product
            for (int l = 1; l <= depth; ++l) lambda = std::min(lambda, lambda_at(l));
            const DenseMatrix stacked = vstack(features);
            rate = lambda * sigma_sq_min(stacked);
            optimum = linalg::least_squares_residual(stacked, y).residual;
            break;
        }
        case RateBoundKind::MultiscaleBoundary: {
            const int h = spec.boundary_depth;
            if (h < 0 || h > depth) {
                throw ConfigError("boundary depth must lie in [0, H]");
            }
            rate = lambda_at(h) * sigma_sq_min(features[static_cast<std::size_t>(h)]);
            optimum =
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
            const ChainDirection dir = chain_direction(optima);
            if (dir == ChainDirection::Broken) {
                report.premise_ok = false;
                report.satisfied = false;
                return report;
            }
            optimum = dir == ChainDirection::NonIncreasing ? optima.front() : optima.back();
            for (int k = from; k <= to; ++k) {
                rate += lambda_at(k) * sigma_sq_min(features[static_cast<std::size_t>(k)]);
            }
            break;
        }
    }

    report.rate_coefficient = 4.0 * rate;
    report.gap_to_optimum = rg.loss - optimum;
    report.bound = -report.rate_coefficient * report.gap_to_optimum;
    report.satisfied =
        report.loss_rate <= report.bound + kPointwiseSlack * (1.0 + std::abs(report.bound));
    return report;
}

SkipComparisonReport skip_acceleration_check(const GnnParams& multiscale_params,
                                             const DenseMatrix& x, const DenseMatrix& s,
                                             const TrainIndex& idx, const DenseMatrix& y,
                                             LossKind kind) {
    multiscale_params.validate();
    if (multiscale_params.arch != Architecture::MultiscaleLinearGnn) {
        throw UnsupportedError("skip_acceleration_check needs multiscale linear parameters");
    }
    const int depth = multiscale_params.depth;

    // Comparison single-head model: shared B, W = W_(H).
    GnnParams single = multiscale_params;
    single.arch = Architecture::LinearGnn;
    single.w = {multiscale_params.w[static_cast<std::size_t>(depth)]};
    single.validate();

    const auto features = propagated_sequence(x, s, depth, idx);
    const DenseMatrix y_hat_multi = forward_restricted(multiscale_params, features);
    const DenseMatrix y_hat_single = forward_restricted(single, features);
    const double mismatch = max_abs_difference(y_hat_multi, y_hat_single);
    if (mismatch > 1e-9 * (1.0 + y_hat_multi.max_abs())) {
        throw ComparisonUndefinedError(
            "models disagree on the output (max deviation " + format_float(mismatch) +
            "); the loss-rate comparison needs a shared residual derivative");
    }

    const ResidualGrad rg = loss_and_residual_grad(y_hat_multi, y, kind);
    const DecompositionTerms multi_terms =
        loss_reduction_decomposition(multiscale_params, features, rg);
    const DecompositionTerms single_terms = loss_reduction_decomposition(single, features, rg);

    SkipComparisonReport report;
    report.loss_rate_multiscale = multi_terms.loss_rate;
    report.loss_rate_single = single_terms.loss_rate;
    for (int l = 0; l < depth; ++l) {
        report.shared_first_terms += multi_terms.first_terms[static_cast<std::size_t>(l)];
    }

    const auto prefixes = prefix_products(multiscale_params);
    const auto residuals = scale_residuals(features, rg, depth);
    LayerContractionSweep sweep(multiscale_params, prefixes, residuals);
    report.a_norms_sq.assign(static_cast<std::size_t>(depth), 0.0);
    report.b_norms_sq.assign(static_cast<std::size_t>(depth), 0.0);
    report.cross_terms.assign(static_cast<std::size_t>(depth), 0.0);
    for (int i = depth; i >= 1; --i) {
        const auto contractions = sweep.descend(i);
        DenseMatrix a(contractions.front().rows(), contractions.front().cols());
        for (int l = i; l < depth; ++l) {
            a += contractions[static_cast<std::size_t>(l - i)];
        }
        const DenseMatrix& b = contractions.back();
        report.a_norms_sq[static_cast<std::size_t>(i) - 1] = a.squared_frobenius_norm();
        report.b_norms_sq[static_cast<std::size_t>(i) - 1] = b.squared_frobenius_norm();
        report.cross_terms[static_cast<std::size_t>(i) - 1] = 2.0 * frobenius_dot(b, a);
    }
    for (std::size_t i = 0; i < report.a_norms_sq.size(); ++i) {
        report.condition_value += report.a_norms_sq[i] + report.cross_terms[i];
    }

    report.condition_nonnegative = report.condition_value >= 0.0;
    const double diff = report.loss_rate_multiscale - report.loss_rate_single;
    report.inequality_holds = diff <= -report.shared_first_terms + kPointwiseSlack;
    report.implication_ok = !report.condition_nonnegative || report.inequality_holds;
    return report;
}

namespace {

GnnParams perturbed_parameters(const GnnParams& params, const GradientSet& grads, double step) {
    GnnParams out = params;
    for (std::size_t i = 0; i < out.w.size(); ++i) {
        DenseMatrix delta = grads.d_w[i];
        delta *= step;
        out.w[i] -= delta;
    }
    for (std::size_t i = 0; i < out.b.size(); ++i) {
        DenseMatrix delta = grads.d_b[i];
        delta *= step;
        out.b[i] -= delta;
    }
    return out;
}

}  // namespace

DynamicsCheckReport end_to_end_dynamics_check(const GnnParams& params, const DenseMatrix& x,
                                              const DenseMatrix& s, const TrainIndex& idx,
                                              const DenseMatrix& y, double step) {
    params.validate();
    require_linear(params, "end_to_end_dynamics_check");
    if (step <= 0.0) throw ConfigError("end_to_end_dynamics_check: step must be positive");

    const int depth = params.depth;
    const bool multiscale = is_multiscale(params.arch);
    const auto features = propagated_sequence(x, s, depth, idx);
    const DenseMatrix y_hat = forward_restricted(params, features);
    const ResidualGrad rg = loss_and_residual_grad(y_hat, y, LossKind::SquaredFrobenius);
    const auto prefixes = prefix_products(params);
    const auto residuals = scale_residuals(features, rg, depth);

    // Per layer i: A_i = sum over head-carrying scales k of
    // (W_(k) B̄^{(i+1:k)})ᵀ N_k, plus the raw head factors for reuse below.
    std::vector<DenseMatrix> layer_acc(static_cast<std::size_t>(depth) + 1);
    std::vector<std::vector<DenseMatrix>> head_factors(static_cast<std::size_t>(depth) + 1);
    {
        std::vector<DenseMatrix> heads(static_cast<std::size_t>(depth) + 1);
        for (int i = depth; i >= 1; --i) {
            const int first_scale = multiscale ? i : depth;
            if (i == depth) {
                heads[static_cast<std::size_t>(depth)] =
                    multiscale ? params.w[static_cast<std::size_t>(depth)] : params.w[0];
            } else {
                for (int l = multiscale ? i + 1 : depth; l <= depth; ++l) {
                    heads[static_cast<std::size_t>(l)] =
                        heads[static_cast<std::size_t>(l)] * params.b[static_cast<std::size_t>(i)];
                }
                if (multiscale) {
                    heads[static_cast<std::size_t>(i)] = params.w[static_cast<std::size_t>(i)];
                }
            }
            DenseMatrix acc = heads[static_cast<std::size_t>(first_scale)].transposed() *
                              residuals[static_cast<std::size_t>(first_scale)];
            for (int k = first_scale + 1; k <= depth; ++k) {
                acc += heads[static_cast<std::size_t>(k)].transposed() *
                       residuals[static_cast<std::size_t>(k)];
            }
            layer_acc[static_cast<std::size_t>(i)] = std::move(acc);
            head_factors[static_cast<std::size_t>(i)] = heads;
        }
    }

    const auto predicted_velocity = [&](int scale) {
        const DenseMatrix& prefix = prefixes[static_cast<std::size_t>(scale)];
        const DenseMatrix gram = prefix.transposed() * prefix;
        DenseMatrix vel = residuals[static_cast<std::size_t>(scale)] * gram;
        for (int i = 1; i <= scale; ++i) {
            const DenseMatrix& head = head_factors[static_cast<std::size_t>(i)]
                                                  [static_cast<std::size_t>(scale)];
            const DenseMatrix& low_prefix = prefixes[static_cast<std::size_t>(i) - 1];
            vel += (head * layer_acc[static_cast<std::size_t>(i)]) *
                   (low_prefix.transposed() * low_prefix);
        }
        vel *= -1.0;
        return vel;
    };

    const GradientSet grads = analytic_gradients_linear(params, features, rg);
    const GnnParams moved = perturbed_parameters(params, grads, step);
    const auto z_now = end_to_end_state(params);
    const auto z_moved = end_to_end_state(moved);

    DynamicsCheckReport report;
    report.step = step;
    for (std::size_t zi = 0; zi < z_now.size(); ++zi) {
        const int scale = multiscale ? static_cast<int>(zi) : depth;
        const DenseMatrix predicted = predicted_velocity(scale);
        DenseMatrix measured = z_moved[zi];
        measured -= z_now[zi];
        measured *= 1.0 / step;
        report.max_deviation =
            std::max(report.max_deviation, max_abs_difference(predicted, measured));
        report.max_rate = std::max(report.max_rate, predicted.max_abs());
    }
    return report;
}

}  // namespace gnnflow
