#pragma once

#include <span>
#include <string>
#include <vector>

#include "gnnflow/dense_matrix.hpp"
#include "gnnflow/gradients.hpp"
#include "gnnflow/graph.hpp"
#include "gnnflow/model.hpp"

namespace gnnflow {

// Data-side spectral conditions and global minima per depth l = 0..max_depth.
// sigma_sq_linear[l]      smallest singular value squared of X(S^l)_{*I}
// sigma_sq_multiscale[l]  same for the stacked features up to l
// global_min_linear[l]    least-squares optimum of the depth-l features
// global_min_multiscale[l] optimum over all scales 0..l jointly
struct ConditionReport {
    int max_depth = 0;
    bool include_multiscale = true;
    std::vector<double> sigma_sq_linear;
    std::vector<double> global_min_linear;
    std::vector<double> sigma_sq_multiscale;
    std::vector<double> global_min_multiscale;
};

ConditionReport condition_report(const DenseMatrix& x, const DenseMatrix& s,
                                 const TrainIndex& idx, const DenseMatrix& y, int max_depth,
                                 bool include_multiscale = true);

// Unconstrained optimum of ||Z * X(S^depth)_{*I} - Y||_F^2. This is the
// projection-residual value the rate bounds are stated against; when hidden
// widths fall below min(m_x, m_y) the architecture-constrained optimum can be
// larger and this value is a lower bound.
double global_minimum_linear(const DenseMatrix& x, const DenseMatrix& s, const TrainIndex& idx,
                             const DenseMatrix& y, int depth);

// Same over the stacked features of scales 0..depth.
double global_minimum_multiscale(const DenseMatrix& x, const DenseMatrix& s,
                                 const TrainIndex& idx, const DenseMatrix& y, int depth);

// Exact loss-reduction split under gradient flow. first_terms are the
// per-scale quadratic-form terms (one per scale for multiscale parameters, a
// single one otherwise); second_terms are the per-layer coupling terms
// i = 1..H. loss_rate = dL/dt = -(sum of all terms).
struct DecompositionTerms {
    std::vector<double> first_terms;
    std::vector<double> second_terms;
    double loss_rate = 0.0;

    double first_sum() const;
    double second_sum() const;
};

// Defined for linear architectures; ReLU parameters raise UnsupportedError.
// All quadratic forms are evaluated through the contraction identities
// ||vec[M]||²_{F_(l)} = ||B̄^{(1:l)} Mᵀ||²_F and
// J_{(i,l)} vec[M] = vec[(W_(l) B̄^{(i+1:l)})ᵀ M (B̄^{(1:i-1)})ᵀ],
// so no Kronecker product is ever materialized.
DecompositionTerms loss_reduction_decomposition(const GnnParams& params, const DenseMatrix& x,
                                                const DenseMatrix& s, const TrainIndex& idx,
                                                const ResidualGrad& rg);

DecompositionTerms loss_reduction_decomposition(const GnnParams& params,
                                                std::span<const DenseMatrix> restricted_features,
                                                const ResidualGrad& rg);

// Which linear-rate bound to evaluate. External case tokens: thm6 (single
// scale), thm1i (joint multiscale), thm1ii:H' (boundary scale), thm1iii:l,l'
// (monotone chain of optima).
enum class RateBoundKind { SingleScale, MultiscaleJoint, MultiscaleBoundary, MultiscaleMonotone };

struct BoundSpec {
    RateBoundKind kind = RateBoundKind::SingleScale;
    int boundary_depth = 0;  // MultiscaleBoundary
    int chain_from = 0;      // MultiscaleMonotone
    int chain_to = 0;

    static BoundSpec parse(const std::string& token);
    std::string token() const;
};

// Pointwise evaluation of the differential inequality at the given state:
// loss_rate is the exact decomposition value, bound the rate-form right-hand
// side. For the monotone case the chain premise is verified first; on failure
// premise_ok is false and no inequality is asserted.
struct InequalityReport {
    std::string case_token;
    double loss_rate = 0.0;
    double bound = 0.0;
    double rate_coefficient = 0.0;  // 4 * lambda * sigma² (summed for chains)
    double gap_to_optimum = 0.0;    // L - L*
    bool premise_ok = true;
    bool satisfied = false;
};

InequalityReport differential_inequality_check(const GnnParams& params, const DenseMatrix& x,
                                               const DenseMatrix& s, const TrainIndex& idx,
                                               const DenseMatrix& y, const BoundSpec& spec);

// Loss-rate comparison between multiscale parameters and the single-scale
// network sharing B and the top head. Both models must produce the same
// output (ComparisonUndefinedError otherwise) so the residual derivative
// coincides. condition_value = sum_i (||a_i||² + 2 b_iᵀ a_i).
struct SkipComparisonReport {
    double loss_rate_multiscale = 0.0;
    double loss_rate_single = 0.0;
    double condition_value = 0.0;
    double shared_first_terms = 0.0;  // sum of first terms over scales l < H
    std::vector<double> a_norms_sq;   // per layer i = 1..H
    std::vector<double> b_norms_sq;
    std::vector<double> cross_terms;  // 2 b_iᵀ a_i
    bool condition_nonnegative = false;
    bool inequality_holds = false;  // rate_multi - rate_single <= -shared_first_terms (+tol)
    bool implication_ok = false;
};

SkipComparisonReport skip_acceleration_check(const GnnParams& multiscale_params,
                                             const DenseMatrix& x, const DenseMatrix& s,
                                             const TrainIndex& idx, const DenseMatrix& y,
                                             LossKind kind);

// Compares the closed-form end-to-end velocity dZ_(l)/dt against a small
// explicit-Euler probe of the parameter flow. Deviation is O(step).
struct DynamicsCheckReport {
    double step = 0.0;
    double max_deviation = 0.0;  // entrywise |predicted - measured|
    double max_rate = 0.0;       // entrywise |predicted|, scale reference
};

DynamicsCheckReport end_to_end_dynamics_check(const GnnParams& params, const DenseMatrix& x,
                                              const DenseMatrix& s, const TrainIndex& idx,
                                              const DenseMatrix& y, double step);

}  // namespace gnnflow
