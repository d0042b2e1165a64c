#pragma once

#include <vector>

#include "gnnflow/theory.hpp"
#include "gnnflow/trainer.hpp"

namespace gnnflow {

// Empirical singular margin over the recorded sublevel-set states.
// gamma_empirical = min sigma_min(B̄^{(1:l)}) over snapshots with loss <= the
// initial loss; lambda_floor the matching minimum Gram eigenvalue. satisfied
// checks lambda_floor >= gamma² (equality-tolerant).
struct MarginReport {
    int layer = 0;
    double gamma_empirical = 0.0;
    double lambda_floor = 0.0;
    bool satisfied = false;
};

// Requires parameter snapshots in the trajectory; ConfigError otherwise.
MarginReport margin_trace(const TrajectoryRecord& traj, int layer);

// One row per checkpoint of the integrated rate bound:
// lhs = L(t) - L*, rhs = (L0 - L*) * exp(-4 * rate(t) * t) with rate built
// from the running-minimum Gram eigenvalues and the data-side sigma².
struct BoundTraceRow {
    long step = 0;
    double t = 0.0;
    double loss = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    bool satisfied = false;  // lhs <= rhs * 1.05 (Euler slack)
};

struct BoundTrace {
    std::string case_token;
    bool premise_ok = true;
    double optimum = 0.0;
    double initial_gap = 0.0;
    std::vector<BoundTraceRow> rows;

    bool all_satisfied() const;
};

// Squared-loss trajectories only (UnsupportedError otherwise). The monotone
// case verifies the chain premise first and returns premise_ok = false with
// no rows when it fails.
BoundTrace convergence_bound_trace(const TrajectoryRecord& traj, const DenseMatrix& x,
                                   const DenseMatrix& s, const TrainIndex& idx,
                                   const DenseMatrix& y, const BoundSpec& spec);

// Recorded decomposition sums per checkpoint, for plotting and comparison.
struct SignalTermRow {
    long step = 0;
    double t = 0.0;
    double first_sum = 0.0;
    double second_sum = 0.0;
};

std::vector<SignalTermRow> signal_term_report(const TrajectoryRecord& traj);

}  // namespace gnnflow
