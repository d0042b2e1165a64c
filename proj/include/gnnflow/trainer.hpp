#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "gnnflow/gradients.hpp"
#include "gnnflow/model.hpp"
#include "gnnflow/theory.hpp"

namespace gnnflow {

enum class Integrator { Euler, RungeKutta4 };
enum class OptimizerKind { GradientDescent, Adam };

const char* to_string(Integrator integrator);
Integrator integrator_from_string(const std::string& name);
const char* to_string(OptimizerKind optimizer);
OptimizerKind optimizer_from_string(const std::string& name);

// Full-batch training configuration. Euler is the flow discretization
// theta <- theta - lr * grad; RK4 integrates the same field with four stages
// per step. Adam is an optional optimizer for qualitative runs only.
struct TrainConfig {
    LossKind loss = LossKind::SquaredFrobenius;
    double lr = 1e-3;
    long steps = 0;
    long record_every = 1;
    Integrator integrator = Integrator::Euler;
    OptimizerKind optimizer = OptimizerKind::GradientDescent;
    std::uint64_t seed = 0;  // config identity; the optimizers draw no randomness
    bool compute_decomposition = false;
    bool snapshot_params = false;
    double divergence_threshold = 1e12;

    void validate() const;
};

struct TrajectoryCheckpoint {
    long step = 0;
    double t = 0.0;  // step * lr exactly
    double loss = 0.0;
    std::vector<double> lambda_min;  // smallest Gram eigenvalue of B̄^{(1:l)}, l = 0..H
    std::optional<DecompositionTerms> decomposition;
    std::optional<GnnParams> params;
};

struct TrajectoryRecord {
    LossKind loss_kind = LossKind::SquaredFrobenius;
    double lr = 0.0;
    int depth = 0;
    bool diverged = false;
    std::vector<TrajectoryCheckpoint> checkpoints;
};

struct TrainResult {
    GnnParams params;
    TrajectoryRecord trajectory;
};

// Deterministic full-batch training with trajectory recording. A checkpoint
// is taken at step 0, every record_every steps, and at the final step. On
// divergence (non-finite loss or loss above the threshold) recording stops
// and the trajectory is flagged, without an exception.
TrainResult train(const GnnParams& initial, const DenseMatrix& x, const DenseMatrix& s,
                  const TrainIndex& idx, const DenseMatrix& y, const TrainConfig& cfg);

// Running minimum of the recorded per-layer Gram eigenvalue: pairs (T, value),
// nonincreasing in T.
std::vector<std::pair<double, double>> lambda_T_path(const TrajectoryRecord& traj, int layer);

}  // namespace gnnflow
