#include "gnnflow/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gnnflow/common.hpp"

namespace gnnflow {

const char* to_string(GraphKind kind) {
    switch (kind) {
        case GraphKind::Path: return "path";
        case GraphKind::Cycle: return "cycle";
        case GraphKind::Star: return "star";
        case GraphKind::ErdosRenyi: return "erdos_renyi";
    }
    return "path";
}

GraphKind graph_kind_from_string(const std::string& name) {
    if (name == "path") return GraphKind::Path;
    if (name == "cycle") return GraphKind::Cycle;
    if (name == "star") return GraphKind::Star;
    if (name == "erdos_renyi") return GraphKind::ErdosRenyi;
    throw ConfigError("unknown graph kind: " + name);
}

const char* to_string(LabelMode mode) {
    return mode == LabelMode::Signal ? "signal" : "uniform_noise";
}

LabelMode label_mode_from_string(const std::string& name) {
    if (name == "signal") return LabelMode::Signal;
    if (name == "uniform_noise") return LabelMode::UniformNoise;
    throw ConfigError("unknown label mode: " + name);
}

void SyntheticSpec::validate() const {
    if (node_count < 1) throw ConfigError("SyntheticSpec: node_count must be >= 1");
    if (feature_dim < 1 || label_dim < 1) throw ConfigError("SyntheticSpec: bad dimensions");
    if (train_fraction <= 0.0 || train_fraction > 1.0) {
        throw ConfigError("SyntheticSpec: train_fraction must lie in (0, 1]");
    }
    if (er_probability < 0.0 || er_probability > 1.0) {
        throw ConfigError("SyntheticSpec: erdos_renyi probability must lie in [0, 1]");
    }
    if (signal_depth < 0) throw ConfigError("SyntheticSpec: signal_depth must be >= 0");
    if (noise_sigma < 0.0) throw ConfigError("SyntheticSpec: noise_sigma must be >= 0");
}

namespace {

std::vector<std::pair<int, int>> make_edges(const SyntheticSpec& spec, Rng& rng) {
    const int n = spec.node_count;
    std::vector<std::pair<int, int>> edges;
    switch (spec.graph_kind) {
        case GraphKind::Path:
            for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
            break;
        case GraphKind::Cycle:
            for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
            if (n > 2) edges.emplace_back(n - 1, 0);
            break;
        case GraphKind::Star:
            for (int i = 1; i < n; ++i) edges.emplace_back(0, i);
            break;
        case GraphKind::ErdosRenyi:
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    if (rng.uniform() < spec.er_probability) edges.emplace_back(i, j);
                }
            }
            break;
    }
    return edges;
}

DenseMatrix one_hot_from_argmax(const DenseMatrix& scores) {
    DenseMatrix out(scores.rows(), scores.cols());
    for (std::size_t j = 0; j < scores.cols(); ++j) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < scores.rows(); ++i) {
            if (scores(i, j) > scores(best, j)) best = i;
        }
        out(best, j) = 1.0;
    }
    return out;
}

}  // namespace

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    SyntheticData data;
    data.graph = Graph::from_edges(spec.node_count, make_edges(spec, rng));

    data.features = DenseMatrix(static_cast<std::size_t>(spec.feature_dim),
                                static_cast<std::size_t>(spec.node_count));
    for (std::size_t i = 0; i < data.features.rows(); ++i) {
        for (std::size_t j = 0; j < data.features.cols(); ++j) {
            data.features(i, j) = rng.gaussian();
        }
    }

    // Seeded split: Fisher-Yates, take the first ceil-rounded fraction, sort.
    const int n_train = std::max(
        1, static_cast<int>(std::llround(spec.train_fraction * spec.node_count)));
    std::vector<int> nodes(static_cast<std::size_t>(spec.node_count));
    std::iota(nodes.begin(), nodes.end(), 0);
    for (std::size_t i = nodes.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_index(i));
        std::swap(nodes[i - 1], nodes[j]);
    }
    nodes.resize(static_cast<std::size_t>(std::min(n_train, spec.node_count)));
    data.train_index = TrainIndex::from_ids(std::move(nodes), spec.node_count);

    const std::size_t n_bar = data.train_index.size();
    if (spec.label_mode == LabelMode::UniformNoise) {
        data.labels = DenseMatrix(static_cast<std::size_t>(spec.label_dim), n_bar);
        for (std::size_t j = 0; j < n_bar; ++j) {
            const auto cls = rng.uniform_index(static_cast<std::uint64_t>(spec.label_dim));
            data.labels(static_cast<std::size_t>(cls), j) = 1.0;
        }
        return data;
    }

    DenseMatrix w_star(static_cast<std::size_t>(spec.label_dim),
                       static_cast<std::size_t>(spec.feature_dim));
    for (std::size_t i = 0; i < w_star.rows(); ++i) {
        for (std::size_t j = 0; j < w_star.cols(); ++j) w_star(i, j) = rng.gaussian();
    }
    const DenseMatrix s = aggregation_matrix(data.graph, spec.aggregation);
    DenseMatrix y = w_star * propagated_features(data.features, s, spec.signal_depth,
                                                 data.train_index);
    if (spec.noise_sigma > 0.0) {
        for (std::size_t i = 0; i < y.rows(); ++i) {
            for (std::size_t j = 0; j < y.cols(); ++j) {
                y(i, j) += spec.noise_sigma * rng.gaussian();
            }
        }
    }
    data.labels = spec.one_hot_labels ? one_hot_from_argmax(y) : std::move(y);
    return data;
}

const char* to_string(ExperimentFamily family) {
    switch (family) {
        case ExperimentFamily::SkipComparison: return "skip_comparison";
        case ExperimentFamily::DepthSweep: return "depth_sweep";
        case ExperimentFamily::LabelComparison: return "label_comparison";
        case ExperimentFamily::ConditionScan: return "condition_scan";
    }
    return "depth_sweep";
}

ExperimentFamily experiment_family_from_string(const std::string& name) {
    if (name == "skip_comparison") return ExperimentFamily::SkipComparison;
    if (name == "depth_sweep") return ExperimentFamily::DepthSweep;
    if (name == "label_comparison") return ExperimentFamily::LabelComparison;
    if (name == "condition_scan") return ExperimentFamily::ConditionScan;
    throw ConfigError("unknown experiment family: " + name);
}

void ExperimentSpec::validate() const {
    if (archs.empty() || aggregations.empty()) throw ConfigError("ExperimentSpec: empty grid");
    if (depths.empty()) throw ConfigError("ExperimentSpec: no depths");
    for (int d : depths) {
        if (d < 0) throw ConfigError("ExperimentSpec: negative depth");
    }
    if (hidden_dim < 1) throw ConfigError("ExperimentSpec: hidden_dim must be >= 1");
    if (condition_max_depth < 0) throw ConfigError("ExperimentSpec: negative condition depth");
    train.validate();
    synthetic.validate();
}

namespace {

// Multiscale twin with shared B and the given single-head W on top; lower
// heads start at zero so both models emit the same initial output.
GnnParams lift_to_multiscale(const GnnParams& single) {
    GnnParams multi = single;
    multi.arch = has_relu(single.arch) ? Architecture::MultiscaleReluGnn
                                       : Architecture::MultiscaleLinearGnn;
    multi.w.clear();
    for (int l = 0; l < single.depth; ++l) {
        multi.w.emplace_back(static_cast<std::size_t>(single.output_dim),
                             static_cast<std::size_t>(single.dims[l]));
    }
    multi.w.push_back(single.w[0]);
    multi.validate();
    return multi;
}

struct Cell {
    std::string family;
    Architecture arch;
    AggregationKind aggregation;
    int depth;
    std::uint64_t seed;
    GnnParams params;
    const DenseMatrix* labels;  // data variant for this cell
};

Architecture strip_multiscale(Architecture arch) {
    return has_relu(arch) ? Architecture::ReluGnn : Architecture::LinearGnn;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentSpec& spec,
                                const std::optional<ExperimentData>& external) {
    spec.validate();

    ExperimentData data;
    if (external.has_value()) {
        data = *external;
    } else {
        SyntheticData synth = gen_synthetic(spec.synthetic);
        data = {std::move(synth.graph), std::move(synth.features), std::move(synth.labels),
                std::move(synth.train_index)};
    }

    ExperimentReport report;

    if (spec.family == ExperimentFamily::ConditionScan) {
        for (AggregationKind agg : spec.aggregations) {
            const DenseMatrix s = aggregation_matrix(data.graph, agg);
            report.condition_reports.emplace_back(
                agg, condition_report(data.features, s, data.train_index, data.labels,
                                      spec.condition_max_depth, true));
        }
        return report;
    }

    // Noise-label variant for the label comparison: a uniform class redraw
    // over the same split (one pinned redraw per seed).
    DenseMatrix noise_labels;
    if (spec.family == ExperimentFamily::LabelComparison) {
        const auto n_bar = data.train_index.size();
        const auto m_y = data.labels.rows();
        noise_labels = DenseMatrix(m_y, n_bar);
        Rng rng(spec.synthetic.seed + 0x517cc1b727220a95ull);
        for (std::size_t j = 0; j < n_bar; ++j) {
            noise_labels(static_cast<std::size_t>(rng.uniform_index(m_y)), j) = 1.0;
        }
    }

    const int m_x = static_cast<int>(data.features.rows());
    const int m_y = static_cast<int>(data.labels.rows());
    std::uint64_t cell_ordinal = 0;
    const auto init_cell = [&](Architecture arch, int depth, std::uint64_t seed) {
        const std::vector<int> hidden(static_cast<std::size_t>(depth), spec.hidden_dim);
        return init_params(arch, depth, m_x, hidden, m_y, spec.init_scheme, seed,
                           spec.init_sigma);
    };

    std::vector<Cell> cells;
    switch (spec.family) {
        case ExperimentFamily::SkipComparison: {
            const int depth = spec.depths.front();
            for (AggregationKind agg : spec.aggregations) {
                // One matched pair per distinct activation in the grid.
                std::vector<Architecture> bases;
                for (Architecture arch : spec.archs) {
                    const Architecture base = strip_multiscale(arch);
                    if (std::find(bases.begin(), bases.end(), base) == bases.end()) {
                        bases.push_back(base);
                    }
                }
                for (Architecture base : bases) {
                    const std::uint64_t seed = spec.init_seed + cell_ordinal++;
                    GnnParams single = init_cell(base, depth, seed);
                    GnnParams multi = lift_to_multiscale(single);
                    cells.push_back({to_string(spec.family), base, agg, depth, seed,
                                     std::move(single), &data.labels});
                    cells.push_back({to_string(spec.family), multi.arch, agg, depth, seed,
                                     std::move(multi), &data.labels});
                }
            }
            break;
        }
        case ExperimentFamily::DepthSweep: {
            for (Architecture arch : spec.archs) {
                for (AggregationKind agg : spec.aggregations) {
                    for (int depth : spec.depths) {
                        const std::uint64_t seed = spec.init_seed + cell_ordinal++;
                        cells.push_back({to_string(spec.family), arch, agg, depth, seed,
                                         init_cell(arch, depth, seed), &data.labels});
                    }
                }
            }
            break;
        }
        case ExperimentFamily::LabelComparison: {
            const int depth = spec.depths.front();
            for (Architecture arch : spec.archs) {
                for (AggregationKind agg : spec.aggregations) {
                    const std::uint64_t seed = spec.init_seed + cell_ordinal++;
                    GnnParams params = init_cell(arch, depth, seed);
                    cells.push_back({"label_signal", arch, agg, depth, seed, params,
                                     &data.labels});
                    cells.push_back({"label_noise", arch, agg, depth, seed, std::move(params),
                                     &noise_labels});
                }
            }
            break;
        }
        case ExperimentFamily::ConditionScan:
            break;  // handled above
    }

    for (const Cell& cell : cells) {
        const DenseMatrix s = aggregation_matrix(data.graph, cell.aggregation);
        const TrainResult result =
            train(cell.params, data.features, s, data.train_index, *cell.labels, spec.train);

        ExperimentCellSummary summary;
        summary.family = cell.family;
        summary.arch = is_multiscale(cell.arch) ? "multiscale" : "single";
        summary.aggregation = to_string(cell.aggregation);
        summary.activation = has_relu(cell.arch) ? "relu" : "linear";
        summary.depth = cell.depth;
        summary.seed = cell.seed;
        summary.diverged = result.trajectory.diverged;
        if (!result.trajectory.checkpoints.empty()) {
            summary.initial_loss = result.trajectory.checkpoints.front().loss;
            summary.final_loss = result.trajectory.checkpoints.back().loss;
        }
        for (const auto& cp : result.trajectory.checkpoints) {
            report.rows.push_back({summary.family, summary.arch, summary.aggregation,
                                   summary.activation, cell.depth, cell.seed, cp.step, cp.t,
                                   cp.loss});
        }
        report.summaries.push_back(std::move(summary));
    }
    return report;
}

}  // namespace gnnflow
