#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gnnflow/graph.hpp"
#include "gnnflow/model.hpp"
#include "gnnflow/theory.hpp"
#include "gnnflow/trainer.hpp"

namespace gnnflow {

enum class GraphKind { Path, Cycle, Star, ErdosRenyi };

const char* to_string(GraphKind kind);
GraphKind graph_kind_from_string(const std::string& name);

enum class LabelMode { Signal, UniformNoise };

const char* to_string(LabelMode mode);
LabelMode label_mode_from_string(const std::string& name);

// Desk-scale synthetic instances. Signal labels are
// Y = W* X (S^{signal_depth})_{*I} + noise_sigma * N(0,1), optionally reduced
// to one-hot via per-column argmax; uniform-noise labels pick a class
// uniformly at random per training node (always one-hot). Draw order is
// edges, features, train index, labels, so signal and noise variants of the
// same seed share graph, features, and split.
struct SyntheticSpec {
    GraphKind graph_kind = GraphKind::Path;
    double er_probability = 0.5;
    int node_count = 8;
    int feature_dim = 4;
    int label_dim = 2;
    AggregationKind aggregation = AggregationKind::Gcn;  // used by signal labels
    LabelMode label_mode = LabelMode::Signal;
    int signal_depth = 1;
    double noise_sigma = 0.0;
    bool one_hot_labels = false;
    double train_fraction = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticData {
    Graph graph;
    DenseMatrix features;
    DenseMatrix labels;  // m_y x n_bar
    TrainIndex train_index;
};

SyntheticData gen_synthetic(const SyntheticSpec& spec);

enum class ExperimentFamily { SkipComparison, DepthSweep, LabelComparison, ConditionScan };

const char* to_string(ExperimentFamily family);
ExperimentFamily experiment_family_from_string(const std::string& name);

struct ExperimentSpec {
    ExperimentFamily family = ExperimentFamily::DepthSweep;
    std::vector<Architecture> archs = {Architecture::LinearGnn};
    std::vector<AggregationKind> aggregations = {AggregationKind::Gcn};
    std::vector<int> depths = {2};
    int hidden_dim = 8;
    InitScheme init_scheme = InitScheme::UniformFanIn;
    double init_sigma = 1.0;
    std::uint64_t init_seed = 0;
    TrainConfig train;
    SyntheticSpec synthetic;
    int condition_max_depth = 3;

    void validate() const;
};

struct ExperimentRow {
    std::string family;       // family tag; label comparison rows carry the variant
    std::string arch;         // single | multiscale
    std::string aggregation;  // gcn | gin
    std::string activation;   // linear | relu
    int depth = 0;
    std::uint64_t seed = 0;
    long step = 0;
    double t = 0.0;
    double loss = 0.0;
};

struct ExperimentCellSummary {
    std::string family;
    std::string arch;
    std::string aggregation;
    std::string activation;
    int depth = 0;
    std::uint64_t seed = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    bool diverged = false;
};

struct ExperimentReport {
    std::vector<ExperimentRow> rows;
    std::vector<ExperimentCellSummary> summaries;
    // ConditionScan output: one report per aggregation kind.
    std::vector<std::pair<AggregationKind, ConditionReport>> condition_reports;
};

// Pre-loaded data for running experiments on a real dataset instead of the
// synthetic spec.
struct ExperimentData {
    Graph graph;
    DenseMatrix features;
    DenseMatrix labels;
    TrainIndex train_index;
};

// Runs every grid cell with a shared data instance per family. A diverged
// cell keeps its rows up to the divergence point and is flagged in its
// summary; the grid continues.
ExperimentReport run_experiment(const ExperimentSpec& spec,
                                const std::optional<ExperimentData>& data = std::nullopt);

}  // namespace gnnflow
