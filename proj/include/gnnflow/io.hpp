#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gnnflow/graph.hpp"
#include "gnnflow/harness.hpp"
#include "gnnflow/theory.hpp"
#include "gnnflow/trainer.hpp"
#include "gnnflow/trajectory_analysis.hpp"

namespace gnnflow::io {

// Plain-text dataset formats:
//   edges:    whitespace-separated integer pairs, one per line, '#' comments
//   features: CSV of floats, row i = node i
//   labels:   CSV `node_id,class_index`
//   mask:     one training node id per line
struct DatasetPaths {
    std::string edges_file;
    std::string features_file;
    std::string labels_file;
    std::string mask_file;
};

struct Dataset {
    Graph graph;
    DenseMatrix features;  // m_x x n
    DenseMatrix labels;    // one-hot, num_classes x n_bar
    TrainIndex train_index;
    int num_classes = 0;
};

// Parses and cross-validates all four files. Each malformed input raises a
// ParseError naming the file and line. Directed or duplicated edges are
// symmetrized/deduplicated with a warning on stderr.
Dataset parse_dataset(const DatasetPaths& paths);

// Conventional file names (edges.txt, features.csv, labels.csv, mask.txt)
// inside a dataset directory.
DatasetPaths dataset_paths_in_dir(const std::string& dir);
Dataset load_dataset_dir(const std::string& dir);

// Writes the four files; labels must be one-hot columns.
void write_dataset_dir(const Dataset& dataset, const std::string& dir);

// Writes content byte-for-byte ('\n' endings come from the producers).
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);
nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

// CSV renderers. All floats carry 17 significant digits.
std::string trajectory_csv(const TrajectoryRecord& traj);
std::string bound_trace_csv(const BoundTrace& trace);
std::string experiment_csv(const std::vector<ExperimentRow>& rows);

nlohmann::json to_json(const ConditionReport& report);
nlohmann::json to_json(const DecompositionTerms& terms);
nlohmann::json to_json(const SkipComparisonReport& report);
nlohmann::json to_json(const InequalityReport& report);
nlohmann::json to_json(const MarginReport& report);
nlohmann::json to_json(const DynamicsCheckReport& report);

// Config schemas.
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SyntheticSpec& spec);
TrainConfig train_config_from_json(const nlohmann::json& j);
ExperimentSpec experiment_spec_from_json(const nlohmann::json& j);

// Model/optimization settings for the `train` command.
struct RunConfig {
    Architecture arch = Architecture::LinearGnn;
    AggregationKind aggregation = AggregationKind::Gcn;
    int depth = 2;
    std::vector<int> hidden_dims;  // resolved to depth entries
    int output_dim = 0;            // 0: use the dataset's class count
    InitScheme init_scheme = InitScheme::UniformFanIn;
    double init_sigma = 1.0;
    std::uint64_t init_seed = 0;
    TrainConfig train;
};

RunConfig run_config_from_json(const nlohmann::json& j);

}  // namespace gnnflow::io
