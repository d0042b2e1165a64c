#include "gnnflow/io.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gnnflow/common.hpp"

namespace gnnflow::io {

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::string strip_comment(const std::string& line) {
    const auto pos = line.find('#');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t") == std::string::npos;
}

long parse_int(const std::string& token, const std::string& file, long line_no) {
    char* end = nullptr;
    const long value = std::strtol(token.c_str(), &end, 10);
    if (end == token.c_str() || *end != '\0') {
        throw ParseError(file, line_no, "expected an integer, got '" + token + "'");
    }
    return value;
}

double parse_double(const std::string& token, const std::string& file, long line_no) {
    char* end = nullptr;
    const double value = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') {
        throw ParseError(file, line_no, "expected a number, got '" + token + "'");
    }
    return value;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string token;
    std::istringstream stream(line);
    while (std::getline(stream, token, sep)) out.push_back(token);
    return out;
}

}  // namespace

Dataset parse_dataset(const DatasetPaths& paths) {
    Dataset dataset;

    // Features define n and m_x.
    {
        const auto lines = read_lines(paths.features_file);
        std::vector<double> entries;
        std::size_t cols = 0;
        std::size_t rows = 0;
        for (std::size_t k = 0; k < lines.size(); ++k) {
            if (blank(lines[k])) continue;
            const auto tokens = split(lines[k], ',');
            if (cols == 0) cols = tokens.size();
            if (tokens.size() != cols) {
                throw ParseError(paths.features_file, static_cast<long>(k) + 1,
                                 "expected " + std::to_string(cols) + " values");
            }
            for (const auto& token : tokens) {
                entries.push_back(
                    parse_double(token, paths.features_file, static_cast<long>(k) + 1));
            }
            ++rows;
        }
        if (rows == 0) {
            throw ParseError(paths.features_file, 0, "no feature rows");
        }
        // Row i of the file is node i; the in-memory layout is m_x x n.
        DenseMatrix by_node(rows, cols, std::move(entries));
        dataset.features = by_node.transposed();
    }
    const int n = static_cast<int>(dataset.features.cols());

    // Edges.
    {
        const auto lines = read_lines(paths.edges_file);
        std::vector<std::pair<int, int>> raw;
        for (std::size_t k = 0; k < lines.size(); ++k) {
            const std::string body = strip_comment(lines[k]);
            if (blank(body)) continue;
            std::istringstream stream(body);
            std::string a;
            std::string b;
            std::string extra;
            if (!(stream >> a >> b) || (stream >> extra)) {
                throw ParseError(paths.edges_file, static_cast<long>(k) + 1,
                                 "expected 'u v' node pair");
            }
            const long u = parse_int(a, paths.edges_file, static_cast<long>(k) + 1);
            const long v = parse_int(b, paths.edges_file, static_cast<long>(k) + 1);
            if (u < 0 || v < 0 || u >= n || v >= n) {
                throw ParseError(paths.edges_file, static_cast<long>(k) + 1,
                                 "node id out of range: " + body);
            }
            raw.emplace_back(static_cast<int>(u), static_cast<int>(v));
        }
        bool irregular = false;
        dataset.graph = Graph::from_edges(n, raw, &irregular);
        if (irregular) {
            std::cerr << "warning: " << paths.edges_file
                      << ": directed/duplicate/self-loop edges were normalized\n";
        }
    }

    // Labels.
    std::map<int, int> class_of;
    {
        const auto lines = read_lines(paths.labels_file);
        int max_class = -1;
        for (std::size_t k = 0; k < lines.size(); ++k) {
            if (blank(lines[k])) continue;
            const auto tokens = split(lines[k], ',');
            if (tokens.size() != 2) {
                throw ParseError(paths.labels_file, static_cast<long>(k) + 1,
                                 "expected 'node_id,class_index'");
            }
            const long node = parse_int(tokens[0], paths.labels_file, static_cast<long>(k) + 1);
            const long cls = parse_int(tokens[1], paths.labels_file, static_cast<long>(k) + 1);
            if (node < 0 || node >= n) {
                throw ParseError(paths.labels_file, static_cast<long>(k) + 1,
                                 "label for unknown node " + std::to_string(node));
            }
            if (cls < 0) {
                throw ParseError(paths.labels_file, static_cast<long>(k) + 1,
                                 "negative class index");
            }
            class_of[static_cast<int>(node)] = static_cast<int>(cls);
            max_class = std::max(max_class, static_cast<int>(cls));
        }
        if (class_of.empty()) {
            throw ParseError(paths.labels_file, 0, "no labels");
        }
        dataset.num_classes = max_class + 1;
    }

    // Mask defines the training index set.
    {
        const auto lines = read_lines(paths.mask_file);
        std::vector<int> ids;
        for (std::size_t k = 0; k < lines.size(); ++k) {
            const std::string body = strip_comment(lines[k]);
            if (blank(body)) continue;
            std::istringstream stream(body);
            std::string token;
            std::string extra;
            if (!(stream >> token) || (stream >> extra)) {
                throw ParseError(paths.mask_file, static_cast<long>(k) + 1,
                                 "expected one node id per line");
            }
            const long node = parse_int(token, paths.mask_file, static_cast<long>(k) + 1);
            if (node < 0 || node >= n) {
                throw ParseError(paths.mask_file, static_cast<long>(k) + 1,
                                 "node id out of range: " + token);
            }
            ids.push_back(static_cast<int>(node));
        }
        if (ids.empty()) {
            throw ParseError(paths.mask_file, 0, "empty mask");
        }
        dataset.train_index = TrainIndex::from_ids(std::move(ids), n);
    }

    dataset.labels = DenseMatrix(static_cast<std::size_t>(dataset.num_classes),
                                 dataset.train_index.size());
    for (std::size_t j = 0; j < dataset.train_index.size(); ++j) {
        const int node = dataset.train_index.indices[j];
        const auto it = class_of.find(node);
        if (it == class_of.end()) {
            throw ParseError(paths.labels_file, 0,
                             "no label for masked node " + std::to_string(node));
        }
        dataset.labels(static_cast<std::size_t>(it->second), j) = 1.0;
    }
    return dataset;
}

DatasetPaths dataset_paths_in_dir(const std::string& dir) {
    return {dir + "/edges.txt", dir + "/features.csv", dir + "/labels.csv", dir + "/mask.txt"};
}

Dataset load_dataset_dir(const std::string& dir) {
    return parse_dataset(dataset_paths_in_dir(dir));
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ParseError(path, 0, "cannot open for writing");
    }
    out << content;
    if (!out) {
        throw ParseError(path, 0, "write failed");
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

nlohmann::json read_json_file(const std::string& path) {
    try {
        return nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, 0, e.what());
    }
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

void write_dataset_dir(const Dataset& dataset, const std::string& dir) {
    std::string edges;
    for (auto [u, v] : dataset.graph.edges) {
        edges += std::to_string(u) + " " + std::to_string(v) + "\n";
    }
    write_text_file(dir + "/edges.txt", edges);

    std::string features;
    const DenseMatrix by_node = dataset.features.transposed();
    for (std::size_t i = 0; i < by_node.rows(); ++i) {
        for (std::size_t j = 0; j < by_node.cols(); ++j) {
            if (j > 0) features += ',';
            features += format_float(by_node(i, j));
        }
        features += '\n';
    }
    write_text_file(dir + "/features.csv", features);

    std::string labels;
    for (std::size_t j = 0; j < dataset.train_index.size(); ++j) {
        int cls = -1;
        for (std::size_t i = 0; i < dataset.labels.rows(); ++i) {
            const double v = dataset.labels(i, j);
            if (v == 1.0 && cls < 0) {
                cls = static_cast<int>(i);
            } else if (v != 0.0) {
                throw ConfigError("write_dataset_dir: labels must be one-hot columns");
            }
        }
        if (cls < 0) throw ConfigError("write_dataset_dir: labels must be one-hot columns");
        labels += std::to_string(dataset.train_index.indices[j]) + "," + std::to_string(cls) +
                  "\n";
    }
    write_text_file(dir + "/labels.csv", labels);

    std::string mask;
    for (int id : dataset.train_index.indices) {
        mask += std::to_string(id) + "\n";
    }
    write_text_file(dir + "/mask.txt", mask);
}

std::string trajectory_csv(const TrajectoryRecord& traj) {
    std::string out = "step,t,loss";
    for (int l = 0; l <= traj.depth; ++l) {
        out += ",lambda_l" + std::to_string(l);
    }
    out += ",first_terms_sum,second_terms_sum\n";
    for (const auto& cp : traj.checkpoints) {
        out += std::to_string(cp.step) + "," + format_float(cp.t) + "," + format_float(cp.loss);
        for (double v : cp.lambda_min) {
            out += "," + format_float(v);
        }
        if (cp.decomposition.has_value()) {
            out += "," + format_float(cp.decomposition->first_sum()) + "," +
                   format_float(cp.decomposition->second_sum());
        } else {
            out += ",,";
        }
        out += '\n';
    }
    return out;
}

std::string bound_trace_csv(const BoundTrace& trace) {
    std::string out = "step,t,loss,lhs,rhs,satisfied\n";
    for (const auto& row : trace.rows) {
        out += std::to_string(row.step) + "," + format_float(row.t) + "," +
               format_float(row.loss) + "," + format_float(row.lhs) + "," +
               format_float(row.rhs) + "," + (row.satisfied ? "1" : "0") + "\n";
    }
    return out;
}

std::string experiment_csv(const std::vector<ExperimentRow>& rows) {
    std::string out = "family,arch,aggregation,activation,depth,seed,step,t,loss\n";
    for (const auto& row : rows) {
        out += row.family + "," + row.arch + "," + row.aggregation + "," + row.activation + "," +
               std::to_string(row.depth) + "," + std::to_string(row.seed) + "," +
               std::to_string(row.step) + "," + format_float(row.t) + "," +
               format_float(row.loss) + "\n";
    }
    return out;
}

nlohmann::json to_json(const ConditionReport& report) {
    nlohmann::json j;
    j["max_depth"] = report.max_depth;
    j["sigma_sq_linear"] = report.sigma_sq_linear;
    j["global_min_linear"] = report.global_min_linear;
    if (report.include_multiscale) {
        j["sigma_sq_multiscale"] = report.sigma_sq_multiscale;
        j["global_min_multiscale"] = report.global_min_multiscale;
    }
    return j;
}

nlohmann::json to_json(const DecompositionTerms& terms) {
    nlohmann::json j;
    j["first_terms"] = terms.first_terms;
    j["second_terms"] = terms.second_terms;
    j["first_terms_sum"] = terms.first_sum();
    j["second_terms_sum"] = terms.second_sum();
    j["loss_rate"] = terms.loss_rate;
    return j;
}

nlohmann::json to_json(const SkipComparisonReport& report) {
    nlohmann::json j;
    j["loss_rate_multiscale"] = report.loss_rate_multiscale;
    j["loss_rate_single"] = report.loss_rate_single;
    j["condition_value"] = report.condition_value;
    j["shared_first_terms"] = report.shared_first_terms;
    j["a_norms_sq"] = report.a_norms_sq;
    j["b_norms_sq"] = report.b_norms_sq;
    j["cross_terms"] = report.cross_terms;
    j["condition_nonnegative"] = report.condition_nonnegative;
    j["inequality_holds"] = report.inequality_holds;
    j["implication_ok"] = report.implication_ok;
    return j;
}

nlohmann::json to_json(const InequalityReport& report) {
    nlohmann::json j;
    j["case"] = report.case_token;
    j["loss_rate"] = report.loss_rate;
    j["bound"] = report.bound;
    j["rate_coefficient"] = report.rate_coefficient;
    j["gap_to_optimum"] = report.gap_to_optimum;
    j["premise_ok"] = report.premise_ok;
    j["satisfied"] = report.satisfied;
    return j;
}

nlohmann::json to_json(const MarginReport& report) {
    nlohmann::json j;
    j["layer"] = report.layer;
    j["gamma_empirical"] = report.gamma_empirical;
    j["lambda_floor"] = report.lambda_floor;
    j["satisfied"] = report.satisfied;
    return j;
}

nlohmann::json to_json(const DynamicsCheckReport& report) {
    nlohmann::json j;
    j["step"] = report.step;
    j["max_deviation"] = report.max_deviation;
    j["max_rate"] = report.max_rate;
    return j;
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
    SyntheticSpec spec;
    if (j.contains("graph_kind")) {
        spec.graph_kind = graph_kind_from_string(j.at("graph_kind").get<std::string>());
    }
    if (j.contains("er_probability")) spec.er_probability = j.at("er_probability").get<double>();
    if (j.contains("n")) spec.node_count = j.at("n").get<int>();
    if (j.contains("m_x")) spec.feature_dim = j.at("m_x").get<int>();
    if (j.contains("m_y")) spec.label_dim = j.at("m_y").get<int>();
    if (j.contains("aggregation")) {
        spec.aggregation = aggregation_from_string(j.at("aggregation").get<std::string>());
    }
    if (j.contains("label_mode")) {
        spec.label_mode = label_mode_from_string(j.at("label_mode").get<std::string>());
    }
    if (j.contains("signal_depth")) spec.signal_depth = j.at("signal_depth").get<int>();
    if (j.contains("noise_sigma")) spec.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("one_hot_labels")) spec.one_hot_labels = j.at("one_hot_labels").get<bool>();
    if (j.contains("train_fraction")) {
        spec.train_fraction = j.at("train_fraction").get<double>();
    }
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    spec.validate();
    return spec;
}

nlohmann::json to_json(const SyntheticSpec& spec) {
    nlohmann::json j;
    j["graph_kind"] = to_string(spec.graph_kind);
    j["er_probability"] = spec.er_probability;
    j["n"] = spec.node_count;
    j["m_x"] = spec.feature_dim;
    j["m_y"] = spec.label_dim;
    j["aggregation"] = to_string(spec.aggregation);
    j["label_mode"] = to_string(spec.label_mode);
    j["signal_depth"] = spec.signal_depth;
    j["noise_sigma"] = spec.noise_sigma;
    j["one_hot_labels"] = spec.one_hot_labels;
    j["train_fraction"] = spec.train_fraction;
    j["seed"] = spec.seed;
    return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    if (j.contains("loss")) cfg.loss = loss_kind_from_string(j.at("loss").get<std::string>());
    if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
    if (j.contains("steps")) cfg.steps = j.at("steps").get<long>();
    if (j.contains("record_every")) cfg.record_every = j.at("record_every").get<long>();
    if (j.contains("integrator")) {
        cfg.integrator = integrator_from_string(j.at("integrator").get<std::string>());
    }
    if (j.contains("optimizer")) {
        cfg.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("compute_decomposition")) {
        cfg.compute_decomposition = j.at("compute_decomposition").get<bool>();
    }
    if (j.contains("snapshot_params")) {
        cfg.snapshot_params = j.at("snapshot_params").get<bool>();
    }
    if (j.contains("divergence_threshold")) {
        cfg.divergence_threshold = j.at("divergence_threshold").get<double>();
    }
    cfg.validate();
    return cfg;
}

ExperimentSpec experiment_spec_from_json(const nlohmann::json& j) {
    ExperimentSpec spec;
    spec.family = experiment_family_from_string(j.at("family").get<std::string>());
    if (j.contains("archs")) {
        spec.archs.clear();
        for (const auto& name : j.at("archs")) {
            spec.archs.push_back(architecture_from_string(name.get<std::string>()));
        }
    }
    if (j.contains("aggregations")) {
        spec.aggregations.clear();
        for (const auto& name : j.at("aggregations")) {
            spec.aggregations.push_back(aggregation_from_string(name.get<std::string>()));
        }
    }
    if (j.contains("depths")) spec.depths = j.at("depths").get<std::vector<int>>();
    if (j.contains("hidden_dim")) spec.hidden_dim = j.at("hidden_dim").get<int>();
    if (j.contains("init_scheme")) {
        spec.init_scheme = init_scheme_from_string(j.at("init_scheme").get<std::string>());
    }
    if (j.contains("init_sigma")) spec.init_sigma = j.at("init_sigma").get<double>();
    if (j.contains("init_seed")) spec.init_seed = j.at("init_seed").get<std::uint64_t>();
    if (j.contains("train")) spec.train = train_config_from_json(j.at("train"));
    if (j.contains("synthetic")) spec.synthetic = synthetic_spec_from_json(j.at("synthetic"));
    if (j.contains("condition_max_depth")) {
        spec.condition_max_depth = j.at("condition_max_depth").get<int>();
    }
    spec.validate();
    return spec;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    if (j.contains("arch")) cfg.arch = architecture_from_string(j.at("arch").get<std::string>());
    if (j.contains("aggregation")) {
        cfg.aggregation = aggregation_from_string(j.at("aggregation").get<std::string>());
    }
    if (j.contains("depth")) cfg.depth = j.at("depth").get<int>();
    if (cfg.depth < 0) throw ConfigError("run config: negative depth");
    if (j.contains("hidden_dims")) {
        cfg.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
        if (cfg.hidden_dims.size() != static_cast<std::size_t>(cfg.depth)) {
            throw ConfigError("run config: hidden_dims must have depth entries");
        }
    } else if (j.contains("hidden_dim")) {
        cfg.hidden_dims.assign(static_cast<std::size_t>(cfg.depth),
                               j.at("hidden_dim").get<int>());
    }
    if (j.contains("output_dim")) cfg.output_dim = j.at("output_dim").get<int>();
    if (j.contains("init")) {
        const auto& init = j.at("init");
        if (init.contains("scheme")) {
            cfg.init_scheme = init_scheme_from_string(init.at("scheme").get<std::string>());
        }
        if (init.contains("sigma")) cfg.init_sigma = init.at("sigma").get<double>();
        if (init.contains("seed")) cfg.init_seed = init.at("seed").get<std::uint64_t>();
    }
    if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
    return cfg;
}

}  // namespace gnnflow::io
