// gnnflow command-line interface: dataset generation, condition scans,
// training with trajectory recording, rate-bound verification, loss-rate
// decomposition, skip-connection comparison, and experiment grids.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "gnnflow/common.hpp"
#include "gnnflow/harness.hpp"
#include "gnnflow/io.hpp"
#include "gnnflow/linalg.hpp"
#include "gnnflow/model.hpp"
#include "gnnflow/theory.hpp"
#include "gnnflow/trainer.hpp"
#include "gnnflow/trajectory_analysis.hpp"

namespace {

using namespace gnnflow;

constexpr int kExitOk = 0;
constexpr int kExitVerificationFailed = 1;
constexpr int kExitUsage = 2;

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty()) {
        std::cout << content;
    } else {
        io::write_text_file(out_path, content);
    }
}

void emit_json(const std::string& out_path, const nlohmann::json& j) {
    if (out_path.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        io::write_json_file(out_path, j);
    }
}

struct GenArgs {
    std::string spec_path;
    std::string out_dir;
};

int run_gen(const GenArgs& args) {
    SyntheticSpec spec = io::synthetic_spec_from_json(io::read_json_file(args.spec_path));
    // The on-disk label format carries class indices, so force one-hot labels.
    if (!spec.one_hot_labels && spec.label_mode == LabelMode::Signal) {
        std::cerr << "note: writing class labels; signal scores are reduced via argmax\n";
        spec.one_hot_labels = true;
    }
    const SyntheticData data = gen_synthetic(spec);
    std::filesystem::create_directories(args.out_dir);
    io::Dataset dataset;
    dataset.graph = data.graph;
    dataset.features = data.features;
    dataset.labels = data.labels;
    dataset.train_index = data.train_index;
    dataset.num_classes = static_cast<int>(data.labels.rows());
    io::write_dataset_dir(dataset, args.out_dir);
    return kExitOk;
}

struct CheckArgs {
    std::string data_dir;
    std::string agg = "gcn";
    int max_depth = 3;
    bool multiscale = false;
    std::string out_path;
};

int run_check(const CheckArgs& args) {
    const io::Dataset data = io::load_dataset_dir(args.data_dir);
    const DenseMatrix s = aggregation_matrix(data.graph, aggregation_from_string(args.agg));
    const ConditionReport report = condition_report(data.features, s, data.train_index,
                                                    data.labels, args.max_depth, args.multiscale);
    nlohmann::json j = io::to_json(report);
    j["aggregation"] = args.agg;
    emit_json(args.out_path, j);
    return kExitOk;
}

GnnParams init_from_run_config(const io::RunConfig& cfg, int input_dim, int dataset_classes) {
    const int out_dim = cfg.output_dim > 0 ? cfg.output_dim : dataset_classes;
    std::vector<int> hidden = cfg.hidden_dims;
    if (hidden.empty()) hidden.assign(static_cast<std::size_t>(cfg.depth), input_dim);
    return init_params(cfg.arch, cfg.depth, input_dim, hidden, out_dim, cfg.init_scheme,
                       cfg.init_seed, cfg.init_sigma);
}

struct TrainArgs {
    std::string data_dir;
    std::string config_path;
    std::string out_path;
    std::string snapshots_dir;
};

int run_train(const TrainArgs& args) {
    const io::Dataset data = io::load_dataset_dir(args.data_dir);
    io::RunConfig cfg = io::run_config_from_json(io::read_json_file(args.config_path));
    if (!args.snapshots_dir.empty()) cfg.train.snapshot_params = true;

    const DenseMatrix s = aggregation_matrix(data.graph, cfg.aggregation);
    const GnnParams initial =
        init_from_run_config(cfg, static_cast<int>(data.features.rows()), data.num_classes);
    const TrainResult result =
        train(initial, data.features, s, data.train_index, data.labels, cfg.train);

    emit(args.out_path, io::trajectory_csv(result.trajectory));

    if (!args.snapshots_dir.empty()) {
        std::filesystem::create_directories(args.snapshots_dir);
        nlohmann::json manifest;
        manifest["lr"] = cfg.train.lr;
        manifest["loss"] = to_string(cfg.train.loss);
        manifest["aggregation"] = to_string(cfg.aggregation);
        manifest["depth"] = cfg.depth;
        nlohmann::json list = nlohmann::json::array();
        for (const auto& cp : result.trajectory.checkpoints) {
            if (!cp.params.has_value()) continue;
            char name[32];
            std::snprintf(name, sizeof(name), "params_%08ld.json", cp.step);
            io::write_json_file(args.snapshots_dir + "/" + name, params_to_json(*cp.params));
            nlohmann::json entry;
            entry["step"] = cp.step;
            entry["file"] = name;
            list.push_back(entry);
        }
        manifest["snapshots"] = std::move(list);
        io::write_json_file(args.snapshots_dir + "/manifest.json", manifest);
    }
    if (result.trajectory.diverged) {
        std::cerr << "warning: training diverged (loss exceeded the guard); trajectory is "
                     "truncated\n";
    }
    return kExitOk;
}

struct VerifyArgs {
    std::string data_dir;
    std::string case_token;
    std::string snapshots_dir;
    std::string out_path;
    std::string agg = "gcn";
    int pointwise = 0;
    int depth = 2;
    int hidden = 0;
    std::uint64_t seed = 0;
    std::string scheme = "uniform_fan_in";
    double sigma = 1.0;
};

int run_verify(const VerifyArgs& args) {
    const io::Dataset data = io::load_dataset_dir(args.data_dir);
    const BoundSpec spec = BoundSpec::parse(args.case_token);

    if (args.pointwise > 0) {
        const int m_x = static_cast<int>(data.features.rows());
        const int hidden = args.hidden > 0 ? args.hidden : m_x;
        const Architecture arch = spec.kind == RateBoundKind::SingleScale
                                      ? Architecture::LinearGnn
                                      : Architecture::MultiscaleLinearGnn;
        const DenseMatrix s = aggregation_matrix(data.graph, aggregation_from_string(args.agg));
        const std::vector<int> hidden_dims(static_cast<std::size_t>(args.depth), hidden);

        int violations = 0;
        int premise_failures = 0;
        double worst_margin = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < args.pointwise; ++k) {
            const GnnParams params =
                init_params(arch, args.depth, m_x, hidden_dims, data.num_classes,
                            init_scheme_from_string(args.scheme), args.seed + static_cast<std::uint64_t>(k),
                            args.sigma);
            const InequalityReport report = differential_inequality_check(
                params, data.features, s, data.train_index, data.labels, spec);
            if (!report.premise_ok) {
                ++premise_failures;
                continue;
            }
            if (!report.satisfied) ++violations;
            worst_margin = std::max(worst_margin, report.loss_rate - report.bound);
        }
        nlohmann::json j;
        j["case"] = args.case_token;
        j["states"] = args.pointwise;
        j["violations"] = violations;
        j["premise_failures"] = premise_failures;
        if (std::isfinite(worst_margin)) j["worst_margin"] = worst_margin;
        emit_json(args.out_path, j);
        return (violations == 0 && premise_failures == 0) ? kExitOk : kExitVerificationFailed;
    }

    if (args.snapshots_dir.empty()) {
        throw ConfigError("verify needs --traj-snapshots DIR or --pointwise N");
    }
    const nlohmann::json manifest = io::read_json_file(args.snapshots_dir + "/manifest.json");
    if (manifest.at("loss").get<std::string>() != "sq") {
        throw UnsupportedError("bound verification needs a squared-loss trajectory");
    }
    const double lr = manifest.at("lr").get<double>();
    const DenseMatrix s = aggregation_matrix(
        data.graph, aggregation_from_string(manifest.at("aggregation").get<std::string>()));

    // Rebuild the trajectory from the snapshots, recomputing losses and
    // eigenvalues instead of trusting the recorded CSV.
    TrajectoryRecord traj;
    traj.loss_kind = LossKind::SquaredFrobenius;
    traj.lr = lr;
    traj.depth = manifest.at("depth").get<int>();
    for (const auto& entry : manifest.at("snapshots")) {
        const GnnParams params = params_from_json(
            io::read_json_file(args.snapshots_dir + "/" + entry.at("file").get<std::string>()));
        TrajectoryCheckpoint cp;
        cp.step = entry.at("step").get<long>();
        cp.t = static_cast<double>(cp.step) * lr;
        cp.loss = loss_and_residual_grad(forward(params, data.features, s, data.train_index),
                                         data.labels, LossKind::SquaredFrobenius)
                      .loss;
        const auto prefixes = prefix_products(params);
        cp.lambda_min.push_back(1.0);
        for (std::size_t l = 1; l < prefixes.size(); ++l) {
            cp.lambda_min.push_back(linalg::smallest_gram_eigenvalue(prefixes[l]));
        }
        cp.params = params;
        traj.checkpoints.push_back(std::move(cp));
    }

    const BoundTrace trace =
        convergence_bound_trace(traj, data.features, s, data.train_index, data.labels, spec);
    emit(args.out_path, io::bound_trace_csv(trace));
    if (!trace.premise_ok) {
        std::cerr << "premise violated: the optimum chain is not monotone for " << args.case_token
                  << "\n";
        return kExitVerificationFailed;
    }
    return trace.all_satisfied() ? kExitOk : kExitVerificationFailed;
}

struct DecomposeArgs {
    std::string data_dir;
    std::string params_path;
    std::string loss = "sq";
    std::string agg = "gcn";
    std::string out_path;
};

int run_decompose(const DecomposeArgs& args) {
    const io::Dataset data = io::load_dataset_dir(args.data_dir);
    const GnnParams params = params_from_json(io::read_json_file(args.params_path));
    const DenseMatrix s = aggregation_matrix(data.graph, aggregation_from_string(args.agg));
    const LossKind kind = loss_kind_from_string(args.loss);
    const DenseMatrix y_hat = forward(params, data.features, s, data.train_index);
    const ResidualGrad rg = loss_and_residual_grad(y_hat, data.labels, kind);
    const DecompositionTerms terms =
        loss_reduction_decomposition(params, data.features, s, data.train_index, rg);
    nlohmann::json j = io::to_json(terms);
    j["loss"] = rg.loss;
    emit_json(args.out_path, j);
    return kExitOk;
}

struct CompareSkipArgs {
    std::string data_dir;
    std::string params_path;
    std::string loss = "sq";
    std::string agg = "gcn";
    std::string out_path;
};

int run_compare_skip(const CompareSkipArgs& args) {
    const io::Dataset data = io::load_dataset_dir(args.data_dir);
    const GnnParams params = params_from_json(io::read_json_file(args.params_path));
    const DenseMatrix s = aggregation_matrix(data.graph, aggregation_from_string(args.agg));
    const SkipComparisonReport report =
        skip_acceleration_check(params, data.features, s, data.train_index, data.labels,
                                loss_kind_from_string(args.loss));
    emit_json(args.out_path, io::to_json(report));
    return report.implication_ok ? kExitOk : kExitVerificationFailed;
}

struct ExperimentArgs {
    std::string spec_path;
    std::string out_path;
    std::string data_dir;  // optional dataset override
};

int run_experiment_cmd(const ExperimentArgs& args) {
    const ExperimentSpec spec = io::experiment_spec_from_json(io::read_json_file(args.spec_path));
    std::optional<ExperimentData> external;
    if (!args.data_dir.empty()) {
        const io::Dataset data = io::load_dataset_dir(args.data_dir);
        external = ExperimentData{data.graph, data.features, data.labels, data.train_index};
    }
    const ExperimentReport report = run_experiment(spec, external);
    if (spec.family == ExperimentFamily::ConditionScan) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& [agg, cond] : report.condition_reports) {
            nlohmann::json entry = io::to_json(cond);
            entry["aggregation"] = to_string(agg);
            j.push_back(std::move(entry));
        }
        emit_json(args.out_path, j);
    } else {
        emit(args.out_path, io::experiment_csv(report.rows));
        for (const auto& summary : report.summaries) {
            if (summary.diverged) {
                std::cerr << "warning: cell " << summary.family << "/" << summary.arch << "/"
                          << summary.aggregation << "/depth" << summary.depth << " diverged\n";
            }
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"linear GNN gradient-flow toolkit"};
    app.require_subcommand(1);

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    gen->add_option("--spec", gen_args.spec_path, "synthetic spec JSON")->required();
    gen->add_option("--out", gen_args.out_dir, "output dataset directory")->required();

    CheckArgs check_args;
    auto* check = app.add_subcommand("check", "data-side condition report");
    check->add_option("--data", check_args.data_dir, "dataset directory")->required();
    check->add_option("--agg", check_args.agg, "aggregation (gcn|gin)");
    check->add_option("--max-depth", check_args.max_depth, "largest depth to scan");
    check->add_flag("--multiscale", check_args.multiscale, "include stacked-feature quantities");
    check->add_option("--out", check_args.out_path, "output JSON (stdout if omitted)");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "full-batch training run");
    train_cmd->add_option("--data", train_args.data_dir, "dataset directory")->required();
    train_cmd->add_option("--config", train_args.config_path, "run config JSON")->required();
    train_cmd->add_option("--out", train_args.out_path, "trajectory CSV path")->required();
    train_cmd->add_option("--snapshots", train_args.snapshots_dir,
                          "directory for per-checkpoint parameter snapshots");

    VerifyArgs verify_args;
    auto* verify = app.add_subcommand("verify", "rate-bound verification");
    verify->add_option("--data", verify_args.data_dir, "dataset directory")->required();
    verify->add_option("--case", verify_args.case_token,
                       "thm6 | thm1i | thm1ii:H' | thm1iii:l,l'")
        ->required();
    verify->add_option("--traj-snapshots", verify_args.snapshots_dir,
                       "snapshot directory from `train --snapshots`");
    verify->add_option("--pointwise", verify_args.pointwise,
                       "check the differential inequality at N random states");
    verify->add_option("--depth", verify_args.depth, "network depth for pointwise states");
    verify->add_option("--hidden", verify_args.hidden,
                       "hidden width for pointwise states (default: input dim)");
    verify->add_option("--seed", verify_args.seed, "base seed for pointwise states");
    verify->add_option("--scheme", verify_args.scheme, "init scheme for pointwise states");
    verify->add_option("--sigma", verify_args.sigma, "gaussian init sigma");
    verify->add_option("--agg", verify_args.agg, "aggregation for pointwise states");
    verify->add_option("--out", verify_args.out_path, "output path (stdout if omitted)");

    DecomposeArgs decompose_args;
    auto* decompose = app.add_subcommand("decompose", "loss-rate decomposition at a state");
    decompose->add_option("--data", decompose_args.data_dir, "dataset directory")->required();
    decompose->add_option("--params", decompose_args.params_path, "parameter JSON")->required();
    decompose->add_option("--loss", decompose_args.loss, "sq | ce");
    decompose->add_option("--agg", decompose_args.agg, "aggregation (gcn|gin)");
    decompose->add_option("--out", decompose_args.out_path, "output JSON (stdout if omitted)");

    CompareSkipArgs skip_args;
    auto* compare = app.add_subcommand("compare-skip", "multiscale vs single loss-rate report");
    compare->add_option("--data", skip_args.data_dir, "dataset directory")->required();
    compare->add_option("--params", skip_args.params_path, "multiscale parameter JSON")
        ->required();
    compare->add_option("--loss", skip_args.loss, "sq | ce");
    compare->add_option("--agg", skip_args.agg, "aggregation (gcn|gin)");
    compare->add_option("--out", skip_args.out_path, "output JSON (stdout if omitted)");

    ExperimentArgs exp_args;
    auto* experiment = app.add_subcommand("experiment", "run an experiment grid");
    experiment->add_option("--spec", exp_args.spec_path, "experiment spec JSON")->required();
    experiment->add_option("--out", exp_args.out_path, "report path (stdout if omitted)");
    experiment->add_option("--data", exp_args.data_dir,
                           "dataset directory (overrides the synthetic spec)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) return run_gen(gen_args);
        if (check->parsed()) return run_check(check_args);
        if (train_cmd->parsed()) return run_train(train_args);
        if (verify->parsed()) return run_verify(verify_args);
        if (decompose->parsed()) return run_decompose(decompose_args);
        if (compare->parsed()) return run_compare_skip(skip_args);
        if (experiment->parsed()) return run_experiment_cmd(exp_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
