#include <doctest.h>

#include "gnnflow/common.hpp"
#include "gnnflow/harness.hpp"
#include "gnnflow/theory.hpp"
#include "test_support.hpp"

using namespace gnnflow;

TEST_CASE("generator graph shapes") {
    SyntheticSpec spec;
    spec.node_count = 3;
    spec.train_fraction = 1.0;
    SUBCASE("path") {
        spec.graph_kind = GraphKind::Path;
        const SyntheticData d = gen_synthetic(spec);
        CHECK(d.graph.edges == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}});
    }
    SUBCASE("cycle") {
        spec.graph_kind = GraphKind::Cycle;
        const SyntheticData d = gen_synthetic(spec);
        CHECK(d.graph.edges == std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 2}});
    }
    SUBCASE("star") {
        spec.graph_kind = GraphKind::Star;
        const SyntheticData d = gen_synthetic(spec);
        CHECK(d.graph.edges == std::vector<std::pair<int, int>>{{0, 1}, {0, 2}});
    }
}

TEST_CASE("noise-free signal labels are realizable at the signal depth") {
    SyntheticSpec spec;
    spec.graph_kind = GraphKind::Cycle;
    spec.node_count = 7;
    spec.feature_dim = 3;
    spec.label_dim = 2;
    spec.label_mode = LabelMode::Signal;
    spec.signal_depth = 2;
    spec.noise_sigma = 0.0;
    spec.train_fraction = 1.0;
    spec.seed = 5;
    const SyntheticData d = gen_synthetic(spec);
    const DenseMatrix s = aggregation_matrix(d.graph, spec.aggregation);
    CHECK(global_minimum_linear(d.features, s, d.train_index, d.labels, spec.signal_depth) <=
          1e-18);
}

TEST_CASE("generation is deterministic and label variants share the data") {
    SyntheticSpec spec;
    spec.graph_kind = GraphKind::ErdosRenyi;
    spec.er_probability = 0.4;
    spec.node_count = 12;
    spec.feature_dim = 4;
    spec.label_dim = 3;
    spec.train_fraction = 0.5;
    spec.seed = 77;

    const SyntheticData a = gen_synthetic(spec);
    const SyntheticData b = gen_synthetic(spec);
    CHECK(a.graph.edges == b.graph.edges);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK(a.train_index.indices == b.train_index.indices);

    SyntheticSpec noise = spec;
    noise.label_mode = LabelMode::UniformNoise;
    const SyntheticData c = gen_synthetic(noise);
    CHECK(c.graph.edges == a.graph.edges);
    CHECK(c.features == a.features);
    CHECK(c.train_index.indices == a.train_index.indices);
    CHECK(c.labels.rows() == 3);  // one-hot classes
}

TEST_CASE("uniform-noise labels are one-hot") {
    SyntheticSpec spec;
    spec.node_count = 20;
    spec.label_dim = 4;
    spec.label_mode = LabelMode::UniformNoise;
    spec.train_fraction = 0.5;
    const SyntheticData d = gen_synthetic(spec);
    for (std::size_t j = 0; j < d.labels.cols(); ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < d.labels.rows(); ++i) {
            CHECK((d.labels(i, j) == 0.0 || d.labels(i, j) == 1.0));
            sum += d.labels(i, j);
        }
        CHECK(sum == 1.0);
    }
}

TEST_CASE("depth sweep emits one cell with the expected checkpoint count") {
    ExperimentSpec spec;
    spec.family = ExperimentFamily::DepthSweep;
    spec.archs = {Architecture::LinearGnn};
    spec.aggregations = {AggregationKind::Gcn};
    spec.depths = {2};
    spec.hidden_dim = 4;
    spec.synthetic.node_count = 8;
    spec.synthetic.feature_dim = 3;
    spec.synthetic.label_dim = 2;
    spec.synthetic.train_fraction = 1.0;
    spec.train.lr = 1e-3;
    spec.train.steps = 10;
    spec.train.record_every = 2;
    const ExperimentReport report = run_experiment(spec);
    CHECK(report.summaries.size() == 1);
    CHECK(report.rows.size() == 6);  // steps/record_every + 1
    CHECK(report.rows.front().family == "depth_sweep");
    CHECK(report.rows.front().arch == "single");
    CHECK(report.rows.front().activation == "linear");
}

TEST_CASE("citation-benchmark-style training cell is accepted") {
    // GCN, six layers, hidden 32, lr 5e-5, cross-entropy.
    ExperimentSpec spec;
    spec.family = ExperimentFamily::DepthSweep;
    spec.archs = {Architecture::ReluGnn};
    spec.aggregations = {AggregationKind::Gcn};
    spec.depths = {6};
    spec.hidden_dim = 32;
    spec.synthetic.node_count = 10;
    spec.synthetic.feature_dim = 4;
    spec.synthetic.label_dim = 3;
    spec.synthetic.label_mode = LabelMode::UniformNoise;
    spec.synthetic.train_fraction = 0.5;
    spec.train.loss = LossKind::CrossEntropySum;
    spec.train.lr = 5e-5;
    spec.train.steps = 5;
    const ExperimentReport report = run_experiment(spec);
    CHECK(report.summaries.size() == 1);
    CHECK_FALSE(report.summaries[0].diverged);
    CHECK(report.summaries[0].depth == 6);
}

TEST_CASE("skip comparison pairs share the initial output") {
    ExperimentSpec spec;
    spec.family = ExperimentFamily::SkipComparison;
    spec.archs = {Architecture::LinearGnn};
    spec.aggregations = {AggregationKind::Gcn};
    spec.depths = {3};
    spec.hidden_dim = 4;
    spec.synthetic.node_count = 8;
    spec.synthetic.feature_dim = 3;
    spec.synthetic.label_dim = 2;
    spec.synthetic.train_fraction = 1.0;
    spec.train.lr = 1e-3;
    spec.train.steps = 4;
    const ExperimentReport report = run_experiment(spec);
    REQUIRE(report.summaries.size() == 2);
    CHECK(report.summaries[0].arch == "single");
    CHECK(report.summaries[1].arch == "multiscale");
    // Identical initial losses: the multiscale twin starts with zero lower
    // heads and the shared top head.
    CHECK(report.summaries[0].initial_loss == report.summaries[1].initial_loss);
}

TEST_CASE("label comparison emits variant-tagged rows over the same split") {
    ExperimentSpec spec;
    spec.family = ExperimentFamily::LabelComparison;
    spec.archs = {Architecture::LinearGnn};
    spec.aggregations = {AggregationKind::Gcn};
    spec.depths = {2};
    spec.hidden_dim = 4;
    spec.synthetic.node_count = 10;
    spec.synthetic.feature_dim = 3;
    spec.synthetic.label_dim = 3;
    spec.synthetic.one_hot_labels = true;
    spec.synthetic.train_fraction = 0.6;
    spec.train.lr = 1e-3;
    spec.train.steps = 3;
    const ExperimentReport report = run_experiment(spec);
    REQUIRE(report.summaries.size() == 2);
    CHECK(report.summaries[0].family == "label_signal");
    CHECK(report.summaries[1].family == "label_noise");
}

TEST_CASE("condition scan fills per-aggregation reports") {
    ExperimentSpec spec;
    spec.family = ExperimentFamily::ConditionScan;
    spec.aggregations = {AggregationKind::Gcn, AggregationKind::Gin};
    spec.condition_max_depth = 2;
    spec.synthetic.node_count = 8;
    spec.synthetic.feature_dim = 3;
    spec.synthetic.label_dim = 2;
    spec.synthetic.train_fraction = 1.0;
    const ExperimentReport report = run_experiment(spec);
    CHECK(report.rows.empty());
    REQUIRE(report.condition_reports.size() == 2);
    CHECK(report.condition_reports[0].second.sigma_sq_linear.size() == 3);
}

TEST_CASE("diverging cells are flagged and do not abort the grid") {
    ExperimentSpec spec;
    spec.family = ExperimentFamily::DepthSweep;
    spec.archs = {Architecture::LinearGnn};
    spec.aggregations = {AggregationKind::Gin};
    spec.depths = {2, 3};
    spec.hidden_dim = 4;
    spec.init_scheme = InitScheme::Gaussian;
    spec.init_sigma = 2.0;
    spec.synthetic.node_count = 8;
    spec.synthetic.feature_dim = 3;
    spec.synthetic.label_dim = 2;
    spec.synthetic.train_fraction = 1.0;
    spec.train.lr = 50.0;  // guaranteed blow-up
    spec.train.steps = 400;
    const ExperimentReport report = run_experiment(spec);
    REQUIRE(report.summaries.size() == 2);
    CHECK(report.summaries[0].diverged);
    CHECK(report.summaries[1].diverged);
}
