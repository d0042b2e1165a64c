#include "gnnflow/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "gnnflow/common.hpp"

namespace gnnflow {

Graph Graph::from_edges(int node_count, const std::vector<std::pair<int, int>>& raw,
                        bool* had_irregular_input) {
    if (node_count < 1) {
        throw ConfigError("Graph: node count must be >= 1");
    }
    std::set<std::pair<int, int>> unique;
    bool irregular = false;
    for (auto [u, v] : raw) {
        if (u < 0 || v < 0 || u >= node_count || v >= node_count) {
            throw DimensionError("Graph: edge endpoint out of range: (" + std::to_string(u) +
                                 ", " + std::to_string(v) + ") with n = " +
                                 std::to_string(node_count));
        }
        if (u == v) {
            irregular = true;  // self-loops are dropped; aggregation re-adds them
            continue;
        }
        auto e = std::minmax(u, v);
        if (!unique.insert({e.first, e.second}).second) {
            irregular = true;
        }
    }
    if (had_irregular_input != nullptr) *had_irregular_input = irregular;
    Graph g;
    g.node_count = node_count;
    g.edges.assign(unique.begin(), unique.end());
    return g;
}

void Graph::validate() const {
    if (node_count < 1) {
        throw ConfigError("Graph: node count must be >= 1");
    }
    std::set<std::pair<int, int>> seen;
    for (auto [u, v] : edges) {
        if (u < 0 || v < 0 || u >= node_count || v >= node_count) {
            throw DimensionError("Graph: edge endpoint out of range");
        }
        if (u == v) {
            throw ConfigError("Graph: self-loop stored on node " + std::to_string(u));
        }
        if (u > v || !seen.insert({u, v}).second) {
            throw ConfigError("Graph: edges must be unique ordered pairs (u < v)");
        }
    }
}

std::vector<int> Graph::degrees() const {
    std::vector<int> deg(node_count, 0);
    for (auto [u, v] : edges) {
        ++deg[u];
        ++deg[v];
    }
    return deg;
}

TrainIndex TrainIndex::all(int node_count) {
    TrainIndex idx;
    idx.indices.resize(node_count);
    for (int i = 0; i < node_count; ++i) idx.indices[i] = i;
    return idx;
}

TrainIndex TrainIndex::from_ids(std::vector<int> ids, int node_count) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    TrainIndex idx;
    idx.indices = std::move(ids);
    idx.validate(node_count);
    return idx;
}

void TrainIndex::validate(int node_count) const {
    if (indices.empty()) {
        throw ConfigError("TrainIndex: empty index set");
    }
    int prev = -1;
    for (int i : indices) {
        if (i <= prev) {
            throw ConfigError("TrainIndex: indices must be strictly increasing");
        }
        if (i < 0 || i >= node_count) {
            throw DimensionError("TrainIndex: node id " + std::to_string(i) +
                                 " out of range for n = " + std::to_string(node_count));
        }
        prev = i;
    }
}

const char* to_string(AggregationKind kind) {
    return kind == AggregationKind::Gin ? "gin" : "gcn";
}

AggregationKind aggregation_from_string(const std::string& name) {
    if (name == "gin" || name == "GIN") return AggregationKind::Gin;
    if (name == "gcn" || name == "GCN") return AggregationKind::Gcn;
    throw ConfigError("unknown aggregation kind: " + name);
}

DenseMatrix aggregation_matrix(const Graph& g, AggregationKind kind) {
    g.validate();
    const int n = g.node_count;
    DenseMatrix s(n, n);
    for (int i = 0; i < n; ++i) s(i, i) = 1.0;
    for (auto [u, v] : g.edges) {
        s(u, v) = 1.0;
        s(v, u) = 1.0;
    }
    if (kind == AggregationKind::Gin) {
        return s;
    }
    // GCN: scale entry (i, j) of A + I by 1/sqrt(d_i * d_j) with d the
    // degrees of A + I.
    std::vector<double> inv_sqrt(n);
    const auto deg = g.degrees();
    for (int i = 0; i < n; ++i) {
        inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(deg[i] + 1));
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            s(i, j) *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    return s;
}

namespace {

void require_conformable(const DenseMatrix& x, const DenseMatrix& s, const TrainIndex& idx) {
    if (s.rows() != s.cols()) {
        throw DimensionError("aggregation matrix must be square");
    }
    if (x.cols() != s.rows()) {
        throw DimensionError("features have " + std::to_string(x.cols()) +
                             " columns but aggregation is " + std::to_string(s.rows()) + "x" +
                             std::to_string(s.cols()));
    }
    idx.validate(static_cast<int>(s.rows()));
}

}  // namespace

DenseMatrix propagated_features(const DenseMatrix& x, const DenseMatrix& s, int power,
                                const TrainIndex& idx) {
    require_conformable(x, s, idx);
    if (power < 0) {
        throw ConfigError("propagated_features: negative power");
    }
    DenseMatrix p = x;
    for (int l = 0; l < power; ++l) {
        p = p * s;
    }
    return p.columns(idx.indices);
}

std::vector<DenseMatrix> propagated_sequence(const DenseMatrix& x, const DenseMatrix& s,
                                             int max_power, const TrainIndex& idx) {
    require_conformable(x, s, idx);
    if (max_power < 0) {
        throw ConfigError("propagated_sequence: negative power");
    }
    std::vector<DenseMatrix> out;
    out.reserve(static_cast<std::size_t>(max_power) + 1);
    DenseMatrix p = x;
    out.push_back(p.columns(idx.indices));
    for (int l = 1; l <= max_power; ++l) {
        p = p * s;
        out.push_back(p.columns(idx.indices));
    }
    return out;
}

DenseMatrix stacked_features(const DenseMatrix& x, const DenseMatrix& s, int depth,
                             const TrainIndex& idx) {
    const auto blocks = propagated_sequence(x, s, depth, idx);
    return vstack(blocks);
}

}  // namespace gnnflow
