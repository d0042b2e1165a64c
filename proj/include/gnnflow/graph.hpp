#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gnnflow/dense_matrix.hpp"

namespace gnnflow {

// Simple undirected graph on nodes 0..n-1. Edges are stored as unordered
// pairs (u < v), deduplicated, with no self-loops.
struct Graph {
    int node_count = 0;
    std::vector<std::pair<int, int>> edges;

    // Normalizes an arbitrary edge list: orients pairs, drops duplicates and
    // self-loops, validates endpoints. `had_directed_input` (optional) is set
    // when the input listed an edge in only one direction or contained
    // duplicates/self-loops, so callers can warn.
    static Graph from_edges(int node_count, const std::vector<std::pair<int, int>>& raw,
                            bool* had_irregular_input = nullptr);

    void validate() const;
    std::vector<int> degrees() const;  // degree in A (self-loop excluded)
};

// Strictly increasing training-node index set; n_bar = indices.size() <= n.
struct TrainIndex {
    std::vector<int> indices;

    static TrainIndex all(int node_count);
    static TrainIndex from_ids(std::vector<int> ids, int node_count);  // sorts, checks

    std::size_t size() const { return indices.size(); }
    void validate(int node_count) const;
};

enum class AggregationKind { Gin, Gcn };

const char* to_string(AggregationKind kind);
AggregationKind aggregation_from_string(const std::string& name);

// GIN: A + I. GCN: D̂^{-1/2} (A + I) D̂^{-1/2} with D̂ the degree matrix of
// A + I. Both are symmetric; isolated nodes have degree 1 in A + I, so the
// GCN normalization never divides by zero.
DenseMatrix aggregation_matrix(const Graph& g, AggregationKind kind);

// X * S^l with columns restricted to idx; l = 0 gives X_{*idx}.
DenseMatrix propagated_features(const DenseMatrix& x, const DenseMatrix& s, int power,
                                const TrainIndex& idx);

// All of X*S^l for l = 0..max_power in one pass over the recurrence
// P_l = P_{l-1} * S, columns restricted to idx. propagated_features and
// stacked_features share this path, so their blocks agree bit-exactly.
std::vector<DenseMatrix> propagated_sequence(const DenseMatrix& x, const DenseMatrix& s,
                                             int max_power, const TrainIndex& idx);

// Vertical stack [Xᵀ, (XS)ᵀ, ..., (XS^H)ᵀ]ᵀ restricted to idx.
DenseMatrix stacked_features(const DenseMatrix& x, const DenseMatrix& s, int depth,
                             const TrainIndex& idx);

}  // namespace gnnflow
