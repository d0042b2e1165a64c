#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gnnflow/dense_matrix.hpp"
#include "gnnflow/graph.hpp"

namespace gnnflow {

enum class Architecture { LinearGnn, MultiscaleLinearGnn, ReluGnn, MultiscaleReluGnn };

bool is_multiscale(Architecture arch);
bool has_relu(Architecture arch);
const char* to_string(Architecture arch);
Architecture architecture_from_string(const std::string& name);

enum class InitScheme { UniformFanIn, Identity, Orthogonal, Gaussian };

const char* to_string(InitScheme scheme);
InitScheme init_scheme_from_string(const std::string& name);

// Parameters of a depth-H network. dims = (m_0, ..., m_H) with m_0 the input
// dimension; b[l-1] is the layer-l weight (m_l x m_{l-1}). For multiscale
// architectures w holds the H+1 per-scale heads (w[l] is m_y x m_l);
// otherwise w is the single output matrix (m_y x m_H).
struct GnnParams {
    Architecture arch = Architecture::LinearGnn;
    int depth = 0;
    std::vector<int> dims;
    int output_dim = 0;
    std::vector<DenseMatrix> b;
    std::vector<DenseMatrix> w;

    int input_dim() const { return dims.empty() ? 0 : dims.front(); }
    void validate() const;
};

// Deterministic initialization. `hidden_dims` lists m_1..m_H. Identity
// requires square layers and sets the top head to I with all lower multiscale
// heads zero. Warns on stderr when a hidden dimension drops below the input
// dimension (the convergence theory assumes m_l >= m_x).
GnnParams init_params(Architecture arch, int depth, int input_dim,
                      std::span<const int> hidden_dims, int output_dim, InitScheme scheme,
                      std::uint64_t seed, double gaussian_sigma = 1.0);

// Model output restricted to the training columns: m_y x n_bar.
DenseMatrix forward(const GnnParams& params, const DenseMatrix& x, const DenseMatrix& s,
                    const TrainIndex& idx);

// Same value for linear architectures, computed from precomputed restricted
// features (propagated_sequence up to the depth). Used on training hot paths.
DenseMatrix forward_restricted(const GnnParams& params,
                               std::span<const DenseMatrix> restricted_features);

// B_(l_to) * ... * B_(l_from); the identity of size m_{l_from - 1} when
// l_from > l_to. Valid for l_from in [1, H+1], l_to in [0, H].
DenseMatrix layer_products(const GnnParams& params, int l_from, int l_to);

// Prefix products [I, B_(1), B_(2)B_(1), ..., B_(H)...B_(1)]; entry l is the
// l-layer product (m_l x m_0).
std::vector<DenseMatrix> prefix_products(const GnnParams& params);

// End-to-end matrices Z_(l) = W_(l) * B_(l)...B_(1): one per scale for
// multiscale parameters, the single top product otherwise. Each is m_y x m_0.
std::vector<DenseMatrix> end_to_end_state(const GnnParams& params);

nlohmann::json params_to_json(const GnnParams& params);
GnnParams params_from_json(const nlohmann::json& j);

}  // namespace gnnflow
