#include "gnnflow/model.hpp"

#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <iostream>

#include <nlohmann/json.hpp>

#include "gnnflow/common.hpp"

namespace gnnflow {

bool is_multiscale(Architecture arch) {
    return arch == Architecture::MultiscaleLinearGnn || arch == Architecture::MultiscaleReluGnn;
}

bool has_relu(Architecture arch) {
    return arch == Architecture::ReluGnn || arch == Architecture::MultiscaleReluGnn;
}

const char* to_string(Architecture arch) {
    switch (arch) {
        case Architecture::LinearGnn: return "linear";
        case Architecture::MultiscaleLinearGnn: return "multiscale";
        case Architecture::ReluGnn: return "relu";
        case Architecture::MultiscaleReluGnn: return "multiscale_relu";
    }
    return "linear";
}

Architecture architecture_from_string(const std::string& name) {
    if (name == "linear") return Architecture::LinearGnn;
    if (name == "multiscale") return Architecture::MultiscaleLinearGnn;
    if (name == "relu") return Architecture::ReluGnn;
    if (name == "multiscale_relu") return Architecture::MultiscaleReluGnn;
    throw ConfigError("unknown architecture: " + name);
}

const char* to_string(InitScheme scheme) {
    switch (scheme) {
        case InitScheme::UniformFanIn: return "uniform_fan_in";
        case InitScheme::Identity: return "identity";
        case InitScheme::Orthogonal: return "orthogonal";
        case InitScheme::Gaussian: return "gaussian";
    }
    return "uniform_fan_in";
}

InitScheme init_scheme_from_string(const std::string& name) {
    if (name == "uniform_fan_in") return InitScheme::UniformFanIn;
    if (name == "identity") return InitScheme::Identity;
    if (name == "orthogonal") return InitScheme::Orthogonal;
    if (name == "gaussian") return InitScheme::Gaussian;
    throw ConfigError("unknown init scheme: " + name);
}

void GnnParams::validate() const {
    if (depth < 0) throw ConfigError("GnnParams: negative depth");
    if (dims.size() != static_cast<std::size_t>(depth) + 1) {
        throw DimensionError("GnnParams: dims must have depth+1 entries");
    }
    for (int d : dims) {
        if (d < 1) throw ConfigError("GnnParams: non-positive layer dimension");
    }
    if (output_dim < 1) throw ConfigError("GnnParams: non-positive output dimension");
    if (b.size() != static_cast<std::size_t>(depth)) {
        throw DimensionError("GnnParams: expected " + std::to_string(depth) +
                             " layer matrices, got " + std::to_string(b.size()));
    }
    for (int l = 1; l <= depth; ++l) {
        const auto& m = b[static_cast<std::size_t>(l) - 1];
        if (m.rows() != static_cast<std::size_t>(dims[l]) ||
            m.cols() != static_cast<std::size_t>(dims[l - 1])) {
            throw DimensionError("GnnParams: B_(" + std::to_string(l) + ") must be " +
                                 std::to_string(dims[l]) + "x" + std::to_string(dims[l - 1]));
        }
        if (!m.all_finite()) throw ConfigError("GnnParams: non-finite layer weight");
    }
    const std::size_t expected_heads = is_multiscale(arch) ? static_cast<std::size_t>(depth) + 1 : 1;
    if (w.size() != expected_heads) {
        throw DimensionError("GnnParams: expected " + std::to_string(expected_heads) +
                             " output matrices, got " + std::to_string(w.size()));
    }
    for (std::size_t l = 0; l < w.size(); ++l) {
        const int in_dim = is_multiscale(arch) ? dims[l] : dims.back();
        if (w[l].rows() != static_cast<std::size_t>(output_dim) ||
            w[l].cols() != static_cast<std::size_t>(in_dim)) {
            throw DimensionError("GnnParams: W_(" + std::to_string(l) + ") must be " +
                                 std::to_string(output_dim) + "x" + std::to_string(in_dim));
        }
        if (!w[l].all_finite()) throw ConfigError("GnnParams: non-finite output weight");
    }
}

namespace {

DenseMatrix uniform_fan_in_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    DenseMatrix m(rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            m(i, j) = rng.uniform(-bound, bound);
        }
    }
    return m;
}

DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, double sigma, Rng& rng) {
    DenseMatrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            m(i, j) = sigma * rng.gaussian();
        }
    }
    return m;
}

// Semi-orthogonal matrix from the QR factorization of a Gaussian draw, with
// signs fixed so the result is unique for a given draw.
DenseMatrix orthogonal_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    const std::size_t big = std::max(rows, cols);
    const DenseMatrix g = gaussian_matrix(big, big, 1.0, rng);
    Eigen::MatrixXd gm(big, big);
    for (std::size_t i = 0; i < big; ++i) {
        for (std::size_t j = 0; j < big; ++j) gm(static_cast<Eigen::Index>(i),
                                                 static_cast<Eigen::Index>(j)) = g(i, j);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gm);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (std::size_t j = 0; j < big; ++j) {
        if (r(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) < 0.0) {
            q.col(static_cast<Eigen::Index>(j)) *= -1.0;
        }
    }
    DenseMatrix out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            out(i, j) = q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
    }
    return out;
}

DenseMatrix identity_or_error(std::size_t rows, std::size_t cols, const char* what) {
    if (rows != cols) {
        throw ConfigError(std::string("identity init requires square ") + what + ", got " +
                          std::to_string(rows) + "x" + std::to_string(cols));
    }
    return DenseMatrix::identity(rows);
}

DenseMatrix draw_matrix(std::size_t rows, std::size_t cols, InitScheme scheme, double sigma,
                        Rng& rng, const char* what) {
    switch (scheme) {
        case InitScheme::UniformFanIn: return uniform_fan_in_matrix(rows, cols, rng);
        case InitScheme::Identity: return identity_or_error(rows, cols, what);
        case InitScheme::Orthogonal: return orthogonal_matrix(rows, cols, rng);
        case InitScheme::Gaussian: return gaussian_matrix(rows, cols, sigma, rng);
    }
    throw ConfigError("unknown init scheme");
}

}  // namespace

GnnParams init_params(Architecture arch, int depth, int input_dim,
                      std::span<const int> hidden_dims, int output_dim, InitScheme scheme,
                      std::uint64_t seed, double gaussian_sigma) {
    if (depth < 0) throw ConfigError("init_params: negative depth");
    if (hidden_dims.size() != static_cast<std::size_t>(depth)) {
        throw ConfigError("init_params: expected " + std::to_string(depth) + " hidden dims");
    }
    GnnParams params;
    params.arch = arch;
    params.depth = depth;
    params.output_dim = output_dim;
    params.dims.reserve(static_cast<std::size_t>(depth) + 1);
    params.dims.push_back(input_dim);
    for (int d : hidden_dims) params.dims.push_back(d);

    for (int d : hidden_dims) {
        if (d < input_dim) {
            std::cerr << "warning: hidden dimension " << d << " is below the input dimension "
                      << input_dim << "; the convergence conditions may degenerate\n";
            break;
        }
    }

    Rng rng(seed);
    for (int l = 1; l <= depth; ++l) {
        params.b.push_back(draw_matrix(static_cast<std::size_t>(params.dims[l]),
                                       static_cast<std::size_t>(params.dims[l - 1]), scheme,
                                       gaussian_sigma, rng, "layer"));
    }
    if (is_multiscale(arch)) {
        for (int l = 0; l <= depth; ++l) {
            const auto rows = static_cast<std::size_t>(output_dim);
            const auto cols = static_cast<std::size_t>(params.dims[l]);
            if (scheme == InitScheme::Identity) {
                // Top head is the identity, lower heads start at zero so the
                // initial multiscale output matches the non-multiscale one.
                params.w.push_back(l == depth ? identity_or_error(rows, cols, "output head")
                                              : DenseMatrix(rows, cols));
            } else {
                params.w.push_back(draw_matrix(rows, cols, scheme, gaussian_sigma, rng, "output head"));
            }
        }
    } else {
        params.w.push_back(draw_matrix(static_cast<std::size_t>(output_dim),
                                       static_cast<std::size_t>(params.dims.back()), scheme,
                                       gaussian_sigma, rng, "output head"));
    }
    params.validate();
    return params;
}

namespace {

void relu_in_place(DenseMatrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (m(i, j) < 0.0) m(i, j) = 0.0;
        }
    }
}

}  // namespace

DenseMatrix forward(const GnnParams& params, const DenseMatrix& x, const DenseMatrix& s,
                    const TrainIndex& idx) {
    params.validate();
    if (x.rows() != static_cast<std::size_t>(params.input_dim())) {
        throw DimensionError("forward: feature rows " + std::to_string(x.rows()) +
                             " do not match input dimension " +
                             std::to_string(params.input_dim()));
    }
    if (s.rows() != s.cols() || x.cols() != s.rows()) {
        throw DimensionError("forward: aggregation matrix shape mismatch");
    }
    idx.validate(static_cast<int>(s.rows()));

    const bool relu = has_relu(params.arch);
    DenseMatrix hidden = x;  // X_(0)
    DenseMatrix out;
    if (is_multiscale(params.arch)) {
        out = params.w[0] * hidden.columns(idx.indices);
        for (int l = 1; l <= params.depth; ++l) {
            hidden = params.b[static_cast<std::size_t>(l) - 1] * (hidden * s);
            if (relu) relu_in_place(hidden);
            out += params.w[static_cast<std::size_t>(l)] * hidden.columns(idx.indices);
        }
    } else {
        for (int l = 1; l <= params.depth; ++l) {
            hidden = params.b[static_cast<std::size_t>(l) - 1] * (hidden * s);
            if (relu) relu_in_place(hidden);
        }
        out = params.w[0] * hidden.columns(idx.indices);
    }
    return out;
}

DenseMatrix forward_restricted(const GnnParams& params,
                               std::span<const DenseMatrix> restricted_features) {
    if (has_relu(params.arch)) {
        throw UnsupportedError("forward_restricted: defined for linear architectures only");
    }
    if (restricted_features.size() < static_cast<std::size_t>(params.depth) + 1) {
        throw DimensionError("forward_restricted: need features up to the network depth");
    }
    const auto prefixes = prefix_products(params);
    if (is_multiscale(params.arch)) {
        DenseMatrix out = params.w[0] * restricted_features[0];
        for (int l = 1; l <= params.depth; ++l) {
            out += params.w[static_cast<std::size_t>(l)] *
                   (prefixes[static_cast<std::size_t>(l)] *
                    restricted_features[static_cast<std::size_t>(l)]);
        }
        return out;
    }
    return params.w[0] *
           (prefixes[static_cast<std::size_t>(params.depth)] *
            restricted_features[static_cast<std::size_t>(params.depth)]);
}

DenseMatrix layer_products(const GnnParams& params, int l_from, int l_to) {
    if (l_from < 1 || l_from > params.depth + 1 || l_to < 0 || l_to > params.depth) {
        throw ConfigError("layer_products: indices out of range");
    }
    if (l_from > l_to) {
        return DenseMatrix::identity(static_cast<std::size_t>(params.dims[l_from - 1]));
    }
    DenseMatrix prod = params.b[static_cast<std::size_t>(l_from) - 1];
    for (int l = l_from + 1; l <= l_to; ++l) {
        prod = params.b[static_cast<std::size_t>(l) - 1] * prod;
    }
    return prod;
}

std::vector<DenseMatrix> prefix_products(const GnnParams& params) {
    std::vector<DenseMatrix> out;
    out.reserve(static_cast<std::size_t>(params.depth) + 1);
    out.push_back(DenseMatrix::identity(static_cast<std::size_t>(params.input_dim())));
    for (int l = 1; l <= params.depth; ++l) {
        out.push_back(params.b[static_cast<std::size_t>(l) - 1] * out.back());
    }
    return out;
}

std::vector<DenseMatrix> end_to_end_state(const GnnParams& params) {
    const auto prefixes = prefix_products(params);
    std::vector<DenseMatrix> z;
    if (is_multiscale(params.arch)) {
        z.reserve(static_cast<std::size_t>(params.depth) + 1);
        for (int l = 0; l <= params.depth; ++l) {
            z.push_back(params.w[static_cast<std::size_t>(l)] *
                        prefixes[static_cast<std::size_t>(l)]);
        }
    } else {
        z.push_back(params.w[0] * prefixes[static_cast<std::size_t>(params.depth)]);
    }
    return z;
}

namespace {

nlohmann::json matrix_to_json(const DenseMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

DenseMatrix matrix_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty()) {
        throw ConfigError("params json: matrix must be a non-empty array of rows");
    }
    const std::size_t rows = j.size();
    const std::size_t cols = j.front().size();
    std::vector<double> entries;
    entries.reserve(rows * cols);
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != cols) {
            throw ConfigError("params json: ragged matrix rows");
        }
        for (const auto& v : row) entries.push_back(v.get<double>());
    }
    return DenseMatrix(rows, cols, std::move(entries));
}

}  // namespace

nlohmann::json params_to_json(const GnnParams& params) {
    nlohmann::json j;
    j["arch"] = to_string(params.arch);
    j["H"] = params.depth;
    j["dims"] = params.dims;
    j["m_y"] = params.output_dim;
    nlohmann::json b = nlohmann::json::array();
    for (const auto& m : params.b) b.push_back(matrix_to_json(m));
    j["B"] = std::move(b);
    if (is_multiscale(params.arch)) {
        nlohmann::json w = nlohmann::json::array();
        for (const auto& m : params.w) w.push_back(matrix_to_json(m));
        j["W"] = std::move(w);
    } else {
        j["W"] = matrix_to_json(params.w[0]);
    }
    return j;
}

GnnParams params_from_json(const nlohmann::json& j) {
    GnnParams params;
    params.arch = architecture_from_string(j.at("arch").get<std::string>());
    params.depth = j.at("H").get<int>();
    params.dims = j.at("dims").get<std::vector<int>>();
    params.output_dim = j.at("m_y").get<int>();
    for (const auto& m : j.at("B")) params.b.push_back(matrix_from_json(m));
    if (is_multiscale(params.arch)) {
        for (const auto& m : j.at("W")) params.w.push_back(matrix_from_json(m));
    } else {
        params.w.push_back(matrix_from_json(j.at("W")));
    }
    params.validate();
    return params;
}

}  // namespace gnnflow
