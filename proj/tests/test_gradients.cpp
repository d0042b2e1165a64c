#include <doctest.h>

#include <cmath>

#include "gnnflow/common.hpp"
#include "gnnflow/gradients.hpp"
#include "test_support.hpp"

using namespace gnnflow;

namespace {

double max_rel_block_error(const GradientSet& a, const GradientSet& b) {
    double worst = 0.0;
    const auto cmp = [&](const DenseMatrix& m1, const DenseMatrix& m2) {
        DenseMatrix d = m1;
        d -= m2;
        const double scale = std::max({m1.frobenius_norm(), m2.frobenius_norm(), 1e-8});
        worst = std::max(worst, d.frobenius_norm() / scale);
    };
    for (std::size_t i = 0; i < a.d_w.size(); ++i) cmp(a.d_w[i], b.d_w[i]);
    for (std::size_t i = 0; i < a.d_b.size(); ++i) cmp(a.d_b[i], b.d_b[i]);
    return worst;
}

}  // namespace

TEST_CASE("squared loss and residual derivative") {
    Rng rng(1);
    const DenseMatrix y = testing::random_matrix(rng, 2, 3);
    SUBCASE("zero residual") {
        const ResidualGrad rg = loss_and_residual_grad(y, y, LossKind::SquaredFrobenius);
        CHECK(rg.loss == 0.0);
        CHECK(rg.v.max_abs() == 0.0);
    }
    SUBCASE("direct formula") {
        const ResidualGrad rg = loss_and_residual_grad(DenseMatrix{{1}}, DenseMatrix{{0}},
                                                       LossKind::SquaredFrobenius);
        CHECK(rg.loss == doctest::Approx(1.0));
        CHECK(rg.v(0, 0) == doctest::Approx(2.0));
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(
            loss_and_residual_grad(DenseMatrix(2, 3), DenseMatrix(2, 2), LossKind::SquaredFrobenius),
            DimensionError);
    }
}

TEST_CASE("cross-entropy loss and residual derivative") {
    SUBCASE("symmetric two-class logits") {
        const ResidualGrad rg = loss_and_residual_grad(DenseMatrix{{0}, {0}},
                                                       DenseMatrix{{1}, {0}},
                                                       LossKind::CrossEntropySum);
        CHECK(rg.loss == doctest::Approx(std::log(2.0)));
        CHECK(rg.v(0, 0) == doctest::Approx(-0.5));
        CHECK(rg.v(1, 0) == doctest::Approx(0.5));
    }
    SUBCASE("one-hot violations are rejected") {
        CHECK_THROWS_AS(loss_and_residual_grad(DenseMatrix(2, 1), DenseMatrix{{0.5}, {0.5}},
                                               LossKind::CrossEntropySum),
                        ConfigError);
        CHECK_THROWS_AS(loss_and_residual_grad(DenseMatrix(2, 1), DenseMatrix{{1}, {1}},
                                               LossKind::CrossEntropySum),
                        ConfigError);
    }
    SUBCASE("loss sums over training nodes") {
        const DenseMatrix logits{{0, 0}, {0, 0}};
        const DenseMatrix labels{{1, 0}, {0, 1}};
        const ResidualGrad rg =
            loss_and_residual_grad(logits, labels, LossKind::CrossEntropySum);
        CHECK(rg.loss == doctest::Approx(2.0 * std::log(2.0)));
    }
}

TEST_CASE("scalar closed-form gradients match hand differentiation") {
    // L = (w b - y)^2 with x = s = 1: dW = 2(wb-y) b, dB = 2(wb-y) w.
    const double w = 1.3;
    const double b = -0.4;
    const double y = 0.7;
    GnnParams p;
    p.arch = Architecture::LinearGnn;
    p.depth = 1;
    p.dims = {1, 1};
    p.output_dim = 1;
    p.b = {DenseMatrix{{b}}};
    p.w = {DenseMatrix{{w}}};
    const DenseMatrix x{{1}};
    const DenseMatrix s{{1}};
    const TrainIndex idx = TrainIndex::all(1);
    const ResidualGrad rg =
        loss_and_residual_grad(forward(p, x, s, idx), DenseMatrix{{y}}, LossKind::SquaredFrobenius);
    const GradientSet grads = analytic_gradients(p, x, s, idx, rg);
    CHECK(grads.d_w[0](0, 0) == doctest::Approx(2.0 * (w * b - y) * b));
    CHECK(grads.d_b[0](0, 0) == doctest::Approx(2.0 * (w * b - y) * w));
}

TEST_CASE("zero residual derivative gives zero gradients") {
    Rng rng(17);
    const auto inst = testing::random_instance(rng, 5, 3, 2, AggregationKind::Gcn,
                                               LossKind::SquaredFrobenius);
    const GnnParams p =
        testing::random_params(rng, Architecture::MultiscaleLinearGnn, 2, 3, 4, 2);
    ResidualGrad rg;
    rg.loss = 0.0;
    rg.v = DenseMatrix(2, inst.idx.size());
    const GradientSet grads = analytic_gradients(p, inst.x, inst.s, inst.idx, rg);
    CHECK(grads.squared_norm() == 0.0);
}

TEST_CASE("closed-form gradients agree with central differences") {
    Rng rng(271828);
    for (const auto arch : {Architecture::LinearGnn, Architecture::MultiscaleLinearGnn}) {
        for (const auto loss : {LossKind::SquaredFrobenius, LossKind::CrossEntropySum}) {
            for (int trial = 0; trial < 5; ++trial) {
                const int n = 4 + static_cast<int>(rng.uniform_index(5));
                const int depth = 1 + static_cast<int>(rng.uniform_index(4));
                const int m_x = 2 + static_cast<int>(rng.uniform_index(3));
                const int m_y = 2 + static_cast<int>(rng.uniform_index(2));
                const auto agg = trial % 2 == 0 ? AggregationKind::Gcn : AggregationKind::Gin;
                const auto inst = testing::random_instance(rng, n, m_x, m_y, agg, loss);
                const GnnParams p = testing::random_params(
                    rng, arch, depth, m_x, 2 + static_cast<int>(rng.uniform_index(4)), m_y);
                const ResidualGrad rg =
                    loss_and_residual_grad(forward(p, inst.x, inst.s, inst.idx), inst.y, loss);
                const GradientSet analytic = analytic_gradients(p, inst.x, inst.s, inst.idx, rg);
                const GradientSet fd =
                    finite_difference_gradients(p, inst.x, inst.s, inst.idx, inst.y, loss, 1e-5);
                CHECK(max_rel_block_error(analytic, fd) < 1e-6);
            }
        }
    }
}

TEST_CASE("relu backprop agrees with central differences away from kinks") {
    Rng rng(314159);
    for (const auto arch : {Architecture::ReluGnn, Architecture::MultiscaleReluGnn}) {
        int accepted = 0;
        for (int attempt = 0; attempt < 60 && accepted < 5; ++attempt) {
            const int n = 4 + static_cast<int>(rng.uniform_index(4));
            const int depth = 1 + static_cast<int>(rng.uniform_index(3));
            const auto inst = testing::random_instance(rng, n, 3, 2, AggregationKind::Gin,
                                                       LossKind::SquaredFrobenius);
            const GnnParams p = testing::random_params(rng, arch, depth, 3, 4, 2, 0.8);

            // Keep only instances whose pre-activations clear the
            // finite-difference step, so the subgradient is unambiguous.
            DenseMatrix hidden = inst.x;
            double min_abs_preact = 1e100;
            for (int l = 1; l <= depth; ++l) {
                hidden = p.b[static_cast<std::size_t>(l) - 1] * (hidden * inst.s);
                for (double v : hidden.entries()) {
                    min_abs_preact = std::min(min_abs_preact, std::abs(v));
                }
                for (std::size_t k = 0; k < hidden.entries().size(); ++k) {
                    if (hidden.entries()[k] < 0.0) hidden.data()[k] = 0.0;
                }
            }
            if (min_abs_preact < 1e-3) continue;
            ++accepted;

            const ResidualGrad rg = loss_and_residual_grad(
                forward(p, inst.x, inst.s, inst.idx), inst.y, LossKind::SquaredFrobenius);
            const GradientSet analytic = analytic_gradients(p, inst.x, inst.s, inst.idx, rg);
            const GradientSet fd = finite_difference_gradients(p, inst.x, inst.s, inst.idx,
                                                               inst.y, LossKind::SquaredFrobenius,
                                                               1e-5);
            CHECK(max_rel_block_error(analytic, fd) < 1e-6);
        }
        CHECK(accepted == 5);
    }
}

TEST_CASE("finite differences are independent of trainer configuration") {
    // Pure function of (params, data, loss): repeated evaluation is identical.
    Rng rng(41);
    const auto inst = testing::random_instance(rng, 5, 2, 2, AggregationKind::Gcn,
                                               LossKind::SquaredFrobenius);
    const GnnParams p = testing::random_params(rng, Architecture::LinearGnn, 2, 2, 3, 2);
    const GradientSet a = finite_difference_gradients(p, inst.x, inst.s, inst.idx, inst.y,
                                                      LossKind::SquaredFrobenius);
    const GradientSet b = finite_difference_gradients(p, inst.x, inst.s, inst.idx, inst.y,
                                                      LossKind::SquaredFrobenius);
    for (std::size_t i = 0; i < a.d_b.size(); ++i) CHECK(a.d_b[i] == b.d_b[i]);
}

TEST_CASE("single-head gradients factor through the end-to-end residual") {
    // dW recomputed as (V C_Hᵀ) B̄ᵀ and dB_(l) as tailᵀ (V C_Hᵀ) prefixᵀ.
    Rng rng(513);
    for (int trial = 0; trial < 10; ++trial) {
        const int depth = 1 + static_cast<int>(rng.uniform_index(3));
        const auto inst = testing::random_instance(rng, 6, 3, 2, AggregationKind::Gcn,
                                                   LossKind::SquaredFrobenius);
        const GnnParams p = testing::random_params(rng, Architecture::LinearGnn, depth, 3, 4, 2);
        const ResidualGrad rg = loss_and_residual_grad(forward(p, inst.x, inst.s, inst.idx),
                                                       inst.y, LossKind::SquaredFrobenius);
        const GradientSet grads = analytic_gradients(p, inst.x, inst.s, inst.idx, rg);

        const DenseMatrix c_top = propagated_features(inst.x, inst.s, depth, inst.idx);
        const DenseMatrix nabla = rg.v * c_top.transposed();
        const auto prefixes = prefix_products(p);
        CHECK(testing::rel_matrix_diff(
                  grads.d_w[0], nabla * prefixes[static_cast<std::size_t>(depth)].transposed()) <
              1e-12);
        for (int l = 1; l <= depth; ++l) {
            const DenseMatrix tail = p.w[0] * layer_products(p, l + 1, depth);
            const DenseMatrix expected =
                tail.transposed() * nabla * prefixes[static_cast<std::size_t>(l) - 1].transposed();
            CHECK(testing::rel_matrix_diff(grads.d_b[static_cast<std::size_t>(l) - 1], expected) <
                  1e-12);
        }
    }
}

TEST_CASE("squared gradient norm is nonnegative and vanishes only at stationarity") {
    Rng rng(600);
    const auto inst = testing::random_instance(rng, 5, 3, 2, AggregationKind::Gin,
                                               LossKind::SquaredFrobenius);
    const GnnParams p = testing::random_params(rng, Architecture::LinearGnn, 2, 3, 4, 2);
    const ResidualGrad rg = loss_and_residual_grad(forward(p, inst.x, inst.s, inst.idx), inst.y,
                                                   LossKind::SquaredFrobenius);
    const GradientSet grads = analytic_gradients(p, inst.x, inst.s, inst.idx, rg);
    CHECK(grads.squared_norm() > 0.0);

    ResidualGrad zero;
    zero.v = DenseMatrix(2, inst.idx.size());
    CHECK(analytic_gradients(p, inst.x, inst.s, inst.idx, zero).squared_norm() == 0.0);
}

TEST_CASE("central differences are near-exact on the scalar quadratic") {
    // L(w, b) = (wb - y)^2 is quadratic in each scalar separately, so the
    // third-derivative term of the central difference vanishes and only
    // rounding remains.
    const double w = 0.9;
    const double b = 1.7;
    const double y = -0.3;
    GnnParams p;
    p.arch = Architecture::LinearGnn;
    p.depth = 1;
    p.dims = {1, 1};
    p.output_dim = 1;
    p.b = {DenseMatrix{{b}}};
    p.w = {DenseMatrix{{w}}};
    const GradientSet fd = finite_difference_gradients(p, DenseMatrix{{1}}, DenseMatrix{{1}},
                                                       TrainIndex::all(1), DenseMatrix{{y}},
                                                       LossKind::SquaredFrobenius, 1e-5);
    const double dw = 2.0 * (w * b - y) * b;
    const double db = 2.0 * (w * b - y) * w;
    CHECK(testing::rel_diff(fd.d_w[0](0, 0), dw) < 1e-8);
    CHECK(testing::rel_diff(fd.d_b[0](0, 0), db) < 1e-8);
}
