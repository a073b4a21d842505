#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "discfda/basis_quad.hpp"
#include "discfda/discount_core.hpp"

using namespace discfda;

namespace {

BasisSpec table_basis() { return make_basis_for_horizons(TimeGrid{}.horizons(), 4); }

}  // namespace

TEST(Basis, SizeFromKnots) {
    EXPECT_EQ(make_basis(90.0, 4, std::vector<double>{}).size, 4);
    EXPECT_EQ(table_basis().size, 13);
}

TEST(Basis, Guards) {
    auto code_of = [](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    EXPECT_EQ(code_of([] { make_basis(90.0, 1, std::vector<double>{10.0}); }), ErrorCode::OrderTooSmall);
    EXPECT_EQ(code_of([] { make_basis(90.0, 4, std::vector<double>{95.0}); }), ErrorCode::KnotOutsideDomain);
    EXPECT_EQ(code_of([] { eval_basis(table_basis(), 91.0); }), ErrorCode::OutOfDomain);
}

TEST(Basis, ClampedEndpoints) {
    auto spec = make_basis(90.0, 4, std::vector<double>{});
    auto v0 = eval_basis(spec, 0.0);
    EXPECT_EQ(v0, (std::vector<double>{1, 0, 0, 0}));
    auto v1 = eval_basis(spec, 90.0);
    EXPECT_NEAR(v1[3], 1.0, 1e-15);
    EXPECT_NEAR(v1[0] + v1[1] + v1[2], 0.0, 1e-15);
}

TEST(Basis, PartitionOfUnityAndZeroDerivativeSum) {
    auto spec = table_basis();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 90.0);
    for (int i = 0; i < 200; ++i) {
        double t = u(rng);
        auto v = eval_basis(spec, t, 0);
        auto d1 = eval_basis(spec, t, 1);
        auto d2 = eval_basis(spec, t, 2);
        EXPECT_NEAR(std::accumulate(v.begin(), v.end(), 0.0), 1.0, 1e-12);
        EXPECT_NEAR(std::accumulate(d1.begin(), d1.end(), 0.0), 0.0, 1e-10);
        EXPECT_NEAR(std::accumulate(d2.begin(), d2.end(), 0.0), 0.0, 1e-10);
        for (double x : v) EXPECT_GE(x, -1e-15);
    }
}

TEST(Basis, DerivativesMatchFiniteDifferences) {
    auto spec = table_basis();
    const double h = 1e-5;
    for (double t : {0.7, 3.3, 8.1, 25.0, 51.7, 77.0}) {
        auto lo = eval_basis(spec, t - h), hi = eval_basis(spec, t + h);
        auto d1 = eval_basis(spec, t, 1);
        auto lo1 = eval_basis(spec, t - h, 1), hi1 = eval_basis(spec, t + h, 1);
        auto d2 = eval_basis(spec, t, 2);
        for (int k = 0; k < spec.size; ++k) {
            auto i = static_cast<std::size_t>(k);
            EXPECT_NEAR(d1[i], (hi[i] - lo[i]) / (2 * h), 1e-6);
            EXPECT_NEAR(d2[i], (hi1[i] - lo1[i]) / (2 * h), 1e-6);
        }
    }
}

TEST(Basis, PenaltyGramMatchesFineQuadrature) {
    auto spec = table_basis();
    auto gram = penalty_gram(spec, 2);
    const auto K = static_cast<std::size_t>(spec.size);
    ASSERT_EQ(gram.size(), K * K);
    // composite Simpson on each knot span, 200 panels per span
    std::vector<double> ref(K * K, 0.0);
    for (std::size_t s = 0; s + 1 < spec.knots.size(); ++s) {
        double a = spec.knots[s], b = spec.knots[s + 1];
        if (b <= a) continue;
        const int m = 200;
        double h = (b - a) / m;
        for (int j = 0; j <= m; ++j) {
            double w = (j == 0 || j == m) ? 1 : (j % 2 ? 4 : 2);
            // stay inside the span so the one-sided second derivative is used
            double t = std::clamp(a + j * h, a + 1e-12, b - 1e-12);
            auto d2 = eval_basis(spec, t, 2);
            for (std::size_t p = 0; p < K; ++p)
                for (std::size_t q = 0; q < K; ++q) ref[p * K + q] += w * h / 3.0 * d2[p] * d2[q];
        }
    }
    double scale = *std::max_element(gram.begin(), gram.end());
    for (std::size_t i = 0; i < gram.size(); ++i) EXPECT_NEAR(gram[i], ref[i], 1e-8 * scale);
    for (std::size_t p = 0; p < K; ++p)
        for (std::size_t q = 0; q < K; ++q) EXPECT_EQ(gram[p * K + q], gram[q * K + p]);
}

TEST(Basis, PenaltyAnnihilatesLinearFunctions) {
    // B-splines reproduce t exactly via Greville abscissae; its second derivative is zero.
    auto spec = table_basis();
    auto gram = penalty_gram(spec, 2);
    const auto K = static_cast<std::size_t>(spec.size);
    std::vector<double> c(K);
    for (std::size_t k = 0; k < K; ++k) c[k] = (spec.knots[k + 1] + spec.knots[k + 2] + spec.knots[k + 3]) / 3.0;
    double energy = 0.0;
    for (std::size_t p = 0; p < K; ++p)
        for (std::size_t q = 0; q < K; ++q) energy += c[p] * gram[p * K + q] * c[q];
    EXPECT_NEAR(energy, 0.0, 1e-9);
}

TEST(Quadrature, GridShape) {
    QuadratureGrid g;
    EXPECT_EQ(g.size(), 361u);
    EXPECT_EQ(g.nodes().front(), 0.0);
    EXPECT_EQ(g.nodes().back(), 90.0);
    EXPECT_DOUBLE_EQ(g.step(), 0.25);
    EXPECT_TRUE(g.node_index(7.0).has_value());
    EXPECT_EQ(*g.node_index(7.0), 28u);
    EXPECT_FALSE(g.node_index(7.1).has_value());
    EXPECT_THROW(QuadratureGrid(90.0, 1), Error);
}

TEST(Quadrature, Integrals) {
    QuadratureGrid g;
    std::vector<double> one(g.size(), 1.0), id = g.nodes(), sq(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) sq[i] = g.nodes()[i] * g.nodes()[i];
    EXPECT_NEAR(integrate(one, g), 90.0, 1e-12);
    EXPECT_NEAR(integrate(id, g), 4050.0, 1e-9);
    EXPECT_NEAR(integrate(sq, g), 243000.0, 243.0);
    auto cum = cumulative_integrate(id, g);
    EXPECT_EQ(cum.front(), 0.0);
    EXPECT_NEAR(cum.back(), 4050.0, 1e-9);
    EXPECT_NEAR(cum[40], 50.0, 1e-12);  // t = 10
    std::vector<double> short_values(10, 1.0);
    EXPECT_THROW(integrate(short_values, g), Error);
}
