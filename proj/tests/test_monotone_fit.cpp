#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "discfda/monotone_fit.hpp"

using namespace discfda;

namespace {

DiscountSamples sampled(const std::function<double(double)>& f, const TimeGrid& grid = TimeGrid{}) {
    DiscountSamples s{grid, {}, {}, false};
    for (double t : grid.horizons()) s.values.push_back(f(t));
    return s;
}

double sup_error(const FittedCurve& c, const std::function<double(double)>& f) {
    double e = 0.0;
    for (std::size_t i = 0; i < c.grid.size(); ++i) e = std::max(e, std::abs(c.values[i] - f(c.grid.nodes()[i])));
    return e;
}

BasisSpec table_basis() { return make_basis_for_horizons(TimeGrid{}.horizons()); }

}  // namespace

TEST(MonotoneFit, RecoversExponential) {
    auto f = [](double t) { return std::exp(-0.03 * t); };
    auto t0 = std::chrono::steady_clock::now();
    auto res = fit_monotone_discount(sampled(f), table_basis());
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LE(sup_error(res.curve, f), 1e-2);
    EXPECT_LT(secs, 1.0);
    EXPECT_TRUE(res.diagnostics.converged);
    EXPECT_EQ(res.curve.values.front(), 1.0);
    for (double d : res.curve.deriv1) EXPECT_LT(d, 0.0);
}

TEST(MonotoneFit, RecoversHyperbola) {
    auto f = [](double t) { return 1.0 / (1.0 + 0.1 * t); };
    auto res = fit_monotone_discount(sampled(f), table_basis());
    EXPECT_LE(sup_error(res.curve, f), 2e-2);
    EXPECT_EQ(eval_curve(res.curve, 0.0), 1.0);
    for (double d : res.curve.deriv1) EXPECT_LT(d, 0.0);
}

TEST(MonotoneFit, FlatDataIsFlagged) {
    auto res = fit_monotone_discount(sampled([](double) { return 1.0; }), table_basis());
    EXPECT_TRUE(res.diagnostics.degenerate_flat);
    EXPECT_TRUE(res.curve.near_constant);
    for (double v : res.curve.values) EXPECT_NEAR(v, 1.0, 1e-4);
    for (double d : res.curve.deriv1) EXPECT_LT(d, 0.0);
}

TEST(MonotoneFit, ObjectiveTraceNonIncreasing) {
    auto res = fit_monotone_discount(sampled([](double t) { return 0.6 + 0.4 * std::exp(-0.1 * t); }), table_basis());
    const auto& tr = res.diagnostics.objective_trace;
    ASSERT_GE(tr.size(), 2u);
    for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_LE(tr[i], tr[i - 1]);
}

TEST(MonotoneFit, ResidualsAreFittedMinusObserved) {
    auto s = sampled([](double t) { return 1.0 / (1.0 + 0.05 * t); });
    auto res = fit_monotone_discount(s, table_basis());
    for (std::size_t j = 0; j < s.values.size(); ++j)
        EXPECT_NEAR(res.diagnostics.residuals[j], eval_curve(res.curve, s.grid[j]) - s.values[j], 1e-12);
}

TEST(MonotoneFit, BudgetExhaustionIsNonConvergence) {
    FitConfig cfg;
    cfg.max_iters = 1;
    try {
        fit_monotone_discount(sampled([](double t) { return 1.0 / (1.0 + 0.3 * t); }), table_basis(), cfg);
        FAIL() << "expected NonConvergence";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonConvergence);
    }
}

TEST(MonotoneFit, InputGuards) {
    auto s = sampled([](double t) { return std::exp(-0.01 * t); });
    s.values[3] = 1.2;
    EXPECT_THROW(fit_monotone_discount(s, table_basis()), Error);
    auto short_s = sampled([](double t) { return std::exp(-0.01 * t); });
    short_s.values.pop_back();
    EXPECT_THROW(fit_monotone_discount(short_s, table_basis()), Error);
    FitConfig bad;
    bad.lambda = -1;
    EXPECT_THROW(fit_monotone_discount(sampled([](double) { return 1.0; }), table_basis(), bad), Error);
}

TEST(EvalCurve, ConstantLogSlopeGivesLine) {
    auto basis = make_basis(90.0, 4, std::vector<double>{30.0, 60.0});
    const double c = 0.4;
    auto curve = make_curve(basis, std::vector<double>(static_cast<std::size_t>(basis.size), c), std::log(0.01));
    for (double t : {0.0, 5.0, 12.3, 44.4, 90.0}) {
        EXPECT_NEAR(eval_curve(curve, t, 0), 1.0 - 0.01 * std::exp(c) * t, 1e-12);
        EXPECT_NEAR(eval_curve(curve, t, 1), -0.01 * std::exp(c), 1e-14);
        EXPECT_NEAR(eval_curve(curve, t, 2), 0.0, 1e-14);
    }
    EXPECT_EQ(eval_curve(curve, 0.0), 1.0);
    EXPECT_THROW(eval_curve(curve, 90.5), Error);
    EXPECT_THROW(eval_curve(curve, 1.0, 3), Error);
}

TEST(EvalCurve, OffNodeValuesInterpolateNodeValues) {
    auto res = fit_monotone_discount(sampled([](double t) { return std::exp(-0.04 * t); }), table_basis());
    const auto& c = res.curve;
    for (std::size_t i = 0; i + 1 < c.grid.size(); i += 17) {
        double mid = 0.5 * (c.grid.nodes()[i] + c.grid.nodes()[i + 1]);
        double v = eval_curve(c, mid);
        EXPECT_LT(v, c.values[i]);
        EXPECT_GT(v, c.values[i + 1]);
    }
}

TEST(Gradient, MatchesCentralDifferences) {
    auto s = sampled([](double t) { return 1.0 / (1.0 + 0.07 * t); });
    auto basis = table_basis();
    FitConfig cfg;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double h = 1e-6;
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::VectorXd x(basis.size + 1);
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = 0.5 * u(rng);
        x(basis.size) = -4.0 + u(rng);
        auto g = objective_gradient(s, basis, cfg, x);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            Eigen::VectorXd xp = x, xm = x;
            xp(i) += h;
            xm(i) -= h;
            double fd = (objective_value(s, basis, cfg, xp) - objective_value(s, basis, cfg, xm)) / (2 * h);
            EXPECT_LE(std::abs(g(i) - fd), 1e-5 * std::max(std::abs(fd), 1e-3)) << "component " << i;
        }
    }
}

TEST(Gradient, VanishesAtOptimum) {
    auto s = sampled([](double t) { return std::exp(-0.03 * t); });
    auto basis = table_basis();
    FitConfig cfg;
    auto res = fit_monotone_discount(s, basis, cfg);
    Eigen::VectorXd x(basis.size + 1);
    for (int k = 0; k < basis.size; ++k) x(k) = res.curve.coeffs[static_cast<std::size_t>(k)];
    x(basis.size) = res.curve.gamma;
    auto g = objective_gradient(s, basis, cfg, x);
    EXPECT_LE(g.lpNorm<Eigen::Infinity>(), 1e-6 * (1.0 + res.diagnostics.objective));
}

TEST(Gradient, ZeroAtExactLinearInterpolant) {
    TimeGrid grid({0, 5, 10});
    DiscountSamples s{grid, {1.0, 0.95, 0.9}, {}, false};
    auto basis = make_basis(10.0, 4, std::vector<double>{});
    FitConfig cfg;
    cfg.lambda = 0.0;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(basis.size + 1);
    x(basis.size) = std::log(0.01);
    auto g = objective_gradient(s, basis, cfg, x);
    EXPECT_LE(g.lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_LE(objective_value(s, basis, cfg, x), 1e-24);
}
