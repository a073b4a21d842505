// Shared fixtures for the test suites: analytic curves on the quadrature
// grid and a synthetic questionnaire population.

#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "discfda/functional_stats.hpp"
#include "discfda/pipeline/schema.hpp"

namespace testing_support {

using discfda::GridCurve;
using discfda::QuadratureGrid;

/// Curve with analytic value and derivative channels.
inline GridCurve analytic(const QuadratureGrid& grid, const std::function<double(double)>& f, const std::function<double(double)>& df,
                          const std::function<double(double)>& d2f) {
    GridCurve c{grid, {}, std::vector<double>{}, std::vector<double>{}};
    for (double t : grid.nodes()) {
        c.values.push_back(f(t));
        c.deriv1->push_back(df(t));
        c.deriv2->push_back(d2f(t));
    }
    return c;
}

inline GridCurve exponential(const QuadratureGrid& grid, double k, double scale = 1.0) {
    return analytic(
        grid, [=](double t) { return scale * std::exp(-k * t); }, [=](double t) { return -k * scale * std::exp(-k * t); },
        [=](double t) { return k * k * scale * std::exp(-k * t); });
}

/// Curves e^{-kt} (1 + a sin(wt)) with |a| <= noise and exact derivatives;
/// `per` curves for each rate, grouped by rate.
inline std::vector<GridCurve> planted_rates(const QuadratureGrid& grid, const std::vector<double>& rates, std::size_t per, double noise,
                                            std::uint64_t seed, std::vector<int>* truth = nullptr) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<GridCurve> out;
    for (std::size_t g = 0; g < rates.size(); ++g)
        for (std::size_t i = 0; i < per; ++i) {
            double k = rates[g], a = noise * u(rng), w = 0.05 + 0.05 * u(rng);
            out.push_back(analytic(
                grid, [=](double t) { return std::exp(-k * t) * (1 + a * std::sin(w * t)); },
                [=](double t) { return std::exp(-k * t) * (-k * (1 + a * std::sin(w * t)) + a * w * std::cos(w * t)); },
                [=](double t) {
                    double s = std::sin(w * t), c = std::cos(w * t);
                    return std::exp(-k * t) * (k * k * (1 + a * s) - 2 * k * a * w * c - a * w * w * s);
                }));
            if (truth) truth->push_back(static_cast<int>(g));
        }
    return out;
}

inline std::string money(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

/// Four behaviour groups with distinct discount rates; the planted
/// temperament wins the Part 3 tallies.
struct PopulationSpec {
    std::size_t respondents = 170;
    std::uint64_t seed = 7;
    std::vector<double> rates{0.004, 0.012, 0.03, 0.07};
    double noise = 0.01;
};

inline std::vector<discfda::RespondentSubmission> synthetic_population(const PopulationSpec& spec = {}) {
    using namespace discfda;
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    TimeGrid grid;
    const char* labels[] = {"Artisan", "Guardian", "Idealist", "Rational"};
    std::vector<RespondentSubmission> out;
    for (std::size_t i = 0; i < spec.respondents; ++i) {
        std::size_t g = i % 4;
        double k = spec.rates[g] * (1.0 + 0.15 * u(rng));
        RespondentSubmission s;
        char id[16];
        std::snprintf(id, sizeof id, "R%03zu", i + 1);
        s.respondent_id = id;
        s.gender = (i % 3 == 0) ? "F" : "M";
        s.age = 20 + static_cast<int>(i % 40);
        double prev = 1000.0;
        for (std::size_t h = 0; h < grid.size(); ++h) {
            double t = grid[h];
            double f = std::exp(-k * t) * (1.0 + spec.noise * u(rng) * (t > 0));
            double x = h == 0 ? 1000.0 : std::max(prev, 1000.0 / std::min(f, 1.0));
            prev = x;
            s.part1_answers.push_back({t, Decimal::parse(money(x)), 0});
        }
        for (auto sc : default_scenarios()) {
            double m = 0.3 + 0.4 * static_cast<double>(g) + 0.1 * u(rng);
            double tau = (m * sc.t * sc.sigma + sc.sigma) / (1.0 + m * sc.s);
            s.part2_answers.push_back({sc.scenario, sc.s, sc.t, sc.sigma, tau, sc.base_amount});
        }
        for (std::size_t l = 0; l < 4; ++l) s.part3_tallies[labels[l]] = l == g ? 12 : 3 + static_cast<int>(l);
        s.distractor_answers = {"b", "a"};
        out.push_back(std::move(s));
    }
    return out;
}

inline std::string population_jsonl(const std::vector<discfda::RespondentSubmission>& subs) {
    std::string out;
    for (const auto& s : subs) out += discfda::pipeline::submission_to_json(s).dump() + "\n";
    return out;
}

}  // namespace testing_support
