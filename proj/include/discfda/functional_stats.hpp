/**
 * @file functional_stats.hpp
 * @brief Distances, functional means and variances, exponential baselines
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "basis_quad.hpp"
#include "discount_core.hpp"
#include "error.hpp"
#include "monotone_fit.hpp"

namespace discfda {

/// A function sampled on a shared quadrature grid, optionally with its first
/// and second derivatives.
struct GridCurve {
    QuadratureGrid grid;
    std::vector<double> values;
    std::optional<std::vector<double>> deriv1;
    std::optional<std::vector<double>> deriv2;

    /// Channel r: 0 = values, 1/2 = derivatives.
    const std::vector<double>& channel(int r) const {
        if (r == 0) return values;
        const auto& d = r == 1 ? deriv1 : deriv2;
        if (r < 0 || r > 2 || !d) throw Error(ErrorCode::MissingDerivatives, "derivative of order " + std::to_string(r) + " not available");
        return *d;
    }

    bool has_channel(int r) const { return r == 0 || (r == 1 && deriv1) || (r == 2 && deriv2); }

    static GridCurve from_fitted(const FittedCurve& c) { return {c.grid, c.values, c.deriv1, c.deriv2}; }

    template <class F>
    static GridCurve sample(const QuadratureGrid& grid, F&& f) {
        GridCurve out{grid, std::vector<double>(grid.size()), std::nullopt, std::nullopt};
        for (std::size_t i = 0; i < grid.size(); ++i) out.values[i] = f(grid.nodes()[i]);
        return out;
    }

    static GridCurve constant(const QuadratureGrid& grid, double level) {
        return {grid, std::vector<double>(grid.size(), level), std::vector<double>(grid.size(), 0.0), std::vector<double>(grid.size(), 0.0)};
    }
};

struct CurveGroup {
    std::string label;
    std::vector<GridCurve> curves;

    std::size_t size() const noexcept { return curves.size(); }
};

/// Strictly positive weights on the grid nodes.
class WeightFunction {
public:
    explicit WeightFunction(std::vector<double> values) : values_(std::move(values)) {
        for (double v : values_)
            if (!(v > 0)) throw Error(ErrorCode::InvalidArgument, "weight function must be strictly positive");
    }

    static WeightFunction unit(const QuadratureGrid& grid) { return WeightFunction(std::vector<double>(grid.size(), 1.0)); }

    const std::vector<double>& values() const noexcept { return values_; }

private:
    std::vector<double> values_;
};

namespace detail {

inline void require_same_grid(const GridCurve& a, const GridCurve& b) {
    if (!(a.grid == b.grid) || a.values.size() != b.values.size()) throw Error(ErrorCode::GridMismatch, "curves live on different grids");
}

/// (1/T) int (a - b)^2 on channel r.
inline double mean_sq_diff(const GridCurve& a, const GridCurve& b, int r) {
    require_same_grid(a, b);
    const auto& x = a.channel(r);
    const auto& y = b.channel(r);
    const auto& w = a.grid.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - y[i];
        s += w[i] * d * d;
    }
    return s / a.grid.t_max();
}

inline void require_nonempty(const CurveGroup& g) {
    if (g.curves.empty()) throw Error(ErrorCode::EmptyGroup, "group '" + g.label + "' is empty");
    for (const auto& c : g.curves) require_same_grid(g.curves.front(), c);
}

}  // namespace detail

/// Weighted L2 distance normalized by the total weight.
inline double l2_distance(const GridCurve& f1, const GridCurve& f2, const WeightFunction& weight) {
    detail::require_same_grid(f1, f2);
    const auto& w = weight.values();
    if (w.size() != f1.values.size()) throw Error(ErrorCode::GridMismatch, "weight function length does not match grid");
    const auto& q = f1.grid.weights();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        double d = f1.values[i] - f2.values[i];
        num += q[i] * w[i] * d * d;
        den += q[i] * w[i];
    }
    return std::sqrt(num / den);
}

inline double l2_distance(const GridCurve& f1, const GridCurve& f2) { return std::sqrt(detail::mean_sq_diff(f1, f2, 0)); }

/// Semimetric on r-th derivatives: [ (1/T) int (f1^(r) - f2^(r))^2 ]^(1/2).
inline double deriv_semimetric(const GridCurve& f1, const GridCurve& f2, int r) {
    if (r < 1 || r > 2) throw Error(ErrorCode::InvalidArgument, "derivative order must be 1 or 2");
    if (!f1.has_channel(r) || !f2.has_channel(r)) throw Error(ErrorCode::MissingDerivatives, "derivative of order " + std::to_string(r) + " missing");
    return std::sqrt(detail::mean_sq_diff(f1, f2, r));
}

/// Pointwise mean; derivative channels are averaged when every member has them.
inline GridCurve functional_mean(const CurveGroup& group) {
    detail::require_nonempty(group);
    const auto& first = group.curves.front();
    // running mean: exact when all members coincide
    auto mean_channel = [&](int r) {
        std::vector<double> m = first.channel(r);
        for (std::size_t k = 1; k < group.size(); ++k) {
            const auto& v = group.curves[k].channel(r);
            const double inv = 1.0 / static_cast<double>(k + 1);
            for (std::size_t i = 0; i < m.size(); ++i) m[i] += (v[i] - m[i]) * inv;
        }
        return m;
    };
    GridCurve out{first.grid, mean_channel(0), std::nullopt, std::nullopt};
    for (int r = 1; r <= 2; ++r) {
        bool all = std::all_of(group.curves.begin(), group.curves.end(), [r](const GridCurve& c) { return c.has_channel(r); });
        if (all) (r == 1 ? out.deriv1 : out.deriv2) = mean_channel(r);
    }
    return out;
}

/// Distance between the functional means of two groups, on channel r.
inline double group_mean_distance(const CurveGroup& g1, const CurveGroup& g2, int r = 0) {
    return std::sqrt(detail::mean_sq_diff(functional_mean(g1), functional_mean(g2), r));
}

/// Var_g(t) = (1/n_g) sum (f_i(t) - mean_g(t))^2 on channel r.
inline GridCurve within_variance(const CurveGroup& group, int r = 0) {
    auto mean = functional_mean(group);
    const auto& m = mean.channel(r);
    std::vector<double> var(m.size(), 0.0);
    for (const auto& c : group.curves) {
        const auto& v = c.channel(r);
        for (std::size_t i = 0; i < var.size(); ++i) {
            double d = v[i] - m[i];
            var[i] += d * d;
        }
    }
    for (double& x : var) x /= static_cast<double>(group.size());
    return {mean.grid, std::move(var), std::nullopt, std::nullopt};
}

/// Var(t) = sum_g (mean_g(t) - pooled_mean(t))^2, unweighted over groups; the
/// global mean pools every curve of every group.
inline GridCurve between_variance(std::span<const CurveGroup> groups, int r = 0) {
    if (groups.size() < 2) throw Error(ErrorCode::FewerThanTwoGroups, "between-group variance needs at least 2 groups");
    CurveGroup pooled{"pooled", {}};
    for (const auto& g : groups) {
        detail::require_nonempty(g);
        pooled.curves.insert(pooled.curves.end(), g.curves.begin(), g.curves.end());
    }
    auto overall = functional_mean(pooled);
    const auto& o = overall.channel(r);
    std::vector<double> var(o.size(), 0.0);
    for (const auto& g : groups) {
        auto gm = functional_mean(g);
        const auto& m = gm.channel(r);
        for (std::size_t i = 0; i < var.size(); ++i) {
            double d = m[i] - o[i];
            var[i] += d * d;
        }
    }
    return {overall.grid, std::move(var), std::nullopt, std::nullopt};
}

struct ExponentialFit {
    double rate = 0.0;
    double sse = 0.0;
    GridCurve baseline;  // exp(-rate t) on the grid
};

namespace detail {

struct ExpLoss {
    std::span<const double> t;
    std::span<const double> v;

    double value(double k) const {
        double s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            double r = v[i] - std::exp(-k * t[i]);
            s += r * r;
        }
        return s;
    }

    // first and second derivative of value(k)
    std::pair<double, double> derivs(double k) const {
        double g = 0.0, h = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            double e = std::exp(-k * t[i]);
            double r = v[i] - e;
            g += 2.0 * r * t[i] * e;
            h += 2.0 * t[i] * t[i] * e * (e - r);
        }
        return {g, h};
    }
};

}  // namespace detail

/// Least-squares exponential rate k >= 0 for the samples: coarse log-spaced
/// scan, golden-section refinement, Newton polish.
inline ExponentialFit fit_exponential(const DiscountSamples& samples, const QuadratureGrid& grid = QuadratureGrid{}) {
    const auto& t = samples.grid.horizons();
    detail::ExpLoss loss{t, samples.values};

    std::vector<double> ks{0.0};
    for (int i = 0; i <= 240; ++i) ks.push_back(std::pow(10.0, -7.0 + 8.0 * i / 240.0));  // 1e-7 .. 10
    std::size_t best = 0;
    double best_val = loss.value(0.0);
    for (std::size_t i = 1; i < ks.size(); ++i) {
        double v = loss.value(ks[i]);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    double k = ks[best];
    if (best > 0) {
        double lo = ks[best - 1], hi = best + 1 < ks.size() ? ks[best + 1] : ks[best];
        const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double a = lo, b = hi;
        double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
        double fc = loss.value(c), fd = loss.value(d);
        for (int it = 0; it < 200 && (b - a) > 1e-15 * (1.0 + b); ++it) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = loss.value(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = loss.value(d);
            }
        }
        k = 0.5 * (a + b);
        for (int it = 0; it < 50; ++it) {
            auto [g, h] = loss.derivs(k);
            if (!(h > 0)) break;
            double next = std::max(0.0, k - g / h);
            if (loss.value(next) > loss.value(k)) break;
            bool done = std::abs(next - k) <= 1e-15 * (1.0 + k);
            k = next;
            if (done) break;
        }
    }
    if (loss.value(0.0) <= loss.value(k)) k = 0.0;
    ExponentialFit out{k, loss.value(k), GridCurve::sample(grid, [k](double x) { return std::exp(-k * x); })};
    out.baseline.deriv1 = std::vector<double>(grid.size());
    out.baseline.deriv2 = std::vector<double>(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        (*out.baseline.deriv1)[i] = -k * out.baseline.values[i];
        (*out.baseline.deriv2)[i] = k * k * out.baseline.values[i];
    }
    return out;
}

/// Signed gap between the empirical discount function and exp(-k t).
inline GridCurve uncertainty_aversion(const GridCurve& empirical, double rate) {
    GridCurve out{empirical.grid, std::vector<double>(empirical.values.size()), std::nullopt, std::nullopt};
    if (empirical.values.size() != empirical.grid.size()) throw Error(ErrorCode::GridMismatch, "curve does not match its grid");
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = empirical.values[i] - std::exp(-rate * empirical.grid.nodes()[i]);
    return out;
}

}  // namespace discfda
