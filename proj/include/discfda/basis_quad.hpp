/**
 * @file basis_quad.hpp
 * @brief Clamped B-spline bases and the uniform trapezoid grid shared by
 *        fitting and functional statistics
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace discfda {

/// Clamped B-spline basis of the given order (degree + 1) on [0, t_max].
struct BasisSpec {
    int order = 4;
    std::vector<double> knots;  // full clamped knot vector
    int size = 0;               // K = interior knots + order

    double t_min() const { return knots.front(); }
    double t_max() const { return knots.back(); }
    int degree() const { return order - 1; }

    std::vector<double> interior_knots() const {
        return {knots.begin() + order, knots.end() - order};
    }

    friend bool operator==(const BasisSpec&, const BasisSpec&) = default;
};

inline BasisSpec make_basis(double t_max, int order, std::span<const double> interior_knots) {
    if (order < 2) throw Error(ErrorCode::OrderTooSmall, "order " + std::to_string(order) + " < 2");
    if (!(t_max > 0)) throw Error(ErrorCode::InvalidArgument, "domain length must be positive");
    for (std::size_t i = 0; i < interior_knots.size(); ++i) {
        double k = interior_knots[i];
        if (!(k > 0.0 && k < t_max))
            throw Error(ErrorCode::KnotOutsideDomain, "interior knot " + std::to_string(k) + " not inside (0, " + std::to_string(t_max) + ")");
        if (i > 0 && k < interior_knots[i - 1]) throw Error(ErrorCode::InvalidArgument, "interior knots must be nondecreasing");
    }
    BasisSpec spec;
    spec.order = order;
    spec.knots.assign(static_cast<std::size_t>(order), 0.0);
    spec.knots.insert(spec.knots.end(), interior_knots.begin(), interior_knots.end());
    spec.knots.insert(spec.knots.end(), static_cast<std::size_t>(order), t_max);
    spec.size = static_cast<int>(interior_knots.size()) + order;
    return spec;
}

/// Interior knots at the nonzero horizons strictly inside (0, t_max).
inline BasisSpec make_basis_for_horizons(std::span<const double> horizons, int order = 4) {
    double t_max = horizons.back();
    std::vector<double> interior;
    for (double h : horizons)
        if (h > 0 && h < t_max) interior.push_back(h);
    return make_basis(t_max, order, interior);
}

namespace detail {

/// Knot span index i with knots[i] <= t < knots[i+1]; the right endpoint maps
/// to the last nonempty span.
inline int find_span(const BasisSpec& spec, double t) {
    int n = spec.size;  // spans live in [order-1, n-1]
    int p = spec.degree();
    if (t >= spec.knots[static_cast<std::size_t>(n)]) return n - 1;
    auto it = std::upper_bound(spec.knots.begin() + p, spec.knots.begin() + n + 1, t);
    return static_cast<int>(it - spec.knots.begin()) - 1;
}

/// Nonzero basis functions and their derivatives up to `nd` on span i
/// (Piegl & Tiller, DersBasisFuns). ders[r][j] = d^r/dt^r N_{i-p+j}(t).
inline std::vector<std::vector<double>> ders_basis(const BasisSpec& spec, int span, double t, int nd) {
    const int p = spec.degree();
    const auto& U = spec.knots;
    std::vector<std::vector<double>> ndu(static_cast<std::size_t>(p + 1), std::vector<double>(static_cast<std::size_t>(p + 1)));
    std::vector<double> left(static_cast<std::size_t>(p + 1)), right(static_cast<std::size_t>(p + 1));
    auto at = [](auto& m, int a, int b) -> double& { return m[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]; };
    at(ndu, 0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[static_cast<std::size_t>(j)] = t - U[static_cast<std::size_t>(span + 1 - j)];
        right[static_cast<std::size_t>(j)] = U[static_cast<std::size_t>(span + j)] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            at(ndu, j, r) = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
            double temp = at(ndu, r, j - 1) / at(ndu, j, r);
            at(ndu, r, j) = saved + right[static_cast<std::size_t>(r + 1)] * temp;
            saved = left[static_cast<std::size_t>(j - r)] * temp;
        }
        at(ndu, j, j) = saved;
    }
    std::vector<std::vector<double>> ders(static_cast<std::size_t>(nd + 1), std::vector<double>(static_cast<std::size_t>(p + 1), 0.0));
    for (int j = 0; j <= p; ++j) at(ders, 0, j) = at(ndu, j, p);
    std::vector<std::vector<double>> a(2, std::vector<double>(static_cast<std::size_t>(p + 1)));
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        at(a, 0, 0) = 1.0;
        for (int k = 1; k <= nd; ++k) {
            double d = 0.0;
            int rk = r - k, pk = p - k;
            if (r >= k) {
                at(a, s2, 0) = at(a, s1, 0) / at(ndu, pk + 1, rk);
                d = at(a, s2, 0) * at(ndu, rk, pk);
            }
            int j1 = rk >= -1 ? 1 : -rk;
            int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                at(a, s2, j) = (at(a, s1, j) - at(a, s1, j - 1)) / at(ndu, pk + 1, rk + j);
                d += at(a, s2, j) * at(ndu, rk + j, pk);
            }
            if (r <= pk) {
                at(a, s2, k) = -at(a, s1, k - 1) / at(ndu, pk + 1, r);
                d += at(a, s2, k) * at(ndu, r, pk);
            }
            at(ders, k, r) = d;
            std::swap(s1, s2);
        }
    }
    int factor = p;
    for (int k = 1; k <= nd; ++k) {
        for (int j = 0; j <= p; ++j) at(ders, k, j) *= factor;
        factor *= (p - k);
    }
    return ders;
}

}  // namespace detail

/// Values (deriv_order 0) or derivatives (1, 2) of all K basis functions at t.
inline std::vector<double> eval_basis(const BasisSpec& spec, double t, int deriv_order = 0) {
    if (deriv_order < 0 || deriv_order > 2) throw Error(ErrorCode::InvalidArgument, "deriv_order must be 0, 1 or 2");
    if (!(t >= spec.t_min() && t <= spec.t_max())) throw Error(ErrorCode::OutOfDomain, "t=" + std::to_string(t) + " outside basis domain");
    std::vector<double> out(static_cast<std::size_t>(spec.size), 0.0);
    if (deriv_order > spec.degree()) return out;
    int span = detail::find_span(spec, t);
    auto ders = detail::ders_basis(spec, span, t, deriv_order);
    int first = span - spec.degree();
    for (int j = 0; j <= spec.degree(); ++j)
        out[static_cast<std::size_t>(first + j)] = ders[static_cast<std::size_t>(deriv_order)][static_cast<std::size_t>(j)];
    return out;
}

/// Gram matrix R_kl = integral of phi_k^(r) phi_l^(r) over the domain, row-major
/// K x K, by Gauss-Legendre on every knot span (exact for splines of order <= 6).
inline std::vector<double> penalty_gram(const BasisSpec& spec, int deriv_order = 2) {
    static constexpr std::array<double, 5> gx{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
    static constexpr std::array<double, 5> gw{0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                                              0.2369268850561891};
    const auto K = static_cast<std::size_t>(spec.size);
    std::vector<double> gram(K * K, 0.0);
    for (std::size_t s = 0; s + 1 < spec.knots.size(); ++s) {
        double a = spec.knots[s], b = spec.knots[s + 1];
        if (!(b > a)) continue;
        double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        for (std::size_t q = 0; q < gx.size(); ++q) {
            auto d = eval_basis(spec, mid + half * gx[q], deriv_order);
            double w = half * gw[q];
            for (std::size_t k = 0; k < K; ++k) {
                if (d[k] == 0.0) continue;
                for (std::size_t l = k; l < K; ++l) gram[k * K + l] += w * d[k] * d[l];
            }
        }
    }
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t l = 0; l < k; ++l) gram[k * K + l] = gram[l * K + k];
    return gram;
}

/// Uniform trapezoid grid on [0, t_max].
class QuadratureGrid {
public:
    QuadratureGrid() : QuadratureGrid(90.0, 361) {}

    QuadratureGrid(double t_max, std::size_t points) : t_max_(t_max) {
        if (points < 2) throw Error(ErrorCode::InvalidArgument, "quadrature grid needs at least 2 nodes");
        if (!(t_max > 0)) throw Error(ErrorCode::InvalidArgument, "domain length must be positive");
        nodes_.resize(points);
        weights_.resize(points);
        step_ = t_max / static_cast<double>(points - 1);
        for (std::size_t i = 0; i < points; ++i) {
            nodes_[i] = t_max * static_cast<double>(i) / static_cast<double>(points - 1);
            weights_[i] = step_;
        }
        nodes_.back() = t_max;
        weights_.front() = weights_.back() = 0.5 * step_;
    }

    const std::vector<double>& nodes() const noexcept { return nodes_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    double t_max() const noexcept { return t_max_; }
    double step() const noexcept { return step_; }

    /// Index a with nodes[a] <= t <= nodes[a+1].
    std::size_t interval(double t) const {
        if (t >= t_max_) return nodes_.size() - 2;
        auto a = static_cast<std::size_t>(t / step_);
        if (a > nodes_.size() - 2) a = nodes_.size() - 2;
        while (a > 0 && nodes_[a] > t) --a;
        while (a + 2 < nodes_.size() && nodes_[a + 1] <= t) ++a;
        return a;
    }

    /// Node index equal to t, if t is a node (within 1e-9 days).
    std::optional<std::size_t> node_index(double t) const {
        if (t < -1e-9 || t > t_max_ + 1e-9) return std::nullopt;
        double pos = t / step_;
        double r = std::round(pos);
        if (std::abs(pos - r) * step_ > 1e-9) return std::nullopt;
        return static_cast<std::size_t>(r);
    }

    friend bool operator==(const QuadratureGrid& a, const QuadratureGrid& b) {
        return a.t_max_ == b.t_max_ && a.nodes_.size() == b.nodes_.size();
    }

private:
    double t_max_;
    double step_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

/// Trapezoid integral over the full grid.
inline double integrate(std::span<const double> values, const QuadratureGrid& grid) {
    if (values.size() != grid.size())
        throw Error(ErrorCode::LengthMismatch, std::to_string(values.size()) + " values for " + std::to_string(grid.size()) + " nodes");
    double s = 0.0;
    const auto& w = grid.weights();
    for (std::size_t i = 0; i < values.size(); ++i) s += w[i] * values[i];
    return s;
}

/// Running trapezoid integral; out[0] = 0, out.back() = integrate(values).
inline std::vector<double> cumulative_integrate(std::span<const double> values, const QuadratureGrid& grid) {
    if (values.size() != grid.size())
        throw Error(ErrorCode::LengthMismatch, std::to_string(values.size()) + " values for " + std::to_string(grid.size()) + " nodes");
    std::vector<double> out(values.size(), 0.0);
    const auto& t = grid.nodes();
    for (std::size_t i = 1; i < values.size(); ++i) out[i] = out[i - 1] + 0.5 * (t[i] - t[i - 1]) * (values[i - 1] + values[i]);
    return out;
}

}  // namespace discfda
