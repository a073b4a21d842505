/**
 * @file monotone_fit.hpp
 * @brief Strictly decreasing discount curves f(t) = 1 - e^gamma * int_0^t exp(w(u)) du
 *
 * w is an unconstrained cubic B-spline, so Df = -e^gamma exp(w) < 0 everywhere
 * and f(0) = 1 holds by construction. Coefficients (c, gamma) are estimated by
 * penalized least squares with a damped Gauss-Newton iteration.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "basis_quad.hpp"
#include "discount_core.hpp"
#include "error.hpp"

namespace discfda {

struct FitConfig {
    double lambda = 0.1;  // weight of int (w'')^2
    int max_iters = 200;
    double rel_tol = 1e-8;
    double gamma_floor = -20.0;
    std::size_t grid_points = 361;

    void check() const {
        if (!(lambda >= 0)) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
        if (max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");
        if (!(rel_tol > 0)) throw Error(ErrorCode::InvalidArgument, "rel_tol must be > 0");
        if (grid_points < 2) throw Error(ErrorCode::InvalidArgument, "grid_points must be >= 2");
    }
};

struct FittedCurve {
    BasisSpec basis;
    std::vector<double> coeffs;  // c_k of w(u) = sum c_k phi_k(u)
    double b0 = 1.0;
    double gamma = 0.0;          // b1 = -exp(gamma)
    QuadratureGrid grid;
    std::vector<double> values;  // f on grid nodes
    std::vector<double> deriv1;  // Df
    std::vector<double> deriv2;  // D2f
    std::vector<double> log_slope;   // w on grid nodes
    std::vector<double> cumulative;  // int_0^t exp(w) on grid nodes
    bool near_constant = false;

    double b1() const { return -std::exp(gamma); }
};

struct FitDiagnostics {
    std::vector<double> residuals;  // fitted - observed, per horizon
    double rmse = 0.0;
    double max_abs_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    double objective = 0.0;
    std::vector<double> objective_trace;  // one entry per accepted iterate, starting with the initial point
    bool degenerate_flat = false;
};

struct FitResult {
    FittedCurve curve;
    FitDiagnostics diagnostics;
};

/// Penalized least-squares objective for one respondent, with everything that
/// does not depend on (c, gamma) precomputed.
class MonotoneObjective {
public:
    MonotoneObjective(const DiscountSamples& samples, const BasisSpec& basis, const FitConfig& cfg)
        : basis_(basis), grid_(basis.t_max(), cfg.grid_points), lambda_(cfg.lambda) {
        cfg.check();
        const std::size_t n_nodes = grid_.size();
        const auto K = static_cast<Eigen::Index>(basis.size);
        node_basis_.resize(static_cast<Eigen::Index>(n_nodes), K);
        for (std::size_t i = 0; i < n_nodes; ++i) {
            auto row = eval_basis(basis, grid_.nodes()[i], 0);
            for (Eigen::Index k = 0; k < K; ++k) node_basis_(static_cast<Eigen::Index>(i), k) = row[static_cast<std::size_t>(k)];
        }
        auto gram = penalty_gram(basis, 2);
        penalty_.resize(K, K);
        for (Eigen::Index k = 0; k < K; ++k)
            for (Eigen::Index l = 0; l < K; ++l) penalty_(k, l) = gram[static_cast<std::size_t>(k * K + l)];

        for (std::size_t j = 0; j < samples.values.size(); ++j) {
            double t = samples.grid[j];
            if (t < 0 || t > grid_.t_max()) throw Error(ErrorCode::OutOfDomain, "horizon outside fitting domain");
            observations_.push_back(make_observation(t));
            targets_.push_back(samples.values[j]);
        }
    }

    Eigen::Index dim() const { return node_basis_.cols() + 1; }
    std::size_t n_obs() const { return targets_.size(); }
    const QuadratureGrid& grid() const { return grid_; }
    const BasisSpec& basis() const { return basis_; }

    /// Fitted minus observed at each horizon.
    Eigen::VectorXd residuals(const Eigen::VectorXd& point) const {
        auto c = point.head(dim() - 1);
        double scale = std::exp(point(dim() - 1));
        Eigen::VectorXd r(static_cast<Eigen::Index>(n_obs()));
        for (std::size_t j = 0; j < n_obs(); ++j) {
            const auto& ob = observations_[j];
            double integral = (ob.weights.array() * (ob.rows * c).array().exp()).sum();
            r(static_cast<Eigen::Index>(j)) = 1.0 - scale * integral - targets_[j];
        }
        return r;
    }

    Eigen::MatrixXd jacobian(const Eigen::VectorXd& point) const {
        auto c = point.head(dim() - 1);
        double scale = std::exp(point(dim() - 1));
        Eigen::MatrixXd J(static_cast<Eigen::Index>(n_obs()), dim());
        for (std::size_t j = 0; j < n_obs(); ++j) {
            const auto& ob = observations_[j];
            Eigen::VectorXd we = ob.weights.array() * (ob.rows * c).array().exp();
            auto row = static_cast<Eigen::Index>(j);
            J.row(row).head(dim() - 1) = -scale * (ob.rows.transpose() * we).transpose();
            J(row, dim() - 1) = -scale * we.sum();
        }
        return J;
    }

    double value(const Eigen::VectorXd& point) const {
        auto c = point.head(dim() - 1);
        return residuals(point).squaredNorm() + lambda_ * c.dot(penalty_ * c);
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& point) const {
        Eigen::VectorXd g = 2.0 * jacobian(point).transpose() * residuals(point);
        g.head(dim() - 1) += 2.0 * lambda_ * penalty_ * point.head(dim() - 1);
        return g;
    }

    /// Gauss-Newton normal matrix (half-scale: J'J + lambda R).
    Eigen::MatrixXd normal_matrix(const Eigen::MatrixXd& J) const {
        Eigen::MatrixXd A = J.transpose() * J;
        A.topLeftCorner(dim() - 1, dim() - 1) += lambda_ * penalty_;
        return A;
    }

    /// Shifts w by its mean over the domain and compensates in gamma; the
    /// curve and the objective are unchanged.
    void center(Eigen::VectorXd& point) const {
        Eigen::VectorXd w = node_basis_ * point.head(dim() - 1);
        double mean = 0.0;
        for (std::size_t i = 0; i < grid_.size(); ++i) mean += grid_.weights()[i] * w(static_cast<Eigen::Index>(i));
        mean /= grid_.t_max();
        point.head(dim() - 1).array() -= mean;
        point(dim() - 1) += mean;
    }

    const Eigen::MatrixXd& node_basis() const { return node_basis_; }

private:
    // int_0^t exp(w) = sum_q weights_q exp(rows_q . c), matching the cumulative
    // trapezoid rule on the grid plus a partial-interval trapezoid increment.
    struct Observation {
        Eigen::MatrixXd rows;
        Eigen::VectorXd weights;
    };

    Observation make_observation(double t) const {
        const auto K = static_cast<Eigen::Index>(basis_.size);
        std::size_t last;
        double partial = 0.0;
        if (auto idx = grid_.node_index(t)) {
            last = *idx;
        } else {
            last = grid_.interval(t);
            partial = t - grid_.nodes()[last];
        }
        Eigen::Index q = static_cast<Eigen::Index>(last + 1) + (partial > 0 ? 1 : 0);
        Observation ob{Eigen::MatrixXd::Zero(q, K), Eigen::VectorXd::Zero(q)};
        for (std::size_t i = 0; i <= last; ++i) {
            ob.rows.row(static_cast<Eigen::Index>(i)) = node_basis_.row(static_cast<Eigen::Index>(i));
            if (last == 0) continue;
            double h_left = i > 0 ? grid_.nodes()[i] - grid_.nodes()[i - 1] : 0.0;
            double h_right = i < last ? grid_.nodes()[i + 1] - grid_.nodes()[i] : 0.0;
            ob.weights(static_cast<Eigen::Index>(i)) = 0.5 * (h_left + h_right);
        }
        if (partial > 0) {
            ob.weights(static_cast<Eigen::Index>(last)) += 0.5 * partial;
            auto row = eval_basis(basis_, t, 0);
            for (Eigen::Index k = 0; k < K; ++k) ob.rows(q - 1, k) = row[static_cast<std::size_t>(k)];
            ob.weights(q - 1) = 0.5 * partial;
        }
        return ob;
    }

    BasisSpec basis_;
    QuadratureGrid grid_;
    double lambda_;
    Eigen::MatrixXd node_basis_;
    Eigen::MatrixXd penalty_;
    std::vector<Observation> observations_;
    std::vector<double> targets_;
};

/// Builds a FittedCurve (with cached grid evaluations) from coefficients.
inline FittedCurve make_curve(const BasisSpec& basis, std::vector<double> coeffs, double gamma, std::size_t grid_points = 361) {
    if (coeffs.size() != static_cast<std::size_t>(basis.size))
        throw Error(ErrorCode::LengthMismatch, "coefficient count does not match basis size");
    FittedCurve curve;
    curve.basis = basis;
    curve.coeffs = std::move(coeffs);
    curve.gamma = gamma;
    curve.grid = QuadratureGrid(basis.t_max(), grid_points);
    const std::size_t n = curve.grid.size();
    curve.log_slope.resize(n);
    std::vector<double> slope_deriv(n), expw(n);
    for (std::size_t i = 0; i < n; ++i) {
        double t = curve.grid.nodes()[i];
        auto phi = eval_basis(basis, t, 0);
        auto dphi = eval_basis(basis, t, 1);
        double w = 0.0, dw = 0.0;
        for (std::size_t k = 0; k < phi.size(); ++k) {
            w += curve.coeffs[k] * phi[k];
            dw += curve.coeffs[k] * dphi[k];
        }
        curve.log_slope[i] = w;
        slope_deriv[i] = dw;
        expw[i] = std::exp(w);
    }
    curve.cumulative = cumulative_integrate(expw, curve.grid);
    double b1 = curve.b1();
    curve.values.resize(n);
    curve.deriv1.resize(n);
    curve.deriv2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        curve.values[i] = curve.b0 + b1 * curve.cumulative[i];
        curve.deriv1[i] = b1 * expw[i];
        curve.deriv2[i] = b1 * slope_deriv[i] * expw[i];
    }
    return curve;
}

/// f, Df or D2f at any t in [0, t_max]. Between nodes the cumulative
/// integral advances by a local trapezoid increment.
inline double eval_curve(const FittedCurve& curve, double t, int deriv_order = 0) {
    if (!(t >= 0.0 && t <= curve.grid.t_max())) throw Error(ErrorCode::OutOfDomain, "t=" + std::to_string(t) + " outside curve domain");
    if (deriv_order < 0 || deriv_order > 2) throw Error(ErrorCode::InvalidArgument, "deriv_order must be 0, 1 or 2");
    auto phi = eval_basis(curve.basis, t, 0);
    double w = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) w += curve.coeffs[k] * phi[k];
    double b1 = curve.b1();
    if (deriv_order == 1) return b1 * std::exp(w);
    if (deriv_order == 2) {
        auto dphi = eval_basis(curve.basis, t, 1);
        double dw = 0.0;
        for (std::size_t k = 0; k < dphi.size(); ++k) dw += curve.coeffs[k] * dphi[k];
        return b1 * dw * std::exp(w);
    }
    if (auto idx = curve.grid.node_index(t)) return curve.values[*idx];
    std::size_t a = curve.grid.interval(t);
    double ta = curve.grid.nodes()[a];
    double integral = curve.cumulative[a] + 0.5 * (t - ta) * (std::exp(curve.log_slope[a]) + std::exp(w));
    return curve.b0 + b1 * integral;
}

inline Eigen::VectorXd initial_point(const DiscountSamples& samples, const BasisSpec& basis) {
    Eigen::VectorXd point = Eigen::VectorXd::Zero(basis.size + 1);
    double min_value = *std::min_element(samples.values.begin(), samples.values.end());
    point(basis.size) = std::log(std::max(1e-6, (1.0 - min_value) / basis.t_max()));
    return point;
}

/// Analytic gradient of the penalized objective at (c, gamma).
inline Eigen::VectorXd objective_gradient(const DiscountSamples& samples, const BasisSpec& basis, const FitConfig& cfg,
                                          const Eigen::VectorXd& point) {
    return MonotoneObjective(samples, basis, cfg).gradient(point);
}

inline double objective_value(const DiscountSamples& samples, const BasisSpec& basis, const FitConfig& cfg,
                              const Eigen::VectorXd& point) {
    return MonotoneObjective(samples, basis, cfg).value(point);
}

inline FitResult fit_monotone_discount(const DiscountSamples& samples, const BasisSpec& basis, const FitConfig& cfg = FitConfig{}) {
    cfg.check();
    if (samples.values.size() != samples.grid.size()) throw Error(ErrorCode::LengthMismatch, "samples and grid differ in length");
    if (samples.grid.size() < 3) throw Error(ErrorCode::InvalidArgument, "at least 3 distinct horizons are required");
    if (samples.values.front() != 1.0) throw Error(ErrorCode::InvalidArgument, "samples must start at f(0) = 1");
    for (double v : samples.values)
        if (!(v > 0.0 && v <= 1.0)) throw Error(ErrorCode::DiscountAboveOne, "sample value outside (0, 1]");

    MonotoneObjective problem(samples, basis, cfg);
    FitDiagnostics diag;
    const Eigen::Index n = problem.dim();
    const Eigen::Index g_idx = n - 1;

    bool flat = std::all_of(samples.values.begin(), samples.values.end(), [](double v) { return v == 1.0; });
    Eigen::VectorXd point = initial_point(samples, basis);
    if (flat) {
        point.setZero();
        point(g_idx) = cfg.gamma_floor;
    }
    double objective = problem.value(point);
    diag.objective_trace.push_back(objective);

    bool clamped = flat;
    double last_rel_change = std::numeric_limits<double>::infinity();
    double damping = 1e-3;
    int iter = 0;
    auto try_point = [&](Eigen::VectorXd candidate, bool& hit_floor) {
        hit_floor = false;
        problem.center(candidate);
        if (candidate(g_idx) < cfg.gamma_floor) {
            candidate(g_idx) = cfg.gamma_floor;
            hit_floor = true;
        }
        return candidate;
    };

    if (!flat) {
        for (; iter < cfg.max_iters; ++iter) {
            Eigen::MatrixXd J = problem.jacobian(point);
            Eigen::VectorXd grad = problem.gradient(point);
            Eigen::VectorXd half_grad = 0.5 * grad;
            if (grad.cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + objective)) {
                last_rel_change = 0.0;
                break;
            }
            Eigen::MatrixXd A = problem.normal_matrix(J);
            double diag_scale = std::max(A.diagonal().maxCoeff(), 1e-300);

            bool accepted = false;
            bool hit_floor = false;
            Eigen::VectorXd next;
            double next_obj = objective;
            // damped Gauss-Newton with backtracking
            for (int attempt = 0; attempt < 8 && !accepted; ++attempt) {
                Eigen::MatrixXd M = A;
                M.diagonal().array() += damping * A.diagonal().array() + 1e-12 * diag_scale;
                Eigen::VectorXd step = M.ldlt().solve(-half_grad);
                if (!step.allFinite()) {
                    damping *= 10;
                    continue;
                }
                double alpha = 1.0;
                for (int ls = 0; ls < 20; ++ls, alpha *= 0.5) {
                    Eigen::VectorXd cand = try_point(point + alpha * step, hit_floor);
                    double cand_obj = problem.value(cand);
                    if (std::isfinite(cand_obj) && cand_obj < objective) {
                        next = std::move(cand);
                        next_obj = cand_obj;
                        accepted = true;
                        break;
                    }
                }
                if (accepted) {
                    damping = alpha == 1.0 ? std::max(damping / 3.0, 1e-12) : damping * 2.0;
                } else {
                    damping *= 10.0;
                }
            }
            if (!accepted) {
                // gradient fallback
                double gnorm = grad.norm();
                Eigen::VectorXd dir = -grad / gnorm;
                double alpha = 1.0;
                for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
                    Eigen::VectorXd cand = try_point(point + alpha * dir, hit_floor);
                    double cand_obj = problem.value(cand);
                    if (std::isfinite(cand_obj) && cand_obj < objective) {
                        next = std::move(cand);
                        next_obj = cand_obj;
                        accepted = true;
                        break;
                    }
                }
            }
            if (!accepted) {
                // no descent direction left at working precision
                last_rel_change = 0.0;
                break;
            }
            last_rel_change = (objective - next_obj) / std::max(objective, std::numeric_limits<double>::min());
            point = std::move(next);
            objective = next_obj;
            clamped = hit_floor;
            diag.objective_trace.push_back(objective);
            if (last_rel_change <= cfg.rel_tol) {
                double gtest = problem.gradient(point).cwiseAbs().maxCoeff();
                if (gtest <= 1e-9 * (1.0 + objective) || clamped) {
                    ++iter;
                    break;
                }
            }
        }
        if (iter >= cfg.max_iters && last_rel_change > cfg.rel_tol)
            throw Error(ErrorCode::NonConvergence, "no convergence after " + std::to_string(cfg.max_iters) + " iterations");
    }

    std::vector<double> coeffs(point.data(), point.data() + n - 1);
    FitResult result{make_curve(basis, std::move(coeffs), point(g_idx), cfg.grid_points), std::move(diag)};
    auto& d = result.diagnostics;
    d.iterations = iter;
    d.objective = objective;
    d.degenerate_flat = flat || clamped;
    result.curve.near_constant = d.degenerate_flat;
    Eigen::VectorXd grad = problem.gradient(point);
    d.converged = flat || clamped || grad.cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + objective) || last_rel_change <= cfg.rel_tol;

    Eigen::VectorXd r = problem.residuals(point);
    d.residuals.assign(r.data(), r.data() + r.size());
    double ss = 0.0;
    for (double e : d.residuals) {
        ss += e * e;
        d.max_abs_residual = std::max(d.max_abs_residual, std::abs(e));
    }
    d.rmse = std::sqrt(ss / static_cast<double>(d.residuals.size()));

    if (!(result.curve.values.back() > 0.0))
        throw Error(ErrorCode::PositivityViolation, "fitted f(t_max) = " + std::to_string(result.curve.values.back()));
    return result;
}

}  // namespace discfda
