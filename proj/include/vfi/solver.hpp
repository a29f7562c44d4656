#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vfi/core.hpp"
#include "vfi/problem.hpp"
#include "vfi/quadrature.hpp"
#include "vfi/semigroup.hpp"

namespace vfi {

/// Outcome of a Picard run.  `step_history[m]` is the Bielecki distance
/// between iterates m and m+1; non-convergence still returns the last
/// iterate with `converged` false.
struct SolveResult {
    Trajectory solution;
    std::size_t iterations = 0;
    double final_step_norm = 0.0;
    double gamma_used = 0.0;
    bool converged = false;
    std::vector<double> step_history;
};

/// Defect and residual measurements for a candidate trajectory.  The
/// integral part compares against the mild operator; the derivative part is
/// the finite-difference residual of the differential form, never
/// differentiated across an impulse.  Jump-condition violation is tracked
/// separately and does not enter the derivative residual.
struct ResidualReport {
    double integral_defect_sup = 0.0;
    double derivative_residual_sup = 0.0;
    double jump_violation_sup = 0.0;
    double fd_truncation_estimate = 0.0;
    std::vector<double> per_node_defect;
    std::vector<double> per_node_residual;
};

/// The mild-solution operator R of the impulsive integral equation:
///
///   R(w)(tau) = T(tau) w0
///             + int_0^tau T(tau-sigma) G(sigma, w, int_0^sigma F1, int_0^b F2) dsigma
///             + sum_{0 < tau_k < tau} T(tau-tau_k) I_k(w(tau_k))
///
/// realized on a fixed grid.  The outer integral is accumulated with the
/// one-step recurrence R(tau_{i+1}) = e^{A h}(...) so each sweep costs one
/// small matrix-vector product per node; the nested Volterra and Fredholm
/// samples are recomputed from the current iterate every sweep.  Per-panel
/// step exponentials are built once and reused bit-identically.
class MildOperator {
public:
    MildOperator(const ProblemSpec& p, GridPtr grid)
        : p_(&p), grid_(std::move(grid)) {
        if (grid_->schedule().times() != p.schedule().times())
            throw GridMismatch("grid was not built from the problem's impulse schedule");
        if (grid_->horizon() != p.horizon())
            throw GridMismatch("grid horizon differs from the problem horizon");
        build_propagators();
    }

    const GridPtr& grid() const { return grid_; }

    /// Initial Picard iterate w_0(tau) = T(tau) w0 (no jumps).
    Trajectory initial_iterate() const {
        const Grid& g = *grid_;
        Trajectory out(grid_, p_->dim());
        Vector s = p_->initial_state();
        out.set(0, s);
        for (std::size_t i = 0; i + 1 < g.size(); ++i) {
            s = edge_exp_[i] * s;
            out.set(i + 1, s);
        }
        out.make_continuous();
        return out;
    }

    Trajectory apply(const Trajectory& w) const {
        const Grid& g = *grid_;
        if (!w.grid().same_nodes(g)) throw GridMismatch("input trajectory grid mismatch");
        const std::size_t N = g.size();
        const int d = p_->dim();

        Matrix volterra(d, N), fredholm(d, N);
        sample_integral_terms(w, volterra, fredholm);

        // G samples; columns [0, N) are left values, a second block holds
        // right-side samples at impulse nodes.
        Matrix g_left(d, N);
        Matrix g_right(d, std::max<std::size_t>(std::size_t{1}, g.impulse_count()));
        for (std::size_t i = 0; i < N; ++i)
            eval_g_into(g.node(i), w.values().col(i), volterra.col(i), fredholm.col(i),
                        g_left.col(i));
        for (std::size_t k = 0; k < g.impulse_count(); ++k) {
            const std::size_t i = g.impulse_node(k);
            eval_g_into(g.node(i), w.right_limits().col(k), volterra.col(i),
                        fredholm.col(i), g_right.col(k));
        }

        Trajectory out(grid_, d);
        Vector s = p_->initial_state();
        out.set(0, s);
        for (std::size_t i = 0; i + 1 < N; ++i) {
            const double h = g.node(i + 1) - g.node(i);
            const std::size_t k = g.impulse_at_node(i);
            Vector carry = s;
            Vector g_open;
            if (k != Grid::npos) {
                carry += p_->eval_impulse(k, w.at(i));
                g_open = g_right.col(k);
            } else {
                g_open = g_left.col(i);
            }
            s = edge_exp_[i] * carry +
                (0.5 * h) * (edge_exp_[i] * g_open + g_left.col(i + 1));
            out.set(i + 1, s);
        }
        for (std::size_t k = 0; k < g.impulse_count(); ++k) {
            const std::size_t i = g.impulse_node(k);
            out.set_right_limit(k, out.at(i) + p_->eval_impulse(k, w.at(i)));
        }
        return out;
    }

    /// Volterra term int_0^sigma_i F1(sigma_i, s, w(s)) ds and Fredholm term
    /// int_0^b F2(sigma_i, s, w(s)) ds for every node i.  When a kernel does
    /// not reference tau the sweep degenerates to prefix sums (Volterra) or
    /// a single shared integral (Fredholm), numerically identical to the
    /// per-node quadrature.
    void sample_integral_terms(const Trajectory& w, Matrix& volterra, Matrix& fredholm) const {
        const Grid& g = *grid_;
        const std::size_t N = g.size();
        const int d = p_->dim();

        Matrix fl(d, N);  // kernel samples at left values
        Matrix fr(d, std::max<std::size_t>(std::size_t{1}, g.impulse_count()));

        if (!p_->f1_uses_tau()) {
            sample_kernel_columns(p_->f1_exprs(), 0.0, w, fl, fr);
            prefix_integral(fl, fr, volterra);
        } else {
            for (std::size_t i = 0; i < N; ++i) {
                const double tau = g.node(i);
                sample_kernel_columns(p_->f1_exprs(), tau, w, fl, fr, i);
                volterra.col(i) = edge_sum(fl, fr, 0, i);
            }
        }

        if (!p_->f2_uses_tau()) {
            sample_kernel_columns(p_->f2_exprs(), 0.0, w, fl, fr);
            const Vector total = edge_sum(fl, fr, 0, N - 1);
            for (std::size_t i = 0; i < N; ++i) fredholm.col(i) = total;
        } else {
            for (std::size_t i = 0; i < N; ++i) {
                const double tau = g.node(i);
                sample_kernel_columns(p_->f2_exprs(), tau, w, fl, fr, N - 1);
                fredholm.col(i) = edge_sum(fl, fr, 0, N - 1);
            }
        }
    }

private:
    void build_propagators() {
        const Grid& g = *grid_;
        edge_exp_.clear();
        edge_exp_.reserve(g.size() - 1);
        // steps are uniform within a panel, so one exponential per panel
        const auto& bounds = g.panel_bounds();
        std::size_t panel = 0;
        Matrix current;
        double current_h = -1.0;
        for (std::size_t i = 0; i + 1 < g.size(); ++i) {
            while (i >= bounds[panel + 1]) ++panel;
            const double h = g.node(i + 1) - g.node(i);
            if (h != current_h) {
                current = matrix_exponential(p_->generator(), h);
                current_h = h;
            }
            edge_exp_.push_back(current);
        }
    }

    void eval_g_into(double tau, Eigen::Ref<const Vector> w, Eigen::Ref<const Vector> y1,
                     Eigen::Ref<const Vector> y2, Eigen::Ref<Vector> out) const {
        EvalEnv env;
        env.with_tau(tau).with_horizon(p_->horizon())
            .with_w(w.data()).with_y1(y1.data()).with_y2(y2.data());
        const auto& es = p_->g_exprs();
        try {
            for (int c = 0; c < p_->dim(); ++c)
                out(c) = es[static_cast<std::size_t>(c)].eval(env);
        } catch (const Error& ex) {
            throw EvalError("G evaluation failed at tau=" + std::to_string(tau) + ": " +
                            ex.what());
        }
    }

    /// Samples kernel(tau, sigma_j, w(sigma_j)) into fl (left values) and fr
    /// (right limits at impulse nodes), for sigma_j up to node `hi`.
    void sample_kernel_columns(const std::vector<Expr>& kernel, double tau,
                               const Trajectory& w, Matrix& fl, Matrix& fr,
                               std::size_t hi = static_cast<std::size_t>(-1)) const {
        const Grid& g = *grid_;
        const std::size_t last = hi == static_cast<std::size_t>(-1) ? g.size() - 1 : hi;
        const int d = p_->dim();
        EvalEnv env;
        env.with_tau(tau).with_horizon(p_->horizon());
        for (std::size_t j = 0; j <= last; ++j) {
            env.with_sigma(g.node(j)).with_w(w.values().col(j).data());
            try {
                for (int c = 0; c < d; ++c)
                    fl(c, static_cast<Eigen::Index>(j)) =
                        kernel[static_cast<std::size_t>(c)].eval(env);
            } catch (const Error& ex) {
                throw KernelEvalError(tau, g.node(j), ex.what());
            }
        }
        for (std::size_t k = 0; k < g.impulse_count(); ++k) {
            const std::size_t j = g.impulse_node(k);
            if (j > last) continue;
            env.with_sigma(g.node(j)).with_w(w.right_limits().col(k).data());
            try {
                for (int c = 0; c < d; ++c)
                    fr(c, static_cast<Eigen::Index>(k)) =
                        kernel[static_cast<std::size_t>(c)].eval(env);
            } catch (const Error& ex) {
                throw KernelEvalError(tau, g.node(j), ex.what());
            }
        }
    }

    /// Trapezoid over [node lo, node hi] with right limits opening edges.
    Vector edge_sum(const Matrix& fl, const Matrix& fr, std::size_t lo, std::size_t hi) const {
        const Grid& g = *grid_;
        Vector acc = Vector::Zero(fl.rows());
        for (std::size_t i = lo; i < hi; ++i) {
            const double h = g.node(i + 1) - g.node(i);
            const std::size_t k = g.impulse_at_node(i);
            const auto open = (k != Grid::npos) ? fr.col(static_cast<Eigen::Index>(k))
                                                : fl.col(static_cast<Eigen::Index>(i));
            acc += (0.5 * h) * (open + fl.col(static_cast<Eigen::Index>(i + 1)));
        }
        return acc;
    }

    /// All prefixes of edge_sum in one left-to-right pass (same summation
    /// order, hence the same floating-point values).
    void prefix_integral(const Matrix& fl, const Matrix& fr, Matrix& out) const {
        const Grid& g = *grid_;
        Vector acc = Vector::Zero(fl.rows());
        out.col(0) = acc;
        for (std::size_t i = 0; i + 1 < g.size(); ++i) {
            const double h = g.node(i + 1) - g.node(i);
            const std::size_t k = g.impulse_at_node(i);
            const auto open = (k != Grid::npos) ? fr.col(static_cast<Eigen::Index>(k))
                                                : fl.col(static_cast<Eigen::Index>(i));
            acc += (0.5 * h) * (open + fl.col(static_cast<Eigen::Index>(i + 1)));
            out.col(static_cast<Eigen::Index>(i + 1)) = acc;
        }
    }

    const ProblemSpec* p_;
    GridPtr grid_;
    std::vector<Matrix> edge_exp_;  // e^{A (tau_{i+1}-tau_i)} per edge
};

/// R(w) as a standalone operation.
inline Trajectory apply_mild_operator(const ProblemSpec& p, const Trajectory& w) {
    return MildOperator(p, w.grid_ptr()).apply(w);
}

/// Picard iteration w_{m+1} = R(w_m) from an explicit starting trajectory,
/// stopping when the Bielecki(gamma) step norm falls to `tol`.
inline SolveResult picard_solve_from(const ProblemSpec& p, GridPtr grid, Trajectory start,
                                     double gamma, double tol, std::size_t max_iter) {
    if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
    if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
    if (max_iter == 0) throw InvalidArgument("max_iter must be at least 1");

    const MildOperator op(p, std::move(grid));
    const NormKind step_norm = NormKind::bielecki(gamma);

    SolveResult result{std::move(start)};
    result.gamma_used = gamma;
    for (std::size_t m = 0; m < max_iter; ++m) {
        Trajectory next = op.apply(result.solution);
        const double step = traj_distance(next, result.solution, step_norm);
        result.solution = std::move(next);
        result.step_history.push_back(step);
        result.iterations = m + 1;
        result.final_step_norm = step;
        if (step <= tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

/// Picard iteration from the canonical initial iterate w_0(tau) = T(tau) w0.
inline SolveResult picard_solve(const ProblemSpec& p, GridPtr grid, double gamma,
                                double tol, std::size_t max_iter) {
    MildOperator op(p, grid);
    return picard_solve_from(p, std::move(grid), op.initial_iterate(), gamma, tol, max_iter);
}

/// Per-node ||w - R(w)|| and its sup (the integral-equation defect).
inline ResidualReport integral_defect(const ProblemSpec& p, const Trajectory& w) {
    const Trajectory r = apply_mild_operator(p, w);
    const Grid& g = w.grid();
    ResidualReport report;
    report.per_node_defect.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        double d = (w.at(i) - r.at(i)).norm();
        const std::size_t k = g.impulse_at_node(i);
        if (k != Grid::npos) {
            const auto c = static_cast<Eigen::Index>(k);
            d = std::max(d, (w.right_limits().col(c) - r.right_limits().col(c)).norm());
        }
        report.per_node_defect[i] = d;
        report.integral_defect_sup = std::max(report.integral_defect_sup, d);
    }
    return report;
}

namespace detail {

/// Derivative of the quadratic through (x0,f0),(x1,f1),(x2,f2) at x.
inline Vector lagrange3_derivative(double x0, double x1, double x2, const Vector& f0,
                                   const Vector& f1, const Vector& f2, double x) {
    const double c0 = (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2));
    const double c1 = (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2));
    const double c2 = (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1));
    return c0 * f0 + c1 * f1 + c2 * f2;
}

}  // namespace detail

/// Finite-difference residual ||w' - A w - G(...)|| measured per panel:
/// central stencils strictly inside a panel, one-sided second-order stencils
/// at panel endpoints, never differentiating across an impulse.  The sup is
/// the measured epsilon of an epsilon-approximate solution; the jump
/// condition is checked separately into `jump_violation_sup`.
inline ResidualReport derivative_residual(const ProblemSpec& p, const Trajectory& w) {
    const Grid& g = w.grid();
    const std::size_t N = g.size();
    const MildOperator op(p, w.grid_ptr());

    Matrix volterra(p.dim(), N), fredholm(p.dim(), N);
    op.sample_integral_terms(w, volterra, fredholm);

    ResidualReport report;
    report.per_node_residual.assign(N, 0.0);

    const auto& bounds = g.panel_bounds();
    for (std::size_t panel = 0; panel + 1 < bounds.size(); ++panel) {
        const std::size_t lo = bounds[panel], hi = bounds[panel + 1];
        if (hi - lo + 1 < 3)
            throw InsufficientResolution("panel " + std::to_string(panel) +
                                         " has fewer than 3 nodes");
        // panel-local samples: the opening node uses the right limit
        const auto value_at = [&](std::size_t i) -> Vector {
            return (i == lo) ? w.at(i, Side::Right) : w.at(i);
        };
        double w3 = 0.0;  // third-difference estimate of |w'''| for the truncation report
        for (std::size_t i = lo; i <= hi; ++i) {
            std::size_t s0, s1, s2;
            if (i == lo) { s0 = lo; s1 = lo + 1; s2 = lo + 2; }
            else if (i == hi) { s0 = hi - 2; s1 = hi - 1; s2 = hi; }
            else { s0 = i - 1; s1 = i; s2 = i + 1; }
            const Vector dw = detail::lagrange3_derivative(
                g.node(s0), g.node(s1), g.node(s2), value_at(s0), value_at(s1),
                value_at(s2), g.node(i));
            const Vector wi = value_at(i);
            const Vector gi = p.eval_g(g.node(i), wi, volterra.col(i), fredholm.col(i));
            const double r = (dw - p.generator().matrix() * wi - gi).norm();
            report.per_node_residual[i] = std::max(report.per_node_residual[i], r);
            report.derivative_residual_sup = std::max(report.derivative_residual_sup, r);
        }
        for (std::size_t i = lo; i + 3 <= hi; ++i) {
            const double h = g.node(i + 1) - g.node(i);
            const Vector d3 = value_at(i + 3) - 3.0 * value_at(i + 2) +
                              3.0 * value_at(i + 1) - value_at(i);
            w3 = std::max(w3, d3.norm() / (h * h * h));
            report.fd_truncation_estimate =
                std::max(report.fd_truncation_estimate, h * h * w3 / 3.0);
        }
    }

    for (std::size_t k = 0; k < g.impulse_count(); ++k) {
        const std::size_t i = g.impulse_node(k);
        const Vector jump = w.at(i, Side::Right) - w.at(i);
        const double v = (jump - p.eval_impulse(k, w.at(i))).norm();
        report.jump_violation_sup = std::max(report.jump_violation_sup, v);
    }
    return report;
}

/// Both measurements in one report.
inline ResidualReport measure_residuals(const ProblemSpec& p, const Trajectory& w) {
    ResidualReport report = integral_defect(p, w);
    const ResidualReport deriv = derivative_residual(p, w);
    report.derivative_residual_sup = deriv.derivative_residual_sup;
    report.jump_violation_sup = deriv.jump_violation_sup;
    report.fd_truncation_estimate = deriv.fd_truncation_estimate;
    report.per_node_residual = deriv.per_node_residual;
    return report;
}

}  // namespace vfi
