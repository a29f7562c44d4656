#pragma once

#include <cstddef>
#include <functional>
#include <utility>

#include "vfi/core.hpp"
#include "vfi/errors.hpp"

namespace vfi {

/// Composite trapezoidal integral of a sampled function over [node lo, node
/// hi].  Every edge that opens at an impulse node starts from the stored
/// right limit and every edge closes on a left value, so jumps are split
/// exactly instead of being smeared across a panel.
inline Vector integrate_samples(const Trajectory& f, std::size_t lo, std::size_t hi) {
    const Grid& g = f.grid();
    if (lo > hi || hi >= g.size()) throw GridMismatch("integration bounds are not grid nodes");
    Vector acc = Vector::Zero(f.dim());
    for (std::size_t i = lo; i < hi; ++i) {
        const double h = g.node(i + 1) - g.node(i);
        const std::size_t k = g.impulse_at_node(i);
        const auto open = (k != Grid::npos)
                              ? f.right_limits().col(static_cast<Eigen::Index>(k))
                              : f.at(i);
        acc += (0.5 * h) * (open + f.at(i + 1));
    }
    return acc;
}

/// Time-addressed convenience overload; throws GridMismatch for off-grid times.
inline Vector integrate_samples(const Trajectory& f, double lo, double hi) {
    const Grid& g = f.grid();
    return integrate_samples(f, g.index_of(lo), g.index_of(hi));
}

/// Integral kernel for either the running Volterra term or the whole-horizon
/// Fredholm term of the nonlinearity.
struct KernelFn {
    enum class Arity { Volterra, Fredholm };

    Arity tag;
    std::function<Vector(double tau, double sigma, const Vector& state)> evaluator;

    Vector eval(double tau, double sigma, const Vector& state) const {
        try {
            return evaluator(tau, sigma, state);
        } catch (const KernelEvalError&) {
            throw;
        } catch (const std::exception& ex) {
            throw KernelEvalError(tau, sigma, ex.what());
        }
    }
};

namespace detail {

/// Samples sigma -> k(tau, sigma, w(sigma)) over nodes [0, hi] into a
/// trajectory-shaped buffer so integrate_samples sees the jump structure.
inline Trajectory sample_kernel(const KernelFn& k, const Trajectory& w, double tau,
                                std::size_t hi) {
    Trajectory f(w.grid_ptr(), w.dim());
    const Grid& g = w.grid();
    for (std::size_t j = 0; j <= hi; ++j)
        f.set(j, k.eval(tau, g.node(j), w.at(j)));
    for (std::size_t q = 0; q < g.impulse_count(); ++q) {
        const std::size_t i = g.impulse_node(q);
        if (i <= hi)
            f.set_right_limit(q, k.eval(tau, g.node(i), w.at(i, Side::Right)));
        else
            f.set_right_limit(q, Vector::Zero(w.dim()));
    }
    return f;
}

}  // namespace detail

/// Running integral of F1: int_0^tau F1(tau, sigma, w(sigma)) dsigma.
inline Vector volterra_term(const KernelFn& k, const Trajectory& w, std::size_t tau_index) {
    if (k.tag != KernelFn::Arity::Volterra)
        throw InvalidArgument("volterra_term requires a volterra-tagged kernel");
    if (tau_index >= w.size()) throw GridMismatch("tau is not a grid node");
    const double tau = w.grid().node(tau_index);
    if (tau_index == 0) return Vector::Zero(w.dim());
    const Trajectory f = detail::sample_kernel(k, w, tau, tau_index);
    return integrate_samples(f, std::size_t{0}, tau_index);
}

/// Whole-horizon integral of F2: int_0^b F2(tau, sigma, w(sigma)) dsigma,
/// independent of where tau sits.
inline Vector fredholm_term(const KernelFn& k, const Trajectory& w, std::size_t tau_index) {
    if (k.tag != KernelFn::Arity::Fredholm)
        throw InvalidArgument("fredholm_term requires a fredholm-tagged kernel");
    if (tau_index >= w.size()) throw GridMismatch("tau is not a grid node");
    const double tau = w.grid().node(tau_index);
    const std::size_t last = w.size() - 1;
    const Trajectory f = detail::sample_kernel(k, w, tau, last);
    return integrate_samples(f, std::size_t{0}, last);
}

}  // namespace vfi
