#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vfi/errors.hpp"

namespace vfi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Ordered impulse instants tau_1 < ... < tau_n, all strictly inside (0, b).
/// The horizon b is problem data, so the (0, b) containment is checked when
/// a schedule meets a concrete horizon (see validate_for_horizon).
class ImpulseSchedule {
public:
    ImpulseSchedule() = default;

    explicit ImpulseSchedule(std::vector<double> times) : times_(std::move(times)) {
        for (std::size_t k = 0; k < times_.size(); ++k) {
            if (!std::isfinite(times_[k]) || times_[k] <= 0.0)
                throw InvalidSchedule("impulse times must be finite and positive");
            if (k > 0 && times_[k] <= times_[k - 1])
                throw InvalidSchedule("impulse times must be strictly increasing");
        }
    }

    const std::vector<double>& times() const { return times_; }
    std::size_t count() const { return times_.size(); }
    bool empty() const { return times_.empty(); }

    void validate_for_horizon(double b) const {
        if (!(b > 0.0)) throw InvalidArgument("horizon b must be positive");
        if (!times_.empty() && times_.back() >= b)
            throw InvalidSchedule("impulse time must lie in (0,b)");
    }

private:
    std::vector<double> times_;
};

/// Discretization of J = [0, b]: node 0 is 0, the last node is b, every
/// impulse time appears exactly as a node, and nodes never straddle an
/// impulse.  Panels are the closed intervals between consecutive impulse
/// boundaries (0, tau_1, ..., tau_n, b).
class Grid {
public:
    Grid(double b, ImpulseSchedule schedule, std::vector<double> nodes)
        : b_(b), schedule_(std::move(schedule)), nodes_(std::move(nodes)) {
        if (!(b_ > 0.0)) throw InvalidArgument("horizon b must be positive");
        schedule_.validate_for_horizon(b_);
        if (nodes_.size() < 2 || nodes_.front() != 0.0 || nodes_.back() != b_)
            throw InvalidArgument("grid nodes must run from 0 to b");
        for (std::size_t i = 1; i < nodes_.size(); ++i)
            if (!(nodes_[i] > nodes_[i - 1]))
                throw InvalidArgument("grid nodes must be strictly increasing");
        index_impulses();
    }

    double horizon() const { return b_; }
    const ImpulseSchedule& schedule() const { return schedule_; }
    const std::vector<double>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }
    double node(std::size_t i) const { return nodes_[i]; }

    std::size_t impulse_count() const { return schedule_.count(); }

    /// Node position of the k-th impulse time.
    std::size_t impulse_node(std::size_t k) const { return impulse_nodes_[k]; }
    const std::vector<std::size_t>& impulse_nodes() const { return impulse_nodes_; }

    /// Index into the schedule if node i is an impulse node, npos otherwise.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t impulse_at_node(std::size_t i) const { return node_to_impulse_[i]; }

    /// Panel boundaries as node indices: [0, i(tau_1), ..., i(tau_n), last].
    const std::vector<std::size_t>& panel_bounds() const { return panel_bounds_; }
    std::size_t panel_count() const { return panel_bounds_.size() - 1; }

    std::size_t index_of(double t) const {
        auto it = std::lower_bound(nodes_.begin(), nodes_.end(), t);
        if (it == nodes_.end() || *it != t)
            throw GridMismatch("time is not a grid node");
        return static_cast<std::size_t>(it - nodes_.begin());
    }

    bool same_nodes(const Grid& other) const {
        return this == &other ||
               (b_ == other.b_ && nodes_ == other.nodes_ &&
                impulse_nodes_ == other.impulse_nodes_);
    }

private:
    void index_impulses() {
        node_to_impulse_.assign(nodes_.size(), npos);
        panel_bounds_.clear();
        panel_bounds_.push_back(0);
        for (std::size_t k = 0; k < schedule_.count(); ++k) {
            const std::size_t i = index_of_or_throw(schedule_.times()[k]);
            impulse_nodes_.push_back(i);
            node_to_impulse_[i] = k;
            panel_bounds_.push_back(i);
        }
        panel_bounds_.push_back(nodes_.size() - 1);
        for (std::size_t p = 0; p + 1 < panel_bounds_.size(); ++p)
            if (panel_bounds_[p + 1] <= panel_bounds_[p])
                throw InvalidArgument("every panel needs at least two nodes");
    }

    std::size_t index_of_or_throw(double t) const {
        auto it = std::lower_bound(nodes_.begin(), nodes_.end(), t);
        if (it == nodes_.end() || *it != t)
            throw InvalidSchedule("impulse time missing from grid nodes");
        return static_cast<std::size_t>(it - nodes_.begin());
    }

    double b_;
    ImpulseSchedule schedule_;
    std::vector<double> nodes_;
    std::vector<std::size_t> impulse_nodes_;
    std::vector<std::size_t> node_to_impulse_;
    std::vector<std::size_t> panel_bounds_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Builds the union of impulse times and per-panel uniform subdivisions with
/// step <= h.  Each panel is subdivided independently, so no node straddles
/// an impulse and panel boundaries are hit exactly.
inline GridPtr make_grid(double b, const ImpulseSchedule& schedule, double h) {
    if (!(b > 0.0)) throw InvalidArgument("horizon b must be positive");
    if (!(h > 0.0)) throw InvalidArgument("target step h must be positive");
    schedule.validate_for_horizon(b);

    std::vector<double> bounds;
    bounds.push_back(0.0);
    for (double t : schedule.times()) bounds.push_back(t);
    bounds.push_back(b);

    std::vector<double> nodes;
    nodes.push_back(0.0);
    for (std::size_t p = 0; p + 1 < bounds.size(); ++p) {
        const double lo = bounds[p];
        const double hi = bounds[p + 1];
        const double len = hi - lo;
        const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil(len / h - 1e-12)));
        const double step = len / static_cast<double>(m);
        for (std::size_t j = 1; j < m; ++j)
            nodes.push_back(lo + step * static_cast<double>(j));
        nodes.push_back(hi);  // boundary exact, never lo + m*step
    }
    return std::make_shared<Grid>(b, schedule, std::move(nodes));
}

/// Which side of an impulse node a sample belongs to.  Non-impulse nodes
/// only have a Left value.
enum class Side { Left, Right };

/// Piecewise-continuous vector-valued function sampled on a grid: one state
/// per node (the left-limit value at impulse nodes) plus one stored right
/// limit per impulse time.
class Trajectory {
public:
    Trajectory(GridPtr grid, Eigen::Index dim)
        : grid_(std::move(grid)),
          values_(Matrix::Zero(dim, static_cast<Eigen::Index>(grid_->size()))),
          right_limits_(Matrix::Zero(dim, static_cast<Eigen::Index>(grid_->impulse_count()))) {
        if (dim <= 0) throw InvalidArgument("state dimension must be positive");
    }

    const GridPtr& grid_ptr() const { return grid_; }
    const Grid& grid() const { return *grid_; }
    Eigen::Index dim() const { return values_.rows(); }
    std::size_t size() const { return grid_->size(); }

    Matrix& values() { return values_; }
    const Matrix& values() const { return values_; }
    Matrix& right_limits() { return right_limits_; }
    const Matrix& right_limits() const { return right_limits_; }

    /// Left evaluation at node i (the value of w(tau_i)).
    auto at(std::size_t i) const { return values_.col(static_cast<Eigen::Index>(i)); }

    /// Evaluation honoring the impulse side: at a non-impulse node both
    /// sides agree; at an impulse node Right returns the stored limit.
    Vector at(std::size_t i, Side side) const {
        const std::size_t k = grid_->impulse_at_node(i);
        if (side == Side::Right && k != Grid::npos)
            return right_limits_.col(static_cast<Eigen::Index>(k));
        return values_.col(static_cast<Eigen::Index>(i));
    }

    void set(std::size_t i, const Vector& v) {
        values_.col(static_cast<Eigen::Index>(i)) = v;
    }
    void set_right_limit(std::size_t k, const Vector& v) {
        right_limits_.col(static_cast<Eigen::Index>(k)) = v;
    }

    /// Copies every left value into the corresponding right limit
    /// (a continuous trajectory has no jumps).
    void make_continuous() {
        for (std::size_t k = 0; k < grid_->impulse_count(); ++k)
            right_limits_.col(static_cast<Eigen::Index>(k)) =
                values_.col(static_cast<Eigen::Index>(grid_->impulse_node(k)));
    }

private:
    GridPtr grid_;
    Matrix values_;        // d x N, left values
    Matrix right_limits_;  // d x n, w(tau_k^+)
};

/// Norm selector: piece-wise Bielecki sup ||w(tau)|| e^{-gamma tau}, or the
/// piece-wise Chebyshev sup ||w(tau)||.
struct NormKind {
    enum class Kind { Bielecki, Chebyshev };

    static NormKind bielecki(double gamma) {
        if (!(gamma > 0.0)) throw InvalidArgument("Bielecki weight gamma must be positive");
        return NormKind{Kind::Bielecki, gamma};
    }
    static NormKind chebyshev() { return NormKind{Kind::Chebyshev, 0.0}; }

    double weight(double tau) const {
        return kind == Kind::Bielecki ? std::exp(-gamma * tau) : 1.0;
    }

    Kind kind;
    double gamma;
};

/// Supremum over all node values and all stored right limits; the vector
/// norm is Euclidean.
inline double norm(const Trajectory& w, const NormKind& kind) {
    const Grid& g = w.grid();
    double sup = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        sup = std::max(sup, w.at(i).norm() * kind.weight(g.node(i)));
    for (std::size_t k = 0; k < g.impulse_count(); ++k) {
        const double tau = g.node(g.impulse_node(k));
        const double v = w.right_limits().col(static_cast<Eigen::Index>(k)).norm();
        sup = std::max(sup, v * kind.weight(tau));
    }
    return sup;
}

/// norm(u - v) with pointwise subtraction including right limits.
inline double traj_distance(const Trajectory& u, const Trajectory& v, const NormKind& kind) {
    if (u.dim() != v.dim()) throw GridMismatch("trajectory dimensions differ");
    if (!u.grid().same_nodes(v.grid())) throw GridMismatch("trajectories live on different grids");
    const Grid& g = u.grid();
    double sup = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = (u.at(i) - v.at(i)).norm();
        sup = std::max(sup, d * kind.weight(g.node(i)));
    }
    for (std::size_t k = 0; k < g.impulse_count(); ++k) {
        const double tau = g.node(g.impulse_node(k));
        const auto c = static_cast<Eigen::Index>(k);
        const double d = (u.right_limits().col(c) - v.right_limits().col(c)).norm();
        sup = std::max(sup, d * kind.weight(tau));
    }
    return sup;
}

}  // namespace vfi
