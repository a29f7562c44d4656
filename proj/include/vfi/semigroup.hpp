#pragma once

#include <cmath>
#include <cstddef>

#include <Eigen/Dense>

#include "vfi/core.hpp"
#include "vfi/errors.hpp"

namespace vfi {

/// Generator matrix A of the evolution family T(tau) = e^{A tau} on R^d.
class Generator {
public:
    explicit Generator(Matrix a) : a_(std::move(a)) {
        if (a_.rows() != a_.cols() || a_.rows() == 0)
            throw InvalidArgument("generator must be a nonempty square matrix");
        if (!a_.allFinite())
            throw InvalidArgument("generator entries must be finite");
    }

    const Matrix& matrix() const { return a_; }
    Eigen::Index dim() const { return a_.rows(); }

private:
    Matrix a_;
};

namespace detail {

/// Pade(13) approximant with scaling and squaring (Higham's coefficients).
inline Matrix expm_pade13(const Matrix& a) {
    static constexpr double b[] = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0,  129060195264000.0,   10559470521600.0,
        670442572800.0,      33522128640.0,       1323241920.0,
        40840800.0,          960960.0,            16380.0,
        182.0,               1.0};
    const Eigen::Index d = a.rows();
    const Matrix ident = Matrix::Identity(d, d);

    const double theta13 = 5.371920351148152;
    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > theta13)
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    const Matrix as = a / std::ldexp(1.0, squarings);

    const Matrix a2 = as * as;
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a4 * a2;
    const Matrix u = as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) +
                           b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
    const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) +
                     b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;

    Matrix r = (v - u).partialPivLu().solve(v + u);
    for (int s = 0; s < squarings; ++s) r = r * r;
    return r;
}

inline double operator_norm(const Matrix& m) {
    if (m.rows() == 1 && m.cols() == 1) return std::fabs(m(0, 0));
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

}  // namespace detail

/// e^{At} for t >= 0.  Exact for d = 1, scaling-and-squaring Pade otherwise.
inline Matrix matrix_exponential(const Generator& gen, double t) {
    if (!(t >= 0.0)) throw InvalidArgument("semigroup is forward-time only (t >= 0)");
    if (gen.dim() == 1) {
        Matrix r(1, 1);
        r(0, 0) = std::exp(gen.matrix()(0, 0) * t);
        return r;
    }
    if (t == 0.0) return Matrix::Identity(gen.dim(), gen.dim());
    return detail::expm_pade13(gen.matrix() * t);
}

/// e^{At} v.
inline Vector apply_semigroup(const Generator& gen, double t, const Vector& v) {
    if (v.size() != gen.dim())
        throw InvalidArgument("state dimension does not match the generator");
    return matrix_exponential(gen, t) * v;
}

/// Pazy-type bound ||T(tau)|| <= M e^{omega tau} on [0, b].  omega is fixed
/// to 0 here, so M is a finite-horizon sup estimate; `samples` records the
/// sampling density behind it.
struct SemigroupBound {
    double M = 1.0;
    double omega = 0.0;
    std::size_t samples = 0;
};

/// M = max(1, sup over sampled tau of the spectral norm of e^{A tau}),
/// sampling `samples` uniformly spaced points of [0, b] inclusive.
inline SemigroupBound estimate_semigroup_bound(const Generator& gen, double b,
                                               std::size_t samples) {
    if (!(b > 0.0)) throw InvalidArgument("horizon b must be positive");
    if (samples < 2) throw InvalidArgument("need at least 2 samples");
    double m = 1.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double tau = b * static_cast<double>(i) / static_cast<double>(samples - 1);
        m = std::max(m, detail::operator_norm(matrix_exponential(gen, tau)));
    }
    return SemigroupBound{m, 0.0, samples};
}

}  // namespace vfi
