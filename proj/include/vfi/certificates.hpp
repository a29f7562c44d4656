#pragma once

#include <cmath>
#include <cstddef>
#include <utility>

#include "vfi/errors.hpp"
#include "vfi/problem.hpp"

namespace vfi {

/// Contraction certificate for the mild operator in the Bielecki(gamma)
/// norm; feasible iff L_R < 1.
struct ContractionCertificate {
    double gamma = 0.0;
    double L_R = 0.0;
    bool feasible = false;
    double M = 1.0;
};

/// Inputs shared by the dependence bounds: the semigroup constant, horizon,
/// impulse count, the initial-state gap ||w0 - w0_hat||, and the (A4)
/// perturbation constants.
struct DependenceInputs {
    double M = 1.0;
    double b = 0.0;
    std::size_t n = 0;
    double delta_w0 = 0.0;
    double mu = 0.0;
    double eta = 0.0;

    void validate() const {
        if (M < 0 || b < 0 || delta_w0 < 0 || mu < 0 || eta < 0)
            throw InvalidArgument("dependence inputs must be nonnegative");
    }
};

/// The contraction constant of the mild operator, exactly as the closed form
/// reads:
///
///   L_R = (M L_G / gamma) [ (1 - e^{-gamma b})(1 + L_F1/gamma)
///                           + L_F2 b e^{gamma b} ]
///         + M e^{gamma b} sum_k L_Ik
inline double contraction_constant(const LipschitzData& L, double M, double b,
                                   std::size_t n, double gamma) {
    if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
    if (L.L_I.size() != n)
        throw InvalidArgument("n must match the number of impulse constants");
    const double volterra_part = (M * L.L_G / gamma) *
        ((1.0 - std::exp(-gamma * b)) * (1.0 + L.L_F1 / gamma) +
         L.L_F2 * b * std::exp(gamma * b));
    return volterra_part + M * std::exp(gamma * b) * L.sum_L_I();
}

/// Minimizes contraction_constant over [lo, hi]: a log-spaced coarse scan at
/// `resolution` points seeds a golden-section refinement to relative gamma
/// tolerance 1e-6.  Infeasibility (L_R >= 1 everywhere) is a valid outcome,
/// reported through the flag rather than an error.
inline ContractionCertificate optimize_gamma(const LipschitzData& L, double M, double b,
                                             std::size_t n,
                                             std::pair<double, double> gamma_range,
                                             std::size_t resolution = 200) {
    const auto [lo, hi] = gamma_range;
    if (!(lo > 0.0 && lo < hi)) throw InvalidArgument("need 0 < lo < hi");
    if (resolution < 2) resolution = 2;

    const auto value = [&](double gamma) { return contraction_constant(L, M, b, n, gamma); };

    const double log_lo = std::log(lo), log_hi = std::log(hi);
    double best_gamma = lo;
    double best_value = value(lo);
    std::size_t best_index = 0;
    for (std::size_t i = 1; i < resolution; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(resolution - 1);
        const double gamma = std::exp(log_lo + t * (log_hi - log_lo));
        const double v = value(gamma);
        if (v < best_value) {
            best_value = v;
            best_gamma = gamma;
            best_index = i;
        }
    }

    // bracket around the scan minimum, then golden-section
    const auto scan_gamma = [&](std::size_t i) {
        const double t = static_cast<double>(i) / static_cast<double>(resolution - 1);
        return std::exp(log_lo + t * (log_hi - log_lo));
    };
    double a = best_index == 0 ? lo : scan_gamma(best_index - 1);
    double c = best_index == resolution - 1 ? hi : scan_gamma(best_index + 1);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = c - inv_phi * (c - a);
    double x2 = a + inv_phi * (c - a);
    double f1 = value(x1), f2 = value(x2);
    while (c - a > 1e-6 * (0.5 * (a + c))) {
        if (f1 < f2) {
            c = x2; x2 = x1; f2 = f1;
            x1 = c - inv_phi * (c - a);
            f1 = value(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + inv_phi * (c - a);
            f2 = value(x2);
        }
    }
    const double refined = 0.5 * (a + c);
    const double refined_value = value(refined);
    if (refined_value < best_value) {
        best_value = refined_value;
        best_gamma = refined;
    }

    ContractionCertificate cert;
    cert.gamma = best_gamma;
    cert.L_R = best_value;
    cert.feasible = best_value < 1.0;
    cert.M = M;
    return cert;
}

/// Picard-operator dependence bound:
///   ||w* - v*||_PB <= (M ||w0 - w0_hat|| + b M mu + n M eta) / (1 - L_R),
/// defined only under the contraction L_R < 1.
inline double po_dependence_bound(const DependenceInputs& in, double L_R) {
    in.validate();
    if (!(L_R < 1.0))
        throw CertificateInfeasible("po dependence bound needs L_R < 1, got L_R=" +
                                    std::to_string(L_R));
    const double rho = in.M * in.delta_w0 + in.b * in.M * in.mu +
                       static_cast<double>(in.n) * in.M * in.eta;
    return rho / (1.0 - L_R);
}

namespace detail {

/// prod_k (1 + M L_Ik) * exp(M L_G b + M L_G L_F1 b^2/2 + M L_G L_F2 b^2)
/// — the common growth factor of the Gronwall-route bounds.  Shared so the
/// eps bound with eps = 0 reduces to the continuous-dependence bound
/// bit-identically.
inline double impulse_growth_factor(const LipschitzData& L, double M, double b) {
    double prod = 1.0;
    for (double li : L.L_I) prod *= 1.0 + M * li;
    return prod * std::exp(M * L.L_G * b + M * L.L_G * L.L_F1 * b * b / 2.0 +
                           M * L.L_G * L.L_F2 * b * b);
}

}  // namespace detail

/// Gronwall-route dependence bound (no contraction condition needed):
///   (M ||w0 - w0_hat|| + b M mu + n M eta)
///     * prod_k (1 + M L_Ik) * exp(M L_G b + M L_G L_F1 b^2/2 + M L_G L_F2 b^2)
inline double gronwall_dependence_bound(const DependenceInputs& in, const LipschitzData& L) {
    in.validate();
    if (L.L_I.size() != in.n)
        throw InvalidArgument("n must match the number of impulse constants");
    const double rho = in.M * in.delta_w0 + in.b * in.M * in.mu +
                       static_cast<double>(in.n) * in.M * in.eta;
    return rho * detail::impulse_growth_factor(L, in.M, in.b);
}

/// Approximate-solution dependence bound:
///   { (eps1 + eps2) M (b + n) + M ||w0^1 - w0^2|| } * (same growth factor)
inline double eps_dependence_bound(double eps1, double eps2, const DependenceInputs& in,
                                   const LipschitzData& L) {
    in.validate();
    if (eps1 < 0 || eps2 < 0) throw InvalidArgument("epsilons must be nonnegative");
    if (L.L_I.size() != in.n)
        throw InvalidArgument("n must match the number of impulse constants");
    const double head = (eps1 + eps2) * in.M * (in.b + static_cast<double>(in.n)) +
                        in.M * in.delta_w0;
    return head * detail::impulse_growth_factor(L, in.M, in.b);
}

}  // namespace vfi
