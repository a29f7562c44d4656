#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vfi/core.hpp"
#include "vfi/expr.hpp"
#include "vfi/quadrature.hpp"
#include "vfi/rng.hpp"
#include "vfi/semigroup.hpp"

namespace vfi {

/// Lipschitz and perturbation constants declared with a problem.  The hat
/// variants describe a perturbed problem's own nonlinearities when a file
/// carries both sets.
struct LipschitzData {
    double L_G = 0.0;
    double L_F1 = 0.0;
    double L_F2 = 0.0;
    std::vector<double> L_I;
    double mu = 0.0;
    double eta = 0.0;
    std::optional<double> L_G_hat, L_F1_hat, L_F2_hat, L_I_hat;

    double sum_L_I() const {
        double s = 0.0;
        for (double v : L_I) s += v;
        return s;
    }

    void validate(std::size_t impulse_count) const {
        if (L_G < 0 || L_F1 < 0 || L_F2 < 0 || mu < 0 || eta < 0)
            throw InvalidArgument("Lipschitz constants must be nonnegative");
        for (double v : L_I)
            if (v < 0) throw InvalidArgument("impulse Lipschitz constants must be nonnegative");
        if (L_I.size() != impulse_count)
            throw InvalidArgument("L_I must list one constant per impulse");
    }
};

/// One impulse: the instant tau_k and the jump map I_k as d expressions
/// over w.
struct Impulse {
    double time = 0.0;
    std::vector<Expr> map;
};

/// A full equation instance: w' = A w + G(tau, w, int_0^tau F1, int_0^b F2)
/// with initial state w0 and jump conditions at the impulse times.
class ProblemSpec {
public:
    ProblemSpec(int d, double b, Generator generator, Vector w0,
                std::vector<Expr> g, std::vector<Expr> f1, std::vector<Expr> f2,
                std::vector<Impulse> impulses, std::optional<LipschitzData> lipschitz)
        : d_(d), b_(b), generator_(std::move(generator)), w0_(std::move(w0)),
          g_(std::move(g)), f1_(std::move(f1)), f2_(std::move(f2)),
          impulses_(std::move(impulses)), lipschitz_(std::move(lipschitz)) {
        if (d_ <= 0) throw InvalidArgument("dimension must be positive");
        if (!(b_ > 0.0)) throw InvalidArgument("horizon must be positive");
        if (generator_.dim() != d_) throw InvalidArgument("generator dimension mismatch");
        if (w0_.size() != d_) throw InvalidArgument("w0 dimension mismatch");
        if (g_.size() != static_cast<std::size_t>(d_) ||
            f1_.size() != static_cast<std::size_t>(d_) ||
            f2_.size() != static_cast<std::size_t>(d_))
            throw InvalidArgument("G, F1, F2 need one expression per component");
        std::vector<double> times;
        for (const auto& imp : impulses_) {
            if (!(imp.time > 0.0 && imp.time < b_))
                throw InvalidSchedule("impulse time must lie in (0,b)");
            if (imp.map.size() != static_cast<std::size_t>(d_))
                throw InvalidArgument("impulse map needs one expression per component");
            times.push_back(imp.time);
        }
        schedule_ = ImpulseSchedule(times);
        if (lipschitz_) lipschitz_->validate(impulses_.size());
    }

    int dim() const { return d_; }
    double horizon() const { return b_; }
    const Generator& generator() const { return generator_; }
    const Vector& initial_state() const { return w0_; }
    const ImpulseSchedule& schedule() const { return schedule_; }
    const std::vector<Impulse>& impulses() const { return impulses_; }
    std::size_t impulse_count() const { return impulses_.size(); }
    const std::optional<LipschitzData>& lipschitz() const { return lipschitz_; }
    const std::vector<Expr>& g_exprs() const { return g_; }
    const std::vector<Expr>& f1_exprs() const { return f1_; }
    const std::vector<Expr>& f2_exprs() const { return f2_; }

    bool f1_uses_tau() const { return any_uses(f1_, Var::Tau); }
    bool f2_uses_tau() const { return any_uses(f2_, Var::Tau); }

    Vector eval_g(double tau, const Vector& w, const Vector& y1, const Vector& y2) const {
        EvalEnv env;
        env.with_tau(tau).with_horizon(b_).with_w(w.data()).with_y1(y1.data()).with_y2(y2.data());
        return eval_all(g_, env);
    }

    Vector eval_f1(double tau, double sigma, const Vector& w) const {
        EvalEnv env;
        env.with_tau(tau).with_sigma(sigma).with_horizon(b_).with_w(w.data());
        return eval_all(f1_, env);
    }

    Vector eval_f2(double tau, double sigma, const Vector& w) const {
        EvalEnv env;
        env.with_tau(tau).with_sigma(sigma).with_horizon(b_).with_w(w.data());
        return eval_all(f2_, env);
    }

    Vector eval_impulse(std::size_t k, const Vector& w) const {
        EvalEnv env;
        env.with_w(w.data());
        return eval_all(impulses_[k].map, env);
    }

    KernelFn volterra_kernel() const {
        return KernelFn{KernelFn::Arity::Volterra,
                        [this](double tau, double sigma, const Vector& w) {
                            return eval_f1(tau, sigma, w);
                        }};
    }

    KernelFn fredholm_kernel() const {
        return KernelFn{KernelFn::Arity::Fredholm,
                        [this](double tau, double sigma, const Vector& w) {
                            return eval_f2(tau, sigma, w);
                        }};
    }

private:
    static bool any_uses(const std::vector<Expr>& es, Var v) {
        for (const auto& e : es)
            if (e.uses(v)) return true;
        return false;
    }

    Vector eval_all(const std::vector<Expr>& es, const EvalEnv& env) const {
        Vector out(d_);
        for (int i = 0; i < d_; ++i) out(i) = es[static_cast<std::size_t>(i)].eval(env);
        return out;
    }

    int d_;
    double b_;
    Generator generator_;
    Vector w0_;
    std::vector<Expr> g_, f1_, f2_;
    std::vector<Impulse> impulses_;
    ImpulseSchedule schedule_;
    std::optional<LipschitzData> lipschitz_;
};

namespace detail {

struct KeyValue {
    std::string section;
    std::string key;
    std::string value;
    std::size_t line;
};

inline std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
    return std::string(s.substr(a, b - a));
}

/// Splits INI-style contents into (section, key, value) triples, dropping
/// blank lines and '#' comments.
inline std::vector<KeyValue> split_sections(std::string_view contents,
                                            const std::vector<std::string>& known_sections) {
    std::vector<KeyValue> out;
    std::string section;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= contents.size()) {
        const std::size_t eol = contents.find('\n', pos);
        std::string_view raw = contents.substr(
            pos, eol == std::string_view::npos ? contents.size() - pos : eol - pos);
        pos = eol == std::string_view::npos ? contents.size() + 1 : eol + 1;
        ++lineno;
        const std::size_t hash = raw.find('#');
        if (hash != std::string_view::npos) raw = raw.substr(0, hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw FileFormatError(section, "", "unterminated section header at line " +
                                                       std::to_string(lineno));
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            bool known = false;
            for (const auto& s : known_sections) known = known || s == section;
            if (!known) throw FileFormatError(section, "", "unknown section");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw FileFormatError(section, "", "expected 'key = value' at line " +
                                                   std::to_string(lineno));
        KeyValue kv;
        kv.section = section;
        kv.key = trim(std::string_view(line).substr(0, eq));
        kv.value = trim(std::string_view(line).substr(eq + 1));
        kv.line = lineno;
        if (kv.section.empty())
            throw FileFormatError("", kv.key, "entry appears before any section");
        if (kv.key.empty() || kv.value.empty())
            throw FileFormatError(kv.section, kv.key, "empty key or value at line " +
                                                          std::to_string(lineno));
        out.push_back(std::move(kv));
    }
    return out;
}

inline double parse_real(const KeyValue& kv) {
    try {
        std::size_t used = 0;
        const double v = std::stod(kv.value, &used);
        if (used != kv.value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw FileFormatError(kv.section, kv.key, "expected a real number, got '" + kv.value + "'");
    }
}

inline std::vector<double> parse_real_list(const KeyValue& kv) {
    std::string v = kv.value;
    for (char& c : v)
        if (c == ',') c = ' ';
    std::istringstream in(v);
    std::vector<double> out;
    double x;
    while (in >> x) out.push_back(x);
    if (!in.eof())
        throw FileFormatError(kv.section, kv.key, "expected a list of real numbers");
    return out;
}

/// Expression lists use ';' between components so commas stay available for
/// min/max argument lists.
inline std::vector<Expr> parse_expr_list(const KeyValue& kv, VarSet allowed, int d) {
    std::vector<Expr> out;
    std::size_t start = 0;
    const std::string& v = kv.value;
    for (std::size_t i = 0; i <= v.size(); ++i) {
        if (i == v.size() || v[i] == ';') {
            const std::string piece = trim(std::string_view(v).substr(start, i - start));
            if (piece.empty())
                throw FileFormatError(kv.section, kv.key, "empty expression component");
            try {
                out.push_back(parse_expression(piece, allowed, d));
            } catch (const SyntaxError& ex) {
                throw FileFormatError(kv.section, kv.key, ex.what());
            }
            start = i + 1;
        }
    }
    if (out.size() != static_cast<std::size_t>(d))
        throw FileFormatError(kv.section, kv.key,
                              "expected " + std::to_string(d) + " expression(s), got " +
                                  std::to_string(out.size()));
    return out;
}

}  // namespace detail

/// Parses the problem-file format:
///
///   [problem]   d, b, w0 (d reals), A (d*d reals, row-major)
///   [dynamics]  G, F1, F2 (d expressions each, ';'-separated)
///   [impulses]  repeated pairs: time = <real>, map = <d expressions>
///   [lipschitz] optional: L_G, L_F1, L_F2, L_I (n reals), mu, eta,
///               L_G_hat, L_F1_hat, L_F2_hat, L_I_hat
///
/// Unknown sections or keys are rejected; every cross-field invariant is
/// checked here so a returned ProblemSpec is fully usable.
inline ProblemSpec parse_problem(std::string_view contents) {
    const auto entries = detail::split_sections(
        contents, {"problem", "dynamics", "impulses", "lipschitz"});

    std::optional<int> d;
    std::optional<double> b;
    std::optional<std::vector<double>> w0, a;
    std::optional<detail::KeyValue> g_kv, f1_kv, f2_kv;
    std::vector<std::pair<double, detail::KeyValue>> impulse_entries;
    std::optional<double> pending_time;
    bool has_lipschitz = false;
    LipschitzData lip;
    bool lip_has_lg = false, lip_has_lf1 = false, lip_has_lf2 = false;

    for (const auto& kv : entries) {
        if (kv.section == "problem") {
            if (kv.key == "d") {
                const double v = detail::parse_real(kv);
                if (v != std::floor(v) || v < 1 || v > 64)
                    throw FileFormatError(kv.section, kv.key, "d must be a small positive integer");
                d = static_cast<int>(v);
            } else if (kv.key == "b") {
                b = detail::parse_real(kv);
                if (!(*b > 0.0)) throw FileFormatError(kv.section, kv.key, "b must be positive");
            } else if (kv.key == "w0") {
                w0 = detail::parse_real_list(kv);
            } else if (kv.key == "A") {
                a = detail::parse_real_list(kv);
            } else {
                throw FileFormatError(kv.section, kv.key, "unknown key");
            }
        } else if (kv.section == "dynamics") {
            if (kv.key == "G") g_kv = kv;
            else if (kv.key == "F1") f1_kv = kv;
            else if (kv.key == "F2") f2_kv = kv;
            else throw FileFormatError(kv.section, kv.key, "unknown key");
        } else if (kv.section == "impulses") {
            if (kv.key == "time") {
                if (pending_time)
                    throw FileFormatError(kv.section, kv.key, "time without a following map");
                pending_time = detail::parse_real(kv);
            } else if (kv.key == "map") {
                if (!pending_time)
                    throw FileFormatError(kv.section, kv.key, "map without a preceding time");
                impulse_entries.emplace_back(*pending_time, kv);
                pending_time.reset();
            } else {
                throw FileFormatError(kv.section, kv.key, "unknown key");
            }
        } else {  // lipschitz
            has_lipschitz = true;
            if (kv.key == "L_G") { lip.L_G = detail::parse_real(kv); lip_has_lg = true; }
            else if (kv.key == "L_F1") { lip.L_F1 = detail::parse_real(kv); lip_has_lf1 = true; }
            else if (kv.key == "L_F2") { lip.L_F2 = detail::parse_real(kv); lip_has_lf2 = true; }
            else if (kv.key == "L_I") lip.L_I = detail::parse_real_list(kv);
            else if (kv.key == "mu") lip.mu = detail::parse_real(kv);
            else if (kv.key == "eta") lip.eta = detail::parse_real(kv);
            else if (kv.key == "L_G_hat") lip.L_G_hat = detail::parse_real(kv);
            else if (kv.key == "L_F1_hat") lip.L_F1_hat = detail::parse_real(kv);
            else if (kv.key == "L_F2_hat") lip.L_F2_hat = detail::parse_real(kv);
            else if (kv.key == "L_I_hat") lip.L_I_hat = detail::parse_real(kv);
            else throw FileFormatError(kv.section, kv.key, "unknown key");
        }
    }

    if (!d) throw FileFormatError("problem", "d", "missing mandatory field");
    if (!b) throw FileFormatError("problem", "b", "missing mandatory field");
    if (!w0) throw FileFormatError("problem", "w0", "missing mandatory field");
    if (!a) throw FileFormatError("problem", "A", "missing mandatory field");
    if (!g_kv) throw FileFormatError("dynamics", "G", "missing mandatory field");
    if (!f1_kv) throw FileFormatError("dynamics", "F1", "missing mandatory field");
    if (!f2_kv) throw FileFormatError("dynamics", "F2", "missing mandatory field");
    if (pending_time)
        throw FileFormatError("impulses", "time", "time without a following map");

    const int dim = *d;
    if (w0->size() != static_cast<std::size_t>(dim))
        throw FileFormatError("problem", "w0",
                              "expected " + std::to_string(dim) + " components");
    if (a->size() != static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim))
        throw FileFormatError("problem", "A",
                              "expected " + std::to_string(dim * dim) + " row-major entries");

    Matrix gen_m(dim, dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c)
            gen_m(r, c) = (*a)[static_cast<std::size_t>(r * dim + c)];
    Vector w0_v(dim);
    for (int i = 0; i < dim; ++i) w0_v(i) = (*w0)[static_cast<std::size_t>(i)];

    const VarSet g_vars{Var::Tau, Var::Horizon, Var::W, Var::Y1, Var::Y2};
    const VarSet f_vars{Var::Tau, Var::Sigma, Var::Horizon, Var::W};
    const VarSet i_vars{Var::W};

    std::vector<Expr> g = detail::parse_expr_list(*g_kv, g_vars, dim);
    std::vector<Expr> f1 = detail::parse_expr_list(*f1_kv, f_vars, dim);
    std::vector<Expr> f2 = detail::parse_expr_list(*f2_kv, f_vars, dim);

    std::vector<Impulse> impulses;
    double prev_time = 0.0;
    for (const auto& [time, map_kv] : impulse_entries) {
        if (!(time > 0.0 && time < *b))
            throw FileFormatError("impulses", "time", "impulse time must lie in (0,b)");
        if (!impulses.empty() && time == prev_time)
            throw FileFormatError("impulses", "time", "duplicate impulse time");
        if (!impulses.empty() && time < prev_time)
            throw FileFormatError("impulses", "time", "impulse times must be strictly increasing");
        impulses.push_back(Impulse{time, detail::parse_expr_list(map_kv, i_vars, dim)});
        prev_time = time;
    }

    std::optional<LipschitzData> lipschitz;
    if (has_lipschitz) {
        if (!lip_has_lg) throw FileFormatError("lipschitz", "L_G", "missing mandatory field");
        if (!lip_has_lf1) throw FileFormatError("lipschitz", "L_F1", "missing mandatory field");
        if (!lip_has_lf2) throw FileFormatError("lipschitz", "L_F2", "missing mandatory field");
        if (lip.L_I.size() != impulses.size())
            throw FileFormatError("lipschitz", "L_I",
                                  "need one constant per impulse (" +
                                      std::to_string(impulses.size()) + ")");
        lipschitz = lip;
    }

    try {
        return ProblemSpec(dim, *b, Generator(gen_m), std::move(w0_v), std::move(g),
                           std::move(f1), std::move(f2), std::move(impulses),
                           std::move(lipschitz));
    } catch (const Error& ex) {
        throw FileFormatError("problem", "", ex.what());
    }
}

/// One sample-check finding: a declared constant that random argument pairs
/// contradict.
struct LipschitzWarning {
    std::string field;
    double declared = 0.0;
    double observed = 0.0;
};

/// Randomized spot check of the declared Lipschitz constants.  States are
/// drawn from [-radius, radius]^d; a constant is flagged when the observed
/// difference quotient exceeds it beyond rounding slack.
inline std::vector<LipschitzWarning> sample_check_lipschitz(const ProblemSpec& p,
                                                            std::uint64_t seed,
                                                            int trials,
                                                            double radius = 2.0) {
    std::vector<LipschitzWarning> warnings;
    if (!p.lipschitz()) return warnings;
    const LipschitzData& lip = *p.lipschitz();
    Rng rng(seed);
    const int d = p.dim();

    const auto random_state = [&] {
        Vector v(d);
        for (int i = 0; i < d; ++i) v(i) = rng.uniform(-radius, radius);
        return v;
    };

    double max_g = 0.0, max_f1 = 0.0, max_f2 = 0.0;
    std::vector<double> max_i(p.impulse_count(), 0.0);
    for (int t = 0; t < trials; ++t) {
        const double tau = rng.uniform(0.0, p.horizon());
        const double sigma = rng.uniform(0.0, p.horizon());
        const Vector u1 = random_state(), u2 = random_state(), u3 = random_state();
        const Vector v1 = random_state(), v2 = random_state(), v3 = random_state();
        const double denom_sum = (u1 - v1).norm() + (u2 - v2).norm() + (u3 - v3).norm();
        if (denom_sum > 1e-12) {
            const double diff =
                (p.eval_g(tau, u1, u2, u3) - p.eval_g(tau, v1, v2, v3)).norm();
            max_g = std::max(max_g, diff / denom_sum);
        }
        const double denom = (u1 - v1).norm();
        if (denom > 1e-12) {
            max_f1 = std::max(max_f1,
                              (p.eval_f1(tau, sigma, u1) - p.eval_f1(tau, sigma, v1)).norm() / denom);
            max_f2 = std::max(max_f2,
                              (p.eval_f2(tau, sigma, u1) - p.eval_f2(tau, sigma, v1)).norm() / denom);
            for (std::size_t k = 0; k < p.impulse_count(); ++k)
                max_i[k] = std::max(max_i[k],
                                    (p.eval_impulse(k, u1) - p.eval_impulse(k, v1)).norm() / denom);
        }
    }

    const double slack = 1.0 + 1e-9;
    if (max_g > lip.L_G * slack) warnings.push_back({"L_G", lip.L_G, max_g});
    if (max_f1 > lip.L_F1 * slack) warnings.push_back({"L_F1", lip.L_F1, max_f1});
    if (max_f2 > lip.L_F2 * slack) warnings.push_back({"L_F2", lip.L_F2, max_f2});
    for (std::size_t k = 0; k < p.impulse_count(); ++k)
        if (max_i[k] > lip.L_I[k] * slack)
            warnings.push_back({"L_I[" + std::to_string(k) + "]", lip.L_I[k], max_i[k]});
    return warnings;
}

}  // namespace vfi
