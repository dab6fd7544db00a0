#pragma once

// Time steppers: splittings of the doubled Hamiltonian, the explicit
// projection integrators built on them, the mixing variants that evolve the
// raw doubled state, and the implicit Runge-Kutta baselines.

#include <array>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "autodiff.hpp"
#include "errors.hpp"
#include "flows.hpp"
#include "phase.hpp"
#include "record.hpp"
#include "state.hpp"

namespace xsymp {

enum class Family {
    exp_symp,             ///< doubled-space step, then factor projection
    pihajoki,             ///< raw doubled state, no mixing
    pihajoki_midmix,      ///< raw doubled state, midpoint permutation after each step
    tao,                  ///< raw doubled state with the rotational coupling flow
    semiexplicit,         ///< symmetric projection solved by Broyden iteration
    implicit_midpoint,
    gauss4,
    weighted_projection,  ///< doubled-space step, then per-component weights
    explicit_euler,       ///< first-order non-symplectic control
};

enum class WeightPolicy {
    constant,               ///< (lambda, xi) on every step
    alternating,            ///< (lambda, xi) on odd steps, (xi, lambda) on even steps
    fresh_random_per_step,  ///< fresh uniform (a, b) on odd steps, (b, a) on the next even step
};

std::string to_string(Family f);
std::string to_string(WeightPolicy w);

/// Declarative description of a time stepper.
struct IntegratorSpec {
    Family family = Family::exp_symp;
    int order = 2;
    FactorPair factors{1.0 / std::numbers::e, 1.0 / std::numbers::pi};
    WeightVectors weights;
    WeightPolicy weight_policy = WeightPolicy::constant;
    ProjectionMode projection = ProjectionMode::standard;
    MixingStrength omega;
    double tol = 1e-13;
    int max_iters = 100;
    std::uint64_t rng_seed = 0;

    static IntegratorSpec exp_symp(int order, FactorPair f = {1.0 / std::numbers::e, 1.0 / std::numbers::pi}) {
        IntegratorSpec s;
        s.family = Family::exp_symp;
        s.order = order;
        s.factors = f;
        return s;
    }
    static IntegratorSpec irk2(double tol = 1e-13) {
        IntegratorSpec s;
        s.family = Family::implicit_midpoint;
        s.tol = tol;
        return s;
    }
    static IntegratorSpec irk4(double tol = 1e-13) {
        IntegratorSpec s;
        s.family = Family::gauss4;
        s.order = 4;
        s.tol = tol;
        return s;
    }
    static IntegratorSpec semisymp(int order, double tol = 1e-13) {
        IntegratorSpec s;
        s.family = Family::semiexplicit;
        s.order = order;
        s.tol = tol;
        return s;
    }
    static IntegratorSpec pihajoki(int order = 2, bool midpoint_mix = false) {
        IntegratorSpec s;
        s.family = midpoint_mix ? Family::pihajoki_midmix : Family::pihajoki;
        s.order = order;
        return s;
    }
    static IntegratorSpec tao(double omega, int order = 2) {
        IntegratorSpec s;
        s.family = Family::tao;
        s.order = order;
        s.omega = MixingStrength(omega);
        return s;
    }
    static IntegratorSpec weighted(int order, WeightVectors w, WeightPolicy policy,
                                   ProjectionMode mode = ProjectionMode::standard, std::uint64_t seed = 0) {
        IntegratorSpec s;
        s.family = Family::weighted_projection;
        s.order = order;
        s.weights = std::move(w);
        s.weight_policy = policy;
        s.projection = mode;
        s.rng_seed = seed;
        return s;
    }
    static IntegratorSpec explicit_euler() {
        IntegratorSpec s;
        s.family = Family::explicit_euler;
        s.order = 1;
        return s;
    }

    bool is_implicit() const {
        return family == Family::implicit_midpoint || family == Family::gauss4 || family == Family::semiexplicit;
    }
    /// Families that carry the raw doubled state from step to step.
    bool carries_extended_state() const {
        return family == Family::pihajoki || family == Family::pihajoki_midmix || family == Family::tao;
    }

    /// Throws ConfigError on inconsistent fields; d is the problem dimension
    /// (0 skips the weight-length check).
    void validate(std::size_t d = 0) const {
        if (!(tol > 0.0) || !std::isfinite(tol)) throw ConfigError("tol must be a positive finite number");
        if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
        if (!std::isfinite(factors.lambda0) || !std::isfinite(factors.mu0))
            throw ConfigError("factors must be finite");
        switch (family) {
            case Family::implicit_midpoint:
                if (order != 2) throw ConfigError("implicit_midpoint is order 2");
                break;
            case Family::gauss4:
                if (order != 4) throw ConfigError("gauss4 is order 4");
                break;
            case Family::explicit_euler:
                if (order != 1) throw ConfigError("explicit_euler is order 1");
                break;
            default:
                if (order != 2 && order != 4) throw ConfigError("order must be 2 or 4");
        }
        if (family == Family::weighted_projection) {
            if (weights.lambda.empty() || weights.lambda.size() != weights.xi.size())
                throw ConfigError("weighted_projection needs lambda and xi of equal nonzero length");
            if (d != 0) {
                validate_weights(weights, d, projection);
                if (weight_policy == WeightPolicy::alternating && projection == ProjectionMode::definition1)
                    validate_weights(WeightVectors{weights.xi, weights.lambda}, d, projection);
            }
        }
    }

    /// Short human-readable label, e.g. "ExpSymp2" or "IRK4".
    std::string name() const {
        const std::string r = std::to_string(order);
        switch (family) {
            case Family::exp_symp: return "ExpSymp" + r;
            case Family::pihajoki: return "Pihajoki" + r;
            case Family::pihajoki_midmix: return "PihajokiMix" + r;
            case Family::tao: return "Tao" + r;
            case Family::semiexplicit: return "SemiSymp" + r;
            case Family::implicit_midpoint: return "IRK2";
            case Family::gauss4: return "IRK4";
            case Family::weighted_projection: return "Weighted" + r + "-" + to_string(weight_policy);
            case Family::explicit_euler: return "Euler1";
        }
        return "unknown";
    }
};

inline std::string to_string(Family f) {
    switch (f) {
        case Family::exp_symp: return "exp_symp";
        case Family::pihajoki: return "pihajoki";
        case Family::pihajoki_midmix: return "pihajoki_midmix";
        case Family::tao: return "tao";
        case Family::semiexplicit: return "semiexplicit";
        case Family::implicit_midpoint: return "implicit_midpoint";
        case Family::gauss4: return "gauss4";
        case Family::weighted_projection: return "weighted_projection";
        case Family::explicit_euler: return "explicit_euler";
    }
    return "unknown";
}

inline std::string to_string(WeightPolicy w) {
    switch (w) {
        case WeightPolicy::constant: return "constant";
        case WeightPolicy::alternating: return "alternating";
        case WeightPolicy::fresh_random_per_step: return "fresh_random_per_step";
    }
    return "unknown";
}

template <class T = double>
struct StepResult {
    State<T> state;
    /// Doubled state after the step and before any projection (equal to
    /// embed(state) for the implicit Runge-Kutta families).
    ExtendedState<T> extended;
    int iterations_used = 1;
    T discrepancy_pre_projection = T(0);
};

// ---------------------------------------------------------------------------
// Splittings in the doubled space.

/// Triple-jump coefficients (g1, g2, g1) raising a symmetric order-2 step to
/// order 4.
template <class T = double>
struct YoshidaCoefficients {
    T g1;
    T g2;
};

template <class T = double>
YoshidaCoefficients<T> yoshida4_coefficients() {
    using std::cbrt;
    const T g1 = T(1) / (T(2) - cbrt(T(2)));
    return {g1, T(1) - T(2) * g1};
}

/// Wraps a symmetric order-2 in-place step base(e, h) into the order-4
/// composition base(g1 h) base(g2 h) base(g1 h).
template <class Base>
auto yoshida4(Base base) {
    return [base = std::move(base)](auto& e, auto h) {
        using T = decltype(h);
        const auto c = yoshida4_coefficients<T>();
        base(e, c.g1 * h);
        base(e, c.g2 * h);
        base(e, c.g1 * h);
    };
}

/// A(h/2) B(h) A(h/2) in place.
template <class H, class T>
void apply_strang_extended(const H& h, ExtendedState<T>& e, T step) {
    apply_flow_A(h, e, step / T(2));
    apply_flow_B(h, e, step);
    apply_flow_A(h, e, step / T(2));
}

/// Order-4 triple jump of the A-B-A Strang step with the adjacent A flows
/// fused (A flows with equal (p, y) commute and add).
template <class H, class T>
void apply_strang4_extended(const H& h, ExtendedState<T>& e, T step) {
    const auto c = yoshida4_coefficients<T>();
    const T a1 = c.g1 * step, a2 = c.g2 * step;
    apply_flow_A(h, e, a1 / T(2));
    apply_flow_B(h, e, a1);
    apply_flow_A(h, e, (a1 + a2) / T(2));
    apply_flow_B(h, e, a2);
    apply_flow_A(h, e, (a1 + a2) / T(2));
    apply_flow_B(h, e, a1);
    apply_flow_A(h, e, a1 / T(2));
}

template <class H, class T>
ExtendedState<T> strang_extended(const H& h, ExtendedState<T> e, T step) {
    apply_strang_extended(h, e, step);
    return e;
}

/// A(h/2) B(h/2) C(h) B(h/2) A(h/2) in place.
template <class H, class T>
void apply_tao_strang(const H& h, ExtendedState<T>& e, T step, const MixingStrength& omega) {
    apply_flow_A(h, e, step / T(2));
    apply_flow_B(h, e, step / T(2));
    apply_flow_C(e, omega, step);
    apply_flow_B(h, e, step / T(2));
    apply_flow_A(h, e, step / T(2));
}

template <class H, class T>
ExtendedState<T> tao_strang(const H& h, ExtendedState<T> e, T step, const MixingStrength& omega) {
    apply_tao_strang(h, e, step, omega);
    return e;
}

/// The doubled-space base step Phi_h of the given order (2: Strang, 4: its
/// triple jump).
template <class H, class T>
void apply_extended_base(const H& h, ExtendedState<T>& e, T step, int order) {
    if (order == 4) apply_strang4_extended(h, e, step);
    else apply_strang_extended(h, e, step);
}

/// Replaces (p, x) and (q, y) by their means; the result lies on N.
template <class T>
void apply_midpoint_permutation(ExtendedState<T>& e) {
    for (std::size_t k = 0; k < e.dim(); ++k) {
        const T pm = (e.p[k] + e.x[k]) / T(2);
        const T qm = (e.q[k] + e.y[k]) / T(2);
        e.p[k] = e.x[k] = pm;
        e.q[k] = e.y[k] = qm;
    }
}

enum class Mixing { none, midpoint_permutation };

/// One step of the raw doubled state, optionally followed by the midpoint
/// permutation. No re-embedding: the two copies drift apart over time.
template <class H, class T>
ExtendedState<T> pihajoki_step(const H& h, ExtendedState<T> e, T step, Mixing mix, int order = 2) {
    apply_extended_base(h, e, step, order);
    if (mix == Mixing::midpoint_permutation) apply_midpoint_permutation(e);
    return e;
}

/// One coupled step on the raw doubled state (no re-embedding).
template <class H, class T>
ExtendedState<T> tao_run_step(const H& h, ExtendedState<T> e, T step, const MixingStrength& omega, int order = 2) {
    if (order == 4) {
        yoshida4([&](ExtendedState<T>& s, T hh) { apply_tao_strang(h, s, hh, omega); })(e, step);
    } else {
        apply_tao_strang(h, e, step, omega);
    }
    return e;
}

// ---------------------------------------------------------------------------
// Explicit projection integrators.

/// Embed, take the doubled-space step, project with the factor pair. Equal
/// factors give the single-factor method; otherwise odd steps weight p by
/// lambda0 and q by mu0 and even steps swap them.
template <class H, class T>
StepResult<T> exp_symp_step(const H& h, const State<T>& s, T step, const IntegratorSpec& spec,
                            std::size_t step_index = 1) {
    StepResult<T> r;
    r.extended = embed(s);
    apply_extended_base(h, r.extended, step, spec.order);
    r.discrepancy_pre_projection = discrepancy(r.extended);
    if (spec.factors.lambda0 == spec.factors.mu0)
        r.state = project_single_factor(r.extended, spec.factors);
    else
        r.state = project_double_factor(r.extended, spec.factors, step_index);
    return r;
}

/// Embed, step, then project with explicit per-component weights.
template <class H, class T>
StepResult<T> weighted_projection_step(const H& h, const State<T>& s, T step, int order, const WeightVectors& w,
                                       ProjectionMode mode) {
    StepResult<T> r;
    r.extended = embed(s);
    apply_extended_base(h, r.extended, step, order);
    r.discrepancy_pre_projection = discrepancy(r.extended);
    r.state = project_weighted(r.extended, w, mode);
    return r;
}

// ---------------------------------------------------------------------------
// Implicit methods.

namespace detail {

/// f(z) = (-H_q, H_p) for z = (p, q) flattened, written into out.
template <class H, class T>
void vector_field(const H& h, std::span<const T> z, std::span<T> out) {
    const std::size_t d = z.size() / 2;
    gradient_into<H, T>(h, z.first(d), z.last(d), out.last(d), out.first(d));
    for (std::size_t k = 0; k < d; ++k) out[k] = -out[k];
}

template <class T>
std::vector<T> flatten(const State<T>& s) {
    std::vector<T> z(s.p);
    z.insert(z.end(), s.q.begin(), s.q.end());
    return z;
}

template <class T>
State<T> unflatten(std::span<const T> z) {
    const std::size_t d = z.size() / 2;
    return State<T>(std::vector<T>(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(d)),
                    std::vector<T>(z.begin() + static_cast<std::ptrdiff_t>(d), z.end()));
}

template <class T>
T norm2(std::span<const T> a) {
    T s(0);
    for (const T& v : a) s += v * v;
    using std::sqrt;
    return sqrt(s);
}

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

}  // namespace detail

/// Implicit midpoint rule z1 = z0 + h f((z0 + z1)/2), solved by fixed-point
/// iteration on the increment from the explicit Euler predictor. Stops when
/// successive increments differ by less than tol (two-norm).
template <class H, class T>
StepResult<T> implicit_midpoint_step(const H& h, const State<T>& s, T step, double tol, int max_iters) {
    const std::size_t n = 2 * s.dim();
    const std::vector<T> z0 = detail::flatten(s);
    std::vector<T> f(n), mid(n), inc(n);
    detail::vector_field<H, T>(h, z0, f);
    for (std::size_t i = 0; i < n; ++i) inc[i] = step * f[i];

    T diff(0);
    for (int it = 1; it <= max_iters; ++it) {
        for (std::size_t i = 0; i < n; ++i) mid[i] = z0[i] + inc[i] / T(2);
        detail::vector_field<H, T>(h, mid, f);
        diff = T(0);
        for (std::size_t i = 0; i < n; ++i) {
            const T next = step * f[i];
            diff += (next - inc[i]) * (next - inc[i]);
            inc[i] = next;
        }
        using std::sqrt;
        diff = sqrt(diff);
        if (diff < static_cast<T>(tol)) {
            std::vector<T> z1(n);
            for (std::size_t i = 0; i < n; ++i) z1[i] = z0[i] + inc[i];
            StepResult<T> r;
            r.state = detail::unflatten<T>(z1);
            r.extended = embed(r.state);
            r.iterations_used = it;
            return r;
        }
    }
    throw ConvergenceError("implicit midpoint non-convergence after " + std::to_string(max_iters) +
                               " iterations, residual " + detail::fmt_double(static_cast<double>(diff)),
                           static_cast<double>(diff), max_iters);
}

/// Two-stage Gauss-Legendre collocation coefficients.
template <class T = double>
struct Gauss4Tableau {
    T a11, a12, a21, a22, b1, b2, c1, c2;
};

template <class T = double>
Gauss4Tableau<T> gauss4_tableau() {
    using std::sqrt;
    const T r3 = sqrt(T(3));
    return {T(1) / T(4), T(1) / T(4) - r3 / T(6), T(1) / T(4) + r3 / T(6), T(1) / T(4),
            T(1) / T(2), T(1) / T(2), T(1) / T(2) - r3 / T(6), T(1) / T(2) + r3 / T(6)};
}

/// Two-stage Gauss-Legendre Runge-Kutta step; the stage increments
/// Z_i = h sum_j a_ij f(z0 + Z_j) are found by fixed-point iteration from
/// the predictor Z_i = c_i h f(z0), stopping when successive stage vectors
/// differ by less than tol (two-norm).
template <class H, class T>
StepResult<T> gauss4_step(const H& h, const State<T>& s, T step, double tol, int max_iters) {
    const auto tab = gauss4_tableau<T>();
    const std::size_t n = 2 * s.dim();
    const std::vector<T> z0 = detail::flatten(s);
    std::vector<T> f1(n), f2(n), y1(n), y2(n), Z1(n), Z2(n);
    detail::vector_field<H, T>(h, z0, f1);
    for (std::size_t i = 0; i < n; ++i) {
        Z1[i] = tab.c1 * step * f1[i];
        Z2[i] = tab.c2 * step * f1[i];
    }
    T diff(0);
    for (int it = 1; it <= max_iters; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            y1[i] = z0[i] + Z1[i];
            y2[i] = z0[i] + Z2[i];
        }
        detail::vector_field<H, T>(h, y1, f1);
        detail::vector_field<H, T>(h, y2, f2);
        diff = T(0);
        for (std::size_t i = 0; i < n; ++i) {
            const T n1 = step * (tab.a11 * f1[i] + tab.a12 * f2[i]);
            const T n2 = step * (tab.a21 * f1[i] + tab.a22 * f2[i]);
            diff += (n1 - Z1[i]) * (n1 - Z1[i]) + (n2 - Z2[i]) * (n2 - Z2[i]);
            Z1[i] = n1;
            Z2[i] = n2;
        }
        using std::sqrt;
        diff = sqrt(diff);
        if (diff < static_cast<T>(tol)) {
            std::vector<T> z1(n);
            for (std::size_t i = 0; i < n; ++i) z1[i] = z0[i] + step * (tab.b1 * f1[i] + tab.b2 * f2[i]);
            StepResult<T> r;
            r.state = detail::unflatten<T>(z1);
            r.extended = embed(r.state);
            r.iterations_used = it;
            return r;
        }
    }
    throw ConvergenceError("gauss4 non-convergence after " + std::to_string(max_iters) + " iterations, residual " +
                               detail::fmt_double(static_cast<double>(diff)),
                           static_cast<double>(diff), max_iters);
}

/// Symmetric projection: find rho in R^{2d} with
///   A [Phi_h(embed(s) + A^T rho) + A^T rho] = 0,
/// A(p,x,q,y) = (p - x, q - y), A^T rho = (rho_p, -rho_p, rho_q, -rho_q).
/// Broyden's method from rho = 0 with the h -> 0 Jacobian 4I; converged when
/// the residual norm drops below tol.
template <class H, class T>
StepResult<T> semiexplicit_step(const H& h, const State<T>& s, T step, int order, double tol, int max_iters) {
    const std::size_t d = s.dim();
    const auto n = static_cast<Eigen::Index>(2 * d);
    using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
    const ExtendedState<T> e0 = embed(s);

    ExtendedState<T> z;
    auto residual = [&](const Vec& rho) {
        z = e0;
        for (std::size_t k = 0; k < d; ++k) {
            const T rp = rho(static_cast<Eigen::Index>(k)), rq = rho(static_cast<Eigen::Index>(d + k));
            z.p[k] += rp;
            z.x[k] -= rp;
            z.q[k] += rq;
            z.y[k] -= rq;
        }
        apply_extended_base(h, z, step, order);
        Vec F(n);
        for (std::size_t k = 0; k < d; ++k) {
            const T rp = rho(static_cast<Eigen::Index>(k)), rq = rho(static_cast<Eigen::Index>(d + k));
            z.p[k] += rp;
            z.x[k] -= rp;
            z.q[k] += rq;
            z.y[k] -= rq;
            F(static_cast<Eigen::Index>(k)) = z.p[k] - z.x[k];
            F(static_cast<Eigen::Index>(d + k)) = z.q[k] - z.y[k];
        }
        return F;
    };

    Vec rho = Vec::Zero(n);
    Vec F = residual(rho);
    StepResult<T> r;
    // Residual of the unprojected step: A Phi_h(embed(s)).
    r.discrepancy_pre_projection = F.norm();
    Mat Binv = Mat::Identity(n, n) / T(4);
    T res = F.norm();
    int it = 1;
    while (!(res < static_cast<T>(tol))) {
        if (it >= max_iters) {
            throw ConvergenceError("semiexplicit non-convergence after " + std::to_string(max_iters) +
                                       " iterations, residual " + detail::fmt_double(static_cast<double>(res)),
                                   static_cast<double>(res), max_iters);
        }
        const Vec ds = -Binv * F;
        rho += ds;
        const Vec Fn = residual(rho);
        ++it;
        const Vec y = Fn - F;
        const Vec By = Binv * y;
        const T denom = ds.dot(By);
        if (denom != T(0)) Binv += ((ds - By) * (ds.transpose() * Binv)) / denom;
        F = Fn;
        res = F.norm();
    }
    r.extended = z;
    r.state = State<T>(d);
    for (std::size_t k = 0; k < d; ++k) {
        r.state.p[k] = (z.p[k] + z.x[k]) / T(2);
        r.state.q[k] = (z.q[k] + z.y[k]) / T(2);
    }
    r.iterations_used = it;
    return r;
}

/// z1 = z0 + h f(z0): first order, not symplectic. Used as a control.
template <class H, class T>
StepResult<T> explicit_euler_step(const H& h, const State<T>& s, T step) {
    std::vector<T> z = detail::flatten(s);
    std::vector<T> f(z.size());
    detail::vector_field<H, T>(h, z, f);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += step * f[i];
    StepResult<T> r;
    r.state = detail::unflatten<T>(z);
    r.extended = embed(r.state);
    return r;
}

// ---------------------------------------------------------------------------
// Stateful stepper.

/// Uniform doubles in [0, 1) from the top 53 bits of std::mt19937_64, whose
/// output sequence is fixed by the standard for a given seed.
class UniformSource {
public:
    explicit UniformSource(std::uint64_t seed) : gen_(seed) {}
    double operator()() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 gen_;
};

/// Carries what a method needs between steps: the step counter (for factor
/// alternation), the random weight source, and the raw doubled state for the
/// families that never re-embed.
template <class H, class T = double>
class Stepper {
public:
    Stepper(const H& h, IntegratorSpec spec, State<T> s0)
        : h_(h), spec_(std::move(spec)), state_(std::move(s0)), rng_(spec_.rng_seed) {
        spec_.validate(state_.dim());
        extended_ = embed(state_);
    }

    /// Advances one step; returns the step result (state after projection).
    const StepResult<T>& step(T dt) {
        ++count_;
        switch (spec_.family) {
            case Family::exp_symp:
                last_ = exp_symp_step(h_, state_, dt, spec_, count_);
                break;
            case Family::weighted_projection:
                last_ = weighted_projection_step(h_, state_, dt, spec_.order, current_weights(), spec_.projection);
                break;
            case Family::semiexplicit:
                last_ = semiexplicit_step(h_, state_, dt, spec_.order, spec_.tol, spec_.max_iters);
                break;
            case Family::implicit_midpoint:
                last_ = implicit_midpoint_step(h_, state_, dt, spec_.tol, spec_.max_iters);
                break;
            case Family::gauss4:
                last_ = gauss4_step(h_, state_, dt, spec_.tol, spec_.max_iters);
                break;
            case Family::explicit_euler:
                last_ = explicit_euler_step(h_, state_, dt);
                break;
            case Family::pihajoki:
            case Family::pihajoki_midmix:
                extended_ = pihajoki_step(h_, std::move(extended_), dt,
                                          spec_.family == Family::pihajoki ? Mixing::none
                                                                            : Mixing::midpoint_permutation,
                                          spec_.order);
                raw_result();
                break;
            case Family::tao:
                extended_ = tao_run_step(h_, std::move(extended_), dt, spec_.omega, spec_.order);
                raw_result();
                break;
        }
        if (!spec_.carries_extended_state()) {
            state_ = last_.state;
            extended_ = last_.extended;
        }
        iterations_ += static_cast<std::uint64_t>(last_.iterations_used);
        return last_;
    }

    const State<T>& state() const { return state_; }
    /// Doubled state: the carried one for raw families, the latest
    /// pre-projection one otherwise.
    const ExtendedState<T>& extended() const { return extended_; }
    std::size_t steps_taken() const { return count_; }
    std::uint64_t total_iterations() const { return iterations_; }
    const IntegratorSpec& spec() const { return spec_; }

    /// Replaces the current point (used by two-trajectory diagnostics).
    void reset_state(State<T> s) {
        state_ = std::move(s);
        extended_ = embed(state_);
    }
    void reset_extended(ExtendedState<T> e) {
        extended_ = std::move(e);
        state_ = State<T>(extended_.p, extended_.q);
    }

private:
    void raw_result() {
        state_ = State<T>(extended_.p, extended_.q);
        last_.state = state_;
        last_.extended = extended_;
        last_.iterations_used = 1;
        last_.discrepancy_pre_projection = discrepancy(extended_);
    }

    const WeightVectors& current_weights() {
        const bool odd = (count_ % 2) == 1;
        switch (spec_.weight_policy) {
            case WeightPolicy::constant:
                return spec_.weights;
            case WeightPolicy::alternating:
                if (odd) return spec_.weights;
                swapped_ = WeightVectors{spec_.weights.xi, spec_.weights.lambda};
                return swapped_;
            case WeightPolicy::fresh_random_per_step:
                if (odd) {
                    const std::size_t d = state_.dim();
                    drawn_.lambda.resize(d);
                    drawn_.xi.resize(d);
                    for (std::size_t k = 0; k < d; ++k) {
                        drawn_.lambda[k] = rng_();
                        drawn_.xi[k] = rng_();
                    }
                    return drawn_;
                }
                swapped_ = WeightVectors{drawn_.xi, drawn_.lambda};
                return swapped_;
        }
        return spec_.weights;
    }

    const H& h_;
    IntegratorSpec spec_;
    State<T> state_;
    ExtendedState<T> extended_;
    StepResult<T> last_;
    std::size_t count_ = 0;
    std::uint64_t iterations_ = 0;
    UniformSource rng_;
    WeightVectors drawn_, swapped_;
};

// ---------------------------------------------------------------------------
// Run driver.

struct SampleContext {
    std::size_t step;
    double t;
    const State<double>& state;
    const ExtendedState<double>& extended;
};

struct RunHooks {
    /// Sample every stride-th step (and the final step).
    std::size_t stride = 1;
    /// Reference states aligned with the samples; GE is recorded when present.
    std::vector<State<double>> reference;
    /// First integral vector (e.g. total angular momentum); J drift is
    /// recorded when present.
    std::function<std::array<double, 3>(const State<double>&)> invariant;
    std::function<void(const SampleContext&)> on_sample;
    std::string problem_name;
};

/// Step indices at which integrate() samples.
inline std::vector<std::size_t> sample_steps(std::size_t n_steps, std::size_t stride) {
    std::vector<std::size_t> out;
    for (std::size_t n = stride; n <= n_steps; n += stride) out.push_back(n);
    if (out.empty() || out.back() != n_steps) out.push_back(n_steps);
    return out;
}

inline double global_error(const State<double>& num, const State<double>& ref);

/// Applies the specified step n_steps times from s0 with step size h and
/// records diagnostics every hooks.stride steps. A failing step aborts the
/// run with a StepError carrying its 1-based index.
template <class H>
RunRecord integrate(const H& h, const State<double>& s0, const IntegratorSpec& spec, double dt, std::size_t n_steps,
                    const RunHooks& hooks = {}) {
    if (n_steps < 1) throw ConfigError("n_steps must be >= 1");
    if (hooks.stride < 1) throw ConfigError("stride must be >= 1");
    const auto started = std::chrono::steady_clock::now();
    Stepper<H, double> stepper(h, spec, s0);
    const double h0 = evaluate(h, s0);
    std::optional<std::array<double, 3>> j0;
    if (hooks.invariant) j0 = hooks.invariant(s0);

    RunRecord rec;
    rec.meta.method = spec.name();
    rec.meta.problem = hooks.problem_name;
    rec.meta.h = dt;
    rec.meta.seed = spec.rng_seed;
    rec.meta.n_steps = n_steps;
    rec.meta.stride = hooks.stride;
    rec.samples.reserve(n_steps / hooks.stride + 1);

    for (std::size_t n = 1; n <= n_steps; ++n) {
        try {
            stepper.step(dt);
        } catch (const ConvergenceError& err) {
            throw StepError(std::string(err.what()) + " at step " + std::to_string(n), n, true);
        } catch (const Error& err) {
            throw StepError(std::string(err.what()) + " at step " + std::to_string(n), n, false);
        }
        if (n % hooks.stride != 0 && n != n_steps) continue;
        const double t = static_cast<double>(n) * dt;
        const State<double>& s = stepper.state();
        Sample smp;
        smp.t = t;
        smp.ghe = std::abs(evaluate(h, s) - h0);
        smp.delta = discrepancy(stepper.extended());
        const std::size_t idx = rec.samples.size();
        if (idx < hooks.reference.size()) smp.ge = global_error(s, hooks.reference[idx]);
        if (j0) {
            const auto j = hooks.invariant(s);
            smp.j_drift = std::array<double, 3>{std::abs(j[0] - (*j0)[0]), std::abs(j[1] - (*j0)[1]),
                                                std::abs(j[2] - (*j0)[2])};
        }
        rec.samples.push_back(smp);
        if (hooks.on_sample) hooks.on_sample(SampleContext{n, t, s, stepper.extended()});
    }
    rec.meta.total_iterations = stepper.total_iterations();
    rec.meta.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return rec;
}

/// ||(p, q) - (p_ref, q_ref)||_2
inline double global_error(const State<double>& num, const State<double>& ref) {
    double s = 0.0;
    for (std::size_t k = 0; k < num.dim(); ++k) {
        const double dp = num.p[k] - ref.p[k];
        const double dq = num.q[k] - ref.q[k];
        s += dp * dp + dq * dq;
    }
    return std::sqrt(s);
}

}  // namespace xsymp
