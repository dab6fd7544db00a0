#pragma once

// Benchmark Hamiltonians and cross-validated reference solutions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "autodiff.hpp"
#include "errors.hpp"
#include "integrators.hpp"
#include "state.hpp"

namespace xsymp {

/// H(p, q) = (1 + p^2)(1 + q^2) / 2, d = 1. Integrable, nonseparable.
struct Integrable1D {
    std::size_t dimension() const { return 1; }

    template <class S>
    S operator()(std::span<const S> p, std::span<const S> q) const {
        return S(0.5) * (S(1) + p[0] * p[0]) * (S(1) + q[0] * q[0]);
    }

    static State<double> default_initial() { return State<double>({0.0}, {-3.0}); }
};

/// H = (|p|^2 + |q|^2) / 2 in d dimensions.
struct HarmonicOscillator {
    std::size_t d = 1;

    std::size_t dimension() const { return d; }

    template <class S>
    S operator()(std::span<const S> p, std::span<const S> q) const {
        S sum(0);
        for (std::size_t k = 0; k < d; ++k) sum += p[k] * p[k] + q[k] * q[k];
        return S(0.5) * sum;
    }
};

/// Which post-Newtonian pieces enter the sum. Turning all corrections off
/// leaves the Kepler term.
struct PNTerms {
    bool pn1 = true;
    bool pn2 = true;
    bool spin_orbit = true;
    bool spin_spin = true;

    static PNTerms newtonian() { return {false, false, false, false}; }
};

struct PNParams {
    double beta = 1.0;     ///< mass ratio m1/m2 in (0, 1]
    double c = 1.0;        ///< rescaled speed of light
    double Lambda1 = 0.0;  ///< spin magnitudes
    double Lambda2 = 0.0;
    /// Accept |xi_i| = Lambda_i (spin along z, rho_i = 0; theta_i is then a
    /// gauge angle and the rho derivative is taken as 0).
    bool allow_pole = false;
    PNTerms terms;

    void validate() const {
        if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in (0, 1]");
        if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("c must be positive and finite");
        if (!(Lambda1 >= 0.0) || !(Lambda2 >= 0.0) || !std::isfinite(Lambda1) || !std::isfinite(Lambda2))
            throw ConfigError("spin magnitudes must be finite and >= 0");
    }
};

namespace detail {

/// rho = sqrt(Lambda^2 - xi^2) with the domain check; at the pole (allowed
/// only on request) the value and derivative are both 0.
template <class S>
S spin_rho(double Lambda, const S& xi, bool allow_pole, std::ptrdiff_t coordinate) {
    const S r2 = S(Lambda * Lambda) - xi * xi;
    const auto v = value_of(r2);
    const auto xv = value_of(xi);
    using std::abs;
    if (abs(xv) > static_cast<decltype(xv)>(Lambda) || v < 0)
        throw DomainError("spin component |xi| exceeds its magnitude Lambda", coordinate);
    if (v == 0 || abs(xv) == static_cast<decltype(xv)>(Lambda)) {
        if (!allow_pole && Lambda != 0.0)
            throw DomainError("spin on the pole |xi| = Lambda is only allowed for presets", coordinate);
        return S(0);
    }
    using std::sqrt;
    return sqrt(r2);
}

template <class S>
using Vec3 = std::array<S, 3>;

template <class S>
S dot(const Vec3<S>& a, const Vec3<S>& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

template <class S>
Vec3<S> cross(const Vec3<S>& a, const Vec3<S>& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

}  // namespace detail

/// S_i = (rho_i cos theta_i, rho_i sin theta_i, xi_i), rho_i = sqrt(Lambda_i^2 - xi_i^2).
inline std::pair<std::array<double, 3>, std::array<double, 3>> spin_from_canonical(
    std::span<const double> theta, std::span<const double> xi, std::span<const double> Lambda,
    bool allow_pole = false) {
    std::array<std::array<double, 3>, 2> s{};
    for (std::size_t i = 0; i < 2; ++i) {
        const double rho = detail::spin_rho(Lambda[i], xi[i], allow_pole, static_cast<std::ptrdiff_t>(3 + i));
        s[i] = {rho * std::cos(theta[i]), rho * std::sin(theta[i]), xi[i]};
    }
    return {s[0], s[1]};
}

/// Spinning compact binary to 2PN order in canonical spin variables.
/// Momenta p = (P1, P2, P3, xi1, xi2), positions q = (Q1, Q2, Q3, theta1, theta2).
class PNBinary {
public:
    PNBinary() = default;
    explicit PNBinary(PNParams params) : prm_(params) { prm_.validate(); }

    std::size_t dimension() const { return 5; }
    const PNParams& params() const { return prm_; }
    double eta() const { return prm_.beta / ((1.0 + prm_.beta) * (1.0 + prm_.beta)); }

    template <class S>
    S operator()(std::span<const S> p, std::span<const S> q) const {
        using detail::Vec3;
        using std::cos, std::sin, std::sqrt;
        const Vec3<S> P{p[0], p[1], p[2]};
        const Vec3<S> Q{q[0], q[1], q[2]};
        const S r2 = detail::dot(Q, Q);
        if (value_of(r2) == 0) throw DomainError("PN Hamiltonian evaluated at r = 0");
        const S r = sqrt(r2);
        const S ir = S(1) / r;
        const S P2 = detail::dot(P, P);

        S H = P2 / S(2) - ir;

        const PNTerms& g = prm_.terms;
        if (!(g.pn1 || g.pn2 || g.spin_orbit || g.spin_spin)) return H;

        const double eta = this->eta();
        const double ic = 1.0 / prm_.c;
        const double ic2 = ic * ic, ic3 = ic2 * ic, ic4 = ic2 * ic2;
        const Vec3<S> N{Q[0] * ir, Q[1] * ir, Q[2] * ir};
        const S NP = detail::dot(N, P);
        const S NP2 = NP * NP;
        const S P4 = P2 * P2;

        if (g.pn1) {
            const S h1 = S((3.0 * eta - 1.0) / 8.0) * P4 - S(0.5) * (S(3.0 + eta) * P2 + S(eta) * NP2) * ir +
                         S(0.5) * ir * ir;
            H += S(ic2) * h1;
        }
        if (g.pn2) {
            const S P6 = P4 * P2;
            const S h2 = S((1.0 - 5.0 * eta + 5.0 * eta * eta) / 16.0) * P6 +
                         S(1.0 / 8.0) *
                             (S(5.0 - 20.0 * eta - 3.0 * eta * eta) * P4 - S(2.0 * eta * eta) * NP2 * P2 -
                              S(3.0 * eta * eta) * NP2 * NP2) *
                             ir +
                         S(0.5) * (S(5.0 + 8.0 * eta) * P2 + S(3.0 * eta) * NP2) * ir * ir -
                         S(0.25 * (1.0 + 3.0 * eta)) * ir * ir * ir;
            H += S(ic4) * h2;
        }
        if (g.spin_orbit || g.spin_spin) {
            const S rho1 = detail::spin_rho(prm_.Lambda1, p[3], prm_.allow_pole, 3);
            const S rho2 = detail::spin_rho(prm_.Lambda2, p[4], prm_.allow_pole, 4);
            const Vec3<S> S1{rho1 * cos(q[3]), rho1 * sin(q[3]), p[3]};
            const Vec3<S> S2{rho2 * cos(q[4]), rho2 * sin(q[4]), p[4]};
            const double b = prm_.beta;
            const S ir3 = ir * ir * ir;
            if (g.spin_orbit) {
                // 2 S + 3/2 S*, with S = S1 + S2 and S* = S1 / beta + beta S2
                Vec3<S> w;
                for (int k = 0; k < 3; ++k) w[k] = S(2.0 + 1.5 / b) * S1[k] + S(2.0 + 1.5 * b) * S2[k];
                const Vec3<S> L = detail::cross(Q, P);
                H += S(ic3) * detail::dot(w, L) * ir3;
            }
            if (g.spin_spin) {
                Vec3<S> S0;
                for (int k = 0; k < 3; ++k) S0[k] = S(1.0 + 1.0 / b) * S1[k] + S(1.0 + b) * S2[k];
                const S S0N = detail::dot(S0, N);
                H += S(ic4) * (S(3) * S0N * S0N - detail::dot(S0, S0)) * ir3 / S(2);
            }
        }
        return H;
    }

    /// (S1, S2) at a canonical state.
    std::pair<std::array<double, 3>, std::array<double, 3>> spins(const State<double>& z) const {
        const std::array<double, 2> th{z.q[3], z.q[4]}, xi{z.p[3], z.p[4]};
        const std::array<double, 2> La{prm_.Lambda1, prm_.Lambda2};
        return spin_from_canonical(th, xi, La, prm_.allow_pole);
    }

    /// J = Q x P + S1 + S2.
    std::array<double, 3> total_angular_momentum(const State<double>& z) const {
        const detail::Vec3<double> Q{z.q[0], z.q[1], z.q[2]}, P{z.p[0], z.p[1], z.p[2]};
        const auto L = detail::cross(Q, P);
        const auto [S1, S2] = spins(z);
        return {L[0] + S1[0] + S2[0], L[1] + S1[1] + S2[1], L[2] + S1[2] + S2[2]};
    }

    /// Canonical state from Cartesian orbit data and canonical spin angles.
    static State<double> make_state(std::array<double, 3> Q, std::array<double, 3> P, std::array<double, 2> theta,
                                    std::array<double, 2> xi) {
        return State<double>({P[0], P[1], P[2], xi[0], xi[1]}, {Q[0], Q[1], Q[2], theta[0], theta[1]});
    }

private:
    PNParams prm_;
};

struct TrajectoryPreset {
    std::string name;
    PNParams params;
    State<double> initial;

    PNBinary hamiltonian() const { return PNBinary(params); }
};

/// The two published trajectories. Accepts "traj1_regular"/"traj1" and
/// "traj2_chaotic"/"traj2".
inline TrajectoryPreset pn_preset(const std::string& name) {
    TrajectoryPreset t;
    if (name == "traj1_regular" || name == "traj1") {
        t.name = "traj1_regular";
        t.params.beta = 0.28;
        t.params.c = std::sqrt(10.0);
        t.params.Lambda1 = 0.0479;
        t.params.Lambda2 = 0.6104;
        t.params.allow_pole = true;
        t.initial = PNBinary::make_state({25.34, 0, 0}, {0, 0.18, 0}, {1.2490, 0.6202}, {0.0445, 0.6104});
    } else if (name == "traj2_chaotic" || name == "traj2") {
        t.name = "traj2_chaotic";
        t.params.beta = 1.0;
        t.params.c = 1.0;
        t.params.Lambda1 = 0.25;
        t.params.Lambda2 = 0.25;
        t.params.allow_pole = true;
        t.initial = PNBinary::make_state({8.31, 0, 0}, {0, 0.50, 0}, {0.7587, 0.8469}, {-0.2459, -0.2459});
    } else {
        throw ConfigError("unknown PN preset '" + name + "' (expected traj1_regular or traj2_chaotic)");
    }
    return t;
}

// ---------------------------------------------------------------------------
// Reference solutions.

struct ReferenceOptions {
    /// Reference step is h_run / fine_factor; the check run uses
    /// h_run / check_factor.
    std::size_t fine_factor = 50;
    std::size_t check_factor = 100;
    /// Maximum tolerated two-norm disagreement between the two runs.
    double agreement = 1e-10;
    /// Run the check integration at all.
    bool cross_validate = true;
    /// Fixed-point tolerance of the extended-precision collocation solve.
    long double iteration_tol = 1e-17L;
    int max_iters = 200;
};

namespace detail {

template <class T>
double distance(const State<T>& a, const State<T>& b) {
    long double s = 0;
    for (std::size_t k = 0; k < a.dim(); ++k) {
        const long double dp = a.p[k] - b.p[k], dq = a.q[k] - b.q[k];
        s += dp * dp + dq * dq;
    }
    return static_cast<double>(std::sqrt(s));
}

template <class H>
void advance_gauss4(const H& h, State<long double>& z, long double step, std::size_t count,
                    const ReferenceOptions& opt) {
    for (std::size_t k = 0; k < count; ++k)
        z = gauss4_step<H, long double>(h, z, step, static_cast<double>(opt.iteration_tol), opt.max_iters).state;
}

}  // namespace detail

/// High-accuracy states at t = n * h_run for each n in grid_steps (sorted,
/// non-decreasing), from the two-stage Gauss method in extended precision
/// at h_run / fine_factor. With cross_validate, a second run at
/// h_run / check_factor advances alongside and must agree to
/// opt.agreement at every grid point, else ReferenceUnreliable names the
/// first failing time.
template <class H>
std::vector<State<double>> reference_solution(const H& h, const State<double>& s0, double h_run,
                                              const std::vector<std::size_t>& grid_steps,
                                              const ReferenceOptions& opt = {}) {
    if (!(h_run > 0.0)) throw ConfigError("reference step must be positive");
    if (!std::is_sorted(grid_steps.begin(), grid_steps.end())) throw ConfigError("reference grid must be sorted");
    if (opt.fine_factor < 1 || opt.check_factor < 1) throw ConfigError("refinement factors must be >= 1");
    const long double H0 = static_cast<long double>(h_run);
    const long double hf = H0 / static_cast<long double>(opt.fine_factor);
    const long double hc = H0 / static_cast<long double>(opt.check_factor);
    State<long double> fine = state_cast<long double>(s0), check = fine;
    std::vector<State<double>> out;
    out.reserve(grid_steps.size());
    std::size_t done = 0;
    for (const std::size_t target : grid_steps) {
        const std::size_t n = target - done;
        detail::advance_gauss4(h, fine, hf, n * opt.fine_factor, opt);
        if (opt.cross_validate) {
            detail::advance_gauss4(h, check, hc, n * opt.check_factor, opt);
            const double dist = detail::distance(fine, check);
            if (!(dist <= opt.agreement)) {
                const double t = static_cast<double>(target) * h_run;
                char buf[160];
                std::snprintf(buf, sizeof buf, "reference runs disagree by %.3e at t = %.17g (limit %.1e)", dist, t,
                              opt.agreement);
                throw ReferenceUnreliable(buf, t, dist);
            }
        }
        done = target;
        out.push_back(state_cast<double>(fine));
    }
    return out;
}

/// Reference states aligned with the samples integrate() records for a run
/// of n_steps at stride.
template <class H>
std::vector<State<double>> reference_for_run(const H& h, const State<double>& s0, double h_run, std::size_t n_steps,
                                             std::size_t stride, const ReferenceOptions& opt = {}) {
    return reference_solution(h, s0, h_run, sample_steps(n_steps, stride), opt);
}

}  // namespace xsymp
