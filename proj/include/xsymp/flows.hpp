#pragma once

// Exact flows of the three pieces of the doubled Hamiltonian
//   Gamma(p,x,q,y) = H(p,y) + H(x,q) + omega/2 (|p-x|^2 + |q-y|^2).
// Each piece is explicitly solvable, so every splitting built from them is
// explicit and symplectic in the doubled space.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "autodiff.hpp"
#include "errors.hpp"
#include "phase.hpp"
#include "state.hpp"

namespace xsymp {

/// Strength omega >= 0 of the coupling term; zero disables it.
struct MixingStrength {
    double omega = 0.0;

    MixingStrength() = default;
    explicit MixingStrength(double w) : omega(w) {
        if (!std::isfinite(w) || w < 0.0) throw ConfigError("mixing strength omega must be finite and >= 0");
    }
};

namespace detail {

template <class T>
struct GradBuffer {
    std::vector<T> hp, hq;
    void resize(std::size_t d) {
        hp.resize(d);
        hq.resize(d);
    }
};

template <class T>
GradBuffer<T>& grad_buffer(std::size_t d) {
    thread_local GradBuffer<T> buf;
    buf.resize(d);
    return buf;
}

}  // namespace detail

/// In-place flow of H_A(p, y) = H(p, y) for time t: p and y are frozen,
/// x -= t H_q(p, y), q += t H_p(p, y).
template <class H, class T>
void apply_flow_A(const H& h, ExtendedState<T>& e, T t) {
    auto& g = detail::grad_buffer<T>(e.dim());
    gradient_into<H, T>(h, e.p, e.y, g.hp, g.hq);
    for (std::size_t k = 0; k < e.dim(); ++k) {
        e.x[k] -= t * g.hq[k];
        e.q[k] += t * g.hp[k];
    }
}

/// In-place flow of H_B(x, q) = H(x, q): x and q frozen,
/// p -= t H_q(x, q), y += t H_p(x, q).
template <class H, class T>
void apply_flow_B(const H& h, ExtendedState<T>& e, T t) {
    auto& g = detail::grad_buffer<T>(e.dim());
    gradient_into<H, T>(h, e.x, e.q, g.hp, g.hq);
    for (std::size_t k = 0; k < e.dim(); ++k) {
        e.p[k] -= t * g.hq[k];
        e.y[k] += t * g.hp[k];
    }
}

/// In-place flow of the coupling term: sums p+x and q+y are invariant and
/// the differences (p-x, q-y) rotate rigidly at angular rate 2 omega.
template <class T>
void apply_flow_C(ExtendedState<T>& e, const MixingStrength& omega, T t) {
    if (omega.omega == 0.0) return;
    using std::cos, std::sin;
    const T angle = T(2) * static_cast<T>(omega.omega) * t;
    const T c = cos(angle), s = sin(angle);
    for (std::size_t k = 0; k < e.dim(); ++k) {
        const T sp = e.p[k] + e.x[k], sq = e.q[k] + e.y[k];
        const T dp = e.p[k] - e.x[k], dq = e.q[k] - e.y[k];
        const T dp1 = c * dp - s * dq;
        const T dq1 = s * dp + c * dq;
        e.p[k] = (sp + dp1) / T(2);
        e.x[k] = (sp - dp1) / T(2);
        e.q[k] = (sq + dq1) / T(2);
        e.y[k] = (sq - dq1) / T(2);
    }
}

template <class H, class T>
ExtendedState<T> flow_A(const H& h, ExtendedState<T> e, T t) {
    apply_flow_A(h, e, t);
    return e;
}

template <class H, class T>
ExtendedState<T> flow_B(const H& h, ExtendedState<T> e, T t) {
    apply_flow_B(h, e, t);
    return e;
}

template <class T>
ExtendedState<T> flow_C(ExtendedState<T> e, const MixingStrength& omega, T t) {
    apply_flow_C(e, omega, t);
    return e;
}

/// H_A(p, y) = H(p, y), conserved by flow_A.
template <class H, class T>
T energy_A(const H& h, const ExtendedState<T>& e) {
    return h(std::span<const T>(e.p), std::span<const T>(e.y));
}

/// H_B(x, q) = H(x, q), conserved by flow_B.
template <class H, class T>
T energy_B(const H& h, const ExtendedState<T>& e) {
    return h(std::span<const T>(e.x), std::span<const T>(e.q));
}

/// Gamma = H(p,y) + H(x,q) + omega/2 (|p-x|^2 + |q-y|^2).
template <class H, class T>
T extended_energy(const H& h, const ExtendedState<T>& e, const MixingStrength& omega = {}) {
    const T delta = discrepancy(e);
    return energy_A(h, e) + energy_B(h, e) + static_cast<T>(omega.omega) / T(2) * delta * delta;
}

/// The doubled Hamiltonian H(p,y) + H(x,q) seen as an ordinary 2d-dimensional
/// canonical system with momenta (p, x) and positions (q, y).
template <class H>
class DoubledHamiltonian {
public:
    explicit DoubledHamiltonian(H h) : h_(std::move(h)) {}

    std::size_t dimension() const { return 2 * h_.dimension(); }

    template <class S>
    S operator()(std::span<const S> P, std::span<const S> Q) const {
        const std::size_t d = h_.dimension();
        return h_(P.first(d), Q.last(d)) + h_(P.last(d), Q.first(d));
    }

    const H& base() const { return h_; }

private:
    H h_;
};

template <class T>
State<T> as_doubled_state(const ExtendedState<T>& e) {
    State<T> s;
    s.p = e.p;
    s.p.insert(s.p.end(), e.x.begin(), e.x.end());
    s.q = e.q;
    s.q.insert(s.q.end(), e.y.begin(), e.y.end());
    return s;
}

template <class T>
ExtendedState<T> from_doubled_state(const State<T>& s) {
    const std::size_t d = s.dim() / 2;
    ExtendedState<T> e(d);
    for (std::size_t k = 0; k < d; ++k) {
        e.p[k] = s.p[k];
        e.x[k] = s.p[d + k];
        e.q[k] = s.q[k];
        e.y[k] = s.q[d + k];
    }
    return e;
}

}  // namespace xsymp
