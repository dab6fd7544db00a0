#pragma once

// Forward-mode dual numbers. A Hamiltonian written once as a template over
// its scalar type yields exact partial derivatives when evaluated on Dual.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "errors.hpp"
#include "state.hpp"

namespace xsymp {

template <class T>
struct Dual {
    T value{};
    T deriv{};

    constexpr Dual() = default;
    constexpr Dual(T v) : value(v), deriv(0) {}  // NOLINT: implicit lift of constants
    constexpr Dual(T v, T d) : value(v), deriv(d) {}

    static constexpr Dual variable(T v) { return Dual(v, T(1)); }

    constexpr Dual& operator+=(const Dual& o) {
        value += o.value;
        deriv += o.deriv;
        return *this;
    }
    constexpr Dual& operator-=(const Dual& o) {
        value -= o.value;
        deriv -= o.deriv;
        return *this;
    }
    constexpr Dual& operator*=(const Dual& o) {
        deriv = deriv * o.value + value * o.deriv;
        value *= o.value;
        return *this;
    }
    constexpr Dual& operator/=(const Dual& o) {
        deriv = (deriv * o.value - value * o.deriv) / (o.value * o.value);
        value /= o.value;
        return *this;
    }

    constexpr Dual operator-() const { return Dual(-value, -deriv); }
    constexpr Dual operator+() const { return *this; }

    explicit constexpr operator T() const { return value; }
};

template <class T> constexpr Dual<T> operator+(Dual<T> a, const Dual<T>& b) { return a += b; }
template <class T> constexpr Dual<T> operator-(Dual<T> a, const Dual<T>& b) { return a -= b; }
template <class T> constexpr Dual<T> operator*(Dual<T> a, const Dual<T>& b) { return a *= b; }
template <class T> constexpr Dual<T> operator/(Dual<T> a, const Dual<T>& b) { return a /= b; }

// Mixed operations deduce T from the dual operand only, so literals of any
// arithmetic type combine with Dual<long double> as well as Dual<double>.
template <class T> using Real = std::type_identity_t<T>;

template <class T> constexpr Dual<T> operator+(Dual<T> a, Real<T> b) { a.value += b; return a; }
template <class T> constexpr Dual<T> operator+(Real<T> a, Dual<T> b) { b.value += a; return b; }
template <class T> constexpr Dual<T> operator-(Dual<T> a, Real<T> b) { a.value -= b; return a; }
template <class T> constexpr Dual<T> operator-(Real<T> a, const Dual<T>& b) { return Dual<T>(a - b.value, -b.deriv); }
template <class T> constexpr Dual<T> operator*(const Dual<T>& a, Real<T> b) { return Dual<T>(a.value * b, a.deriv * b); }
template <class T> constexpr Dual<T> operator*(Real<T> a, const Dual<T>& b) { return Dual<T>(a * b.value, a * b.deriv); }
template <class T> constexpr Dual<T> operator/(const Dual<T>& a, Real<T> b) { return Dual<T>(a.value / b, a.deriv / b); }
template <class T> constexpr Dual<T> operator/(Real<T> a, const Dual<T>& b) {
    return Dual<T>(a / b.value, -a * b.deriv / (b.value * b.value));
}

template <class T> constexpr bool operator==(const Dual<T>& a, const Dual<T>& b) { return a.value == b.value; }
template <class T> constexpr auto operator<=>(const Dual<T>& a, const Dual<T>& b) { return a.value <=> b.value; }

template <class T>
Dual<T> sqrt(const Dual<T>& a) {
    using std::sqrt;
    const T s = sqrt(a.value);
    // d/dx sqrt at 0 is only finite when the tangent vanishes.
    if (s == T(0) && a.deriv == T(0)) return Dual<T>(s, T(0));
    return Dual<T>(s, a.deriv / (T(2) * s));
}

template <class T>
Dual<T> sin(const Dual<T>& a) {
    using std::cos, std::sin;
    return Dual<T>(sin(a.value), a.deriv * cos(a.value));
}

template <class T>
Dual<T> cos(const Dual<T>& a) {
    using std::cos, std::sin;
    return Dual<T>(cos(a.value), -a.deriv * sin(a.value));
}

template <class T>
Dual<T> exp(const Dual<T>& a) {
    using std::exp;
    const T e = exp(a.value);
    return Dual<T>(e, a.deriv * e);
}

template <class T>
Dual<T> log(const Dual<T>& a) {
    using std::log;
    return Dual<T>(log(a.value), a.deriv / a.value);
}

template <class T>
bool isfinite(const Dual<T>& a) {
    return std::isfinite(static_cast<double>(a.value)) && std::isfinite(static_cast<double>(a.deriv));
}

template <class T> struct is_dual : std::false_type {};
template <class T> struct is_dual<Dual<T>> : std::true_type {};

/// Underlying real type of a (possibly dual) scalar.
template <class T> struct real_of { using type = T; };
template <class T> struct real_of<Dual<T>> { using type = T; };
template <class T> using real_of_t = typename real_of<T>::type;

/// Real part of a plain or dual scalar.
template <class T>
constexpr real_of_t<T> value_of(const T& a) {
    if constexpr (is_dual<T>::value) return a.value;
    else return a;
}

/// Integer power by repeated squaring; n may be negative.
template <class S>
S powi(const S& x, int n) {
    if (n < 0) return S(1) / powi(x, -n);
    S result(1);
    S base = x;
    while (n > 0) {
        if (n & 1) result = result * base;
        base = base * base;
        n >>= 1;
    }
    return result;
}

/// A Hamiltonian is any object with a fixed dimension d and a call operator
/// templated over the scalar type, evaluating H(p, q) for spans of length d.
template <class H, class S = double>
concept HamiltonianFor = requires(const H& h, std::span<const S> p, std::span<const S> q) {
    { h.dimension() } -> std::convertible_to<std::size_t>;
    { h(p, q) } -> std::convertible_to<S>;
};

template <class H>
concept Hamiltonian = HamiltonianFor<H, double> && HamiltonianFor<H, Dual<double>>;

template <class T>
struct Gradient {
    std::vector<T> dHdp;
    std::vector<T> dHdq;
};

/// Fills dHdp, dHdq with the gradient of h at (p, q) using 2d directional
/// passes, momenta seeded first. Throws DomainError naming the seeded
/// coordinate on a non-finite value or derivative.
template <class H, class T>
void gradient_into(const H& h, std::span<const T> p, std::span<const T> q, std::span<T> dHdp,
                   std::span<T> dHdq) {
    const std::size_t d = p.size();
    thread_local std::vector<Dual<T>> pd, qd;
    pd.resize(d);
    qd.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
        pd[k] = Dual<T>(p[k]);
        qd[k] = Dual<T>(q[k]);
    }
    for (std::size_t c = 0; c < 2 * d; ++c) {
        Dual<T>& seed = c < d ? pd[c] : qd[c - d];
        seed.deriv = T(1);
        const Dual<T> r = h(std::span<const Dual<T>>(pd), std::span<const Dual<T>>(qd));
        seed.deriv = T(0);
        if (!isfinite(r)) {
            throw DomainError("non-finite Hamiltonian value or derivative while seeding coordinate " +
                                  std::to_string(c),
                              static_cast<std::ptrdiff_t>(c));
        }
        (c < d ? dHdp[c] : dHdq[c - d]) = r.deriv;
    }
}

/// Full gradient (H_p, H_q) of h at z.
template <class H, class T>
Gradient<T> grad(const H& h, const State<T>& z) {
    Gradient<T> g{std::vector<T>(z.dim()), std::vector<T>(z.dim())};
    gradient_into<H, T>(h, z.p, z.q, g.dHdp, g.dHdq);
    return g;
}

/// Plain evaluation of h at z.
template <class H, class T>
T evaluate(const H& h, const State<T>& z) {
    return h(std::span<const T>(z.p), std::span<const T>(z.q));
}

}  // namespace xsymp
