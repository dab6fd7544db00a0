#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace xsymp {

/// A point (p, q) of the original 2d-dimensional phase space.
template <class T = double>
struct State {
    std::vector<T> p;
    std::vector<T> q;

    State() = default;
    explicit State(std::size_t d) : p(d, T(0)), q(d, T(0)) {}
    State(std::vector<T> p_, std::vector<T> q_) : p(std::move(p_)), q(std::move(q_)) {}

    std::size_t dim() const noexcept { return p.size(); }

    bool operator==(const State&) const = default;
};

/// A point (p, x, q, y) of the doubled phase space. The canonical pairs are
/// (p, q) and (x, y).
template <class T = double>
struct ExtendedState {
    std::vector<T> p;
    std::vector<T> x;
    std::vector<T> q;
    std::vector<T> y;

    ExtendedState() = default;
    explicit ExtendedState(std::size_t d) : p(d, T(0)), x(d, T(0)), q(d, T(0)), y(d, T(0)) {}
    ExtendedState(std::vector<T> p_, std::vector<T> x_, std::vector<T> q_, std::vector<T> y_)
        : p(std::move(p_)), x(std::move(x_)), q(std::move(q_)), y(std::move(y_)) {}

    std::size_t dim() const noexcept { return p.size(); }

    bool operator==(const ExtendedState&) const = default;
};

template <class T>
bool all_finite(std::span<const T> v) {
    for (const T& a : v)
        if (!std::isfinite(static_cast<double>(a))) return false;
    return true;
}

template <class T>
bool all_finite(const State<T>& s) {
    return all_finite<T>(s.p) && all_finite<T>(s.q);
}

template <class T>
bool all_finite(const ExtendedState<T>& e) {
    return all_finite<T>(e.p) && all_finite<T>(e.x) && all_finite<T>(e.q) && all_finite<T>(e.y);
}

/// Converts between scalar precisions (e.g. long double references to double).
template <class To, class From>
State<To> state_cast(const State<From>& s) {
    State<To> r(s.dim());
    for (std::size_t k = 0; k < s.dim(); ++k) {
        r.p[k] = static_cast<To>(s.p[k]);
        r.q[k] = static_cast<To>(s.q[k]);
    }
    return r;
}

}  // namespace xsymp
