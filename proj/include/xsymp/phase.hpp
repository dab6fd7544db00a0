#pragma once

// Maps between the original phase space and the doubled one: embedding onto
// the diagonal submanifold N = {(p, p, q, q)}, distance from N, and the
// weighted-average projections back onto N.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "state.hpp"

namespace xsymp {

/// Per-component weights for the p-average (lambda) and q-average (xi).
struct WeightVectors {
    std::vector<double> lambda;
    std::vector<double> xi;
};

/// Scalar factors of the single-factor (lambda0 only) and double-factor
/// (alternating lambda0 / mu0) projections.
struct FactorPair {
    double lambda0 = 1.0;
    double mu0 = 1.0;
};

enum class ProjectionMode {
    standard,     ///< p from lambda, q from xi; weights unrestricted
    definition1,  ///< both coordinates from lambda, falling back to xi on (0,0)
};

template <class T>
ExtendedState<T> embed(const State<T>& s) {
    return ExtendedState<T>(s.p, s.p, s.q, s.q);
}

/// ||(p - x, q - y)||_2, zero exactly on N.
template <class T>
T discrepancy(const ExtendedState<T>& e) {
    T sum(0);
    for (std::size_t k = 0; k < e.dim(); ++k) {
        const T dp = e.p[k] - e.x[k];
        const T dq = e.q[k] - e.y[k];
        sum += dp * dp + dq * dq;
    }
    using std::sqrt;
    return sqrt(sum);
}

namespace detail {

template <class T>
T blend(T w, T a, T b) {
    // equal copies stay bit-identical whatever the weight
    if (a == b) return a;
    return w * a + (T(1) - w) * b;
}

}  // namespace detail

template <class T>
State<T> project_single_factor(const ExtendedState<T>& e, const FactorPair& f) {
    const T w = static_cast<T>(f.lambda0);
    State<T> s(e.dim());
    for (std::size_t k = 0; k < e.dim(); ++k) {
        s.p[k] = detail::blend(w, e.p[k], e.x[k]);
        s.q[k] = detail::blend(w, e.q[k], e.y[k]);
    }
    return s;
}

/// Odd steps weight p by lambda0 and q by mu0; even steps swap the factors.
/// The first step of a run has step_index 1.
template <class T>
State<T> project_double_factor(const ExtendedState<T>& e, const FactorPair& f, std::size_t step_index) {
    const bool odd = (step_index % 2) == 1;
    const T wp = static_cast<T>(odd ? f.lambda0 : f.mu0);
    const T wq = static_cast<T>(odd ? f.mu0 : f.lambda0);
    State<T> s(e.dim());
    for (std::size_t k = 0; k < e.dim(); ++k) {
        s.p[k] = detail::blend(wp, e.p[k], e.x[k]);
        s.q[k] = detail::blend(wq, e.q[k], e.y[k]);
    }
    return s;
}

inline void validate_weights(const WeightVectors& w, std::size_t d, ProjectionMode mode) {
    if (w.lambda.size() != d || w.xi.size() != d)
        throw ConfigError("weight vectors must have length " + std::to_string(d));
    for (std::size_t k = 0; k < d; ++k) {
        if (!std::isfinite(w.lambda[k]) || !std::isfinite(w.xi[k]))
            throw ConfigError("weight component " + std::to_string(k) + " is not finite");
        if (mode == ProjectionMode::definition1) {
            const double l = w.lambda[k], x = w.xi[k];
            if (!(l > 0.0 && l < 1.0 && x > 0.0 && x < 1.0))
                throw ConfigError("definition1 weights must lie in (0,1); component " + std::to_string(k));
            if (l == x)
                throw ConfigError("definition1 requires lambda != xi; component " + std::to_string(k));
        }
    }
}

template <class T>
State<T> project_weighted(const ExtendedState<T>& e, const WeightVectors& w, ProjectionMode mode) {
    validate_weights(w, e.dim(), mode);
    State<T> s(e.dim());
    for (std::size_t k = 0; k < e.dim(); ++k) {
        const T l = static_cast<T>(w.lambda[k]);
        const T x = static_cast<T>(w.xi[k]);
        if (mode == ProjectionMode::standard) {
            s.p[k] = detail::blend(l, e.p[k], e.x[k]);
            s.q[k] = detail::blend(x, e.q[k], e.y[k]);
            continue;
        }
        const T P = detail::blend(l, e.p[k], e.x[k]);
        const T Q = detail::blend(l, e.q[k], e.y[k]);
        if (P * P + Q * Q != T(0)) {
            s.p[k] = P;
            s.q[k] = Q;
        } else {
            s.p[k] = detail::blend(x, e.p[k], e.x[k]);
            s.q[k] = detail::blend(x, e.q[k], e.y[k]);
        }
    }
    return s;
}

/// The canonical structure matrix [[0, I], [-I, 0]] of size 2n.
inline Eigen::MatrixXd canonical_J(std::size_t n) {
    const auto m = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    J.topRightCorner(m, m).setIdentity();
    J.bottomLeftCorner(m, m) = -Eigen::MatrixXd::Identity(m, m);
    return J;
}

/// max |(M^T J M - J)_ij|
inline double symplectic_residual(const Eigen::MatrixXd& M) {
    const Eigen::MatrixXd J = canonical_J(static_cast<std::size_t>(M.rows() / 2));
    return (M.transpose() * J * M - J).cwiseAbs().maxCoeff();
}

/// Which coordinate pairs of component k vanish.
enum class ComponentCase : int {
    both_nonzero = 0,   ///< (p,x) != 0 and (q,y) != 0
    momenta_zero = 1,   ///< p = x = 0, (q,y) != 0
    positions_zero = 2, ///< (p,x) != 0, q = y = 0
    all_zero = 3,
};

struct ProjectionMatrix {
    /// Symplectic 4d x 4d matrix in (p, x, q, y) ordering.
    Eigen::MatrixXd M;
    std::vector<ComponentCase> cases;
    /// Number of components handled by each case, indexed by ComponentCase.
    std::array<int, 4> case_counts{};
};

/// Builds a symplectic matrix M with M (p,x,q,y) = (pt, pt, qt, qt), where
/// pt = lambda p + (1-lambda) x and qt = xi q + (1-xi) y componentwise.
/// M is a product of per-component factors, each a shear pair or a block
/// diag(T^-T, T) acting only on that component. Free parameters take the
/// simplest admissible values. Throws DomainError when a component has a
/// nonzero input but the weighted targets pt = qt = 0.
inline ProjectionMatrix weighted_projection_matrix(const ExtendedState<double>& e, const WeightVectors& w) {
    const std::size_t d = e.dim();
    validate_weights(w, d, ProjectionMode::standard);
    const auto n = static_cast<Eigen::Index>(4 * d);
    ProjectionMatrix out;
    out.M = Eigen::MatrixXd::Identity(n, n);
    out.cases.reserve(d);

    for (std::size_t k = 0; k < d; ++k) {
        const auto ip = static_cast<Eigen::Index>(k);
        const auto ix = static_cast<Eigen::Index>(d + k);
        const auto iq = static_cast<Eigen::Index>(2 * d + k);
        const auto iy = static_cast<Eigen::Index>(3 * d + k);
        const double p = e.p[k], x = e.x[k], q = e.q[k], y = e.y[k];
        const double pt = w.lambda[k] * p + (1.0 - w.lambda[k]) * x;
        const double qt = w.xi[k] * q + (1.0 - w.xi[k]) * y;
        const double dp = pt - p, dx = pt - x, dq = qt - q, dy = qt - y;
        const bool px_zero = p * p + x * x == 0.0;
        const bool qy_zero = q * q + y * y == 0.0;

        auto infeasible = [&] {
            return DomainError("weights infeasible for this state: component " + std::to_string(k) +
                                   " maps a nonzero point onto (0, 0)",
                               static_cast<std::ptrdiff_t>(k));
        };

        Eigen::MatrixXd Mk = Eigen::MatrixXd::Identity(n, n);
        ComponentCase kind;
        if (!px_zero && !qy_zero) {
            kind = ComponentCase::both_nonzero;
            // Lower shear V: (q,y) += T0 (p,x); upper shear U: (p,x) += S0 (q,y).
            Eigen::MatrixXd U = Eigen::MatrixXd::Identity(n, n);
            Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n);
            // Both routes are exact; pick the one whose divisors are larger.
            const double fwd = std::min(std::abs(qt), std::max(std::abs(p), std::abs(x)));
            const double mir = std::min(std::abs(pt), std::max(std::abs(q), std::abs(y)));
            if (qt != 0.0 && fwd >= mir) {
                double dd, ee, ff;
                if (std::abs(p) >= std::abs(x)) {
                    ff = 0.0;
                    ee = (dy - ff * x) / p;
                    dd = (dq - ee * x) / p;
                } else {
                    dd = 0.0;
                    ee = (dq - dd * p) / x;
                    ff = (dy - ee * p) / x;
                }
                const double aa = 0.0;
                const double bb = dp / qt - aa;
                const double cc = dx / qt - bb;
                V(iq, ip) = dd; V(iq, ix) = ee; V(iy, ip) = ee; V(iy, ix) = ff;
                U(ip, iq) = aa; U(ip, iy) = bb; U(ix, iq) = bb; U(ix, iy) = cc;
                Mk = U * V;
            } else if (pt != 0.0) {
                // Mirror order: fix the momenta first using (q, y), then the
                // positions using the common momentum pt.
                double aa, bb, cc;
                if (std::abs(q) >= std::abs(y)) {
                    cc = 0.0;
                    bb = (dx - cc * y) / q;
                    aa = (dp - bb * y) / q;
                } else {
                    aa = 0.0;
                    bb = (dp - aa * q) / y;
                    cc = (dx - bb * q) / y;
                }
                const double dd = 0.0;
                const double ee = dq / pt - dd;
                const double ff = dy / pt - ee;
                U(ip, iq) = aa; U(ip, iy) = bb; U(ix, iq) = bb; U(ix, iy) = cc;
                V(iq, ip) = dd; V(iq, ix) = ee; V(iy, ip) = ee; V(iy, ix) = ff;
                Mk = V * U;
            } else {
                throw infeasible();
            }
        } else if (px_zero && !qy_zero) {
            kind = ComponentCase::momenta_zero;
            if (qt == 0.0) throw infeasible();
            Eigen::Matrix2d T0;
            if (q != 0.0) {
                const double b = 0.0, dd = 1.0;
                T0 << (qt - b * y) / q, b, (qt - dd * y) / q, dd;
            } else {
                const double a = 0.0, c = 1.0;
                T0 << a, (qt - a * q) / y, c, (qt - c * q) / y;
            }
            const Eigen::Matrix2d Tinv_t = T0.inverse().transpose();
            Mk(ip, ip) = Tinv_t(0, 0); Mk(ip, ix) = Tinv_t(0, 1);
            Mk(ix, ip) = Tinv_t(1, 0); Mk(ix, ix) = Tinv_t(1, 1);
            Mk(iq, iq) = T0(0, 0); Mk(iq, iy) = T0(0, 1);
            Mk(iy, iq) = T0(1, 0); Mk(iy, iy) = T0(1, 1);
        } else if (!px_zero && qy_zero) {
            kind = ComponentCase::positions_zero;
            if (pt == 0.0) throw infeasible();
            Eigen::Matrix2d T0;
            if (p != 0.0) {
                const double b = 0.0, dd = 1.0;
                T0 << (pt - b * x) / p, b, (pt - dd * x) / p, dd;
            } else {
                const double a = 0.0, c = 1.0;
                T0 << a, (pt - a * p) / x, c, (pt - c * p) / x;
            }
            const Eigen::Matrix2d Tinv_t = T0.inverse().transpose();
            Mk(ip, ip) = T0(0, 0); Mk(ip, ix) = T0(0, 1);
            Mk(ix, ip) = T0(1, 0); Mk(ix, ix) = T0(1, 1);
            Mk(iq, iq) = Tinv_t(0, 0); Mk(iq, iy) = Tinv_t(0, 1);
            Mk(iy, iq) = Tinv_t(1, 0); Mk(iy, iy) = Tinv_t(1, 1);
        } else {
            kind = ComponentCase::all_zero;
        }
        out.cases.push_back(kind);
        ++out.case_counts[static_cast<int>(kind)];
        out.M = Mk * out.M;
    }
    return out;
}

/// Flattens an extended state into (p, x, q, y) order.
template <class T>
Eigen::Matrix<T, Eigen::Dynamic, 1> flatten(const ExtendedState<T>& e) {
    const std::size_t d = e.dim();
    Eigen::Matrix<T, Eigen::Dynamic, 1> v(static_cast<Eigen::Index>(4 * d));
    for (std::size_t k = 0; k < d; ++k) {
        v(static_cast<Eigen::Index>(k)) = e.p[k];
        v(static_cast<Eigen::Index>(d + k)) = e.x[k];
        v(static_cast<Eigen::Index>(2 * d + k)) = e.q[k];
        v(static_cast<Eigen::Index>(3 * d + k)) = e.y[k];
    }
    return v;
}

}  // namespace xsymp
