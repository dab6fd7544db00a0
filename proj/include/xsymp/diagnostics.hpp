#pragma once

// Error metrics, numerical symplecticity, Lyapunov estimates, Poincare
// sections and log-log growth fits.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "autodiff.hpp"
#include "errors.hpp"
#include "integrators.hpp"
#include "phase.hpp"
#include "record.hpp"
#include "state.hpp"

namespace xsymp {

/// |H(s) - H(s0)|
template <class H>
double energy_error(const H& h, const State<double>& s, const State<double>& s0) {
    return std::abs(evaluate(h, s) - evaluate(h, s0));
}

using StepMap = std::function<State<double>(const State<double>&)>;

/// Jacobian of a State -> State map by central differences; rows and
/// columns ordered (p, q).
inline Eigen::MatrixXd fd_jacobian(const StepMap& f, const State<double>& z, double step = 1e-6) {
    const std::size_t d = z.dim();
    const auto n = static_cast<Eigen::Index>(2 * d);
    Eigen::MatrixXd M(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        State<double> zp = z, zm = z;
        const auto k = static_cast<std::size_t>(j);
        double& up = k < d ? zp.p[k] : zp.q[k - d];
        double& um = k < d ? zm.p[k] : zm.q[k - d];
        up += step;
        um -= step;
        const State<double> fp = f(zp), fm = f(zm);
        for (std::size_t i = 0; i < d; ++i) {
            M(static_cast<Eigen::Index>(i), j) = (fp.p[i] - fm.p[i]) / (2 * step);
            M(static_cast<Eigen::Index>(d + i), j) = (fp.q[i] - fm.q[i]) / (2 * step);
        }
    }
    return M;
}

/// ||M^T J M - J||_inf for the finite-difference Jacobian M of f at z.
inline double symplecticity_defect(const StepMap& f, const State<double>& z, double step = 1e-6) {
    const Eigen::MatrixXd M = fd_jacobian(f, z, step);
    if (!M.allFinite()) throw DomainError("non-finite entry in finite-difference Jacobian");
    return symplectic_residual(M);
}

/// One step of spec from a State, as a map (fresh stepper each call, so
/// step index 1 and a freshly seeded generator).
template <class H>
StepMap step_map(const H& h, const IntegratorSpec& spec, double dt) {
    return [&h, spec, dt](const State<double>& s) {
        Stepper<H, double> st(h, spec, s);
        return st.step(dt).state;
    };
}

// ---------------------------------------------------------------------------
// Lyapunov exponent.

struct LyapunovPoint {
    double t;
    double sigma;
};

struct LyapunovOptions {
    double d0 = 1e-8;
    /// Output every stride steps.
    std::size_t stride = 1;
    /// Initial separation direction in (p, q) order; empty means the first
    /// position coordinate.
    std::vector<double> direction;
};

/// Two-trajectory estimate with renormalisation after every step:
/// sigma(t_n) = (1 / t_n) sum_k ln(d_k / d0).
template <class H>
std::vector<LyapunovPoint> lyapunov_exponent(const H& h, const IntegratorSpec& spec, const State<double>& s0,
                                             double dt, std::size_t n_steps, const LyapunovOptions& opt = {}) {
    if (!(opt.d0 > 0.0)) throw ConfigError("d0 must be positive");
    if (opt.stride < 1) throw ConfigError("stride must be >= 1");
    const std::size_t d = s0.dim();
    std::vector<double> dir = opt.direction;
    if (dir.empty()) {
        dir.assign(2 * d, 0.0);
        dir[d] = 1.0;
    }
    if (dir.size() != 2 * d) throw ConfigError("perturbation direction must have length 2d");
    double norm = 0.0;
    for (double v : dir) norm += v * v;
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) throw ConfigError("perturbation direction must be nonzero");

    auto shifted = [&](const State<double>& base, const std::vector<double>& w, double scale) {
        State<double> s = base;
        for (std::size_t k = 0; k < d; ++k) {
            s.p[k] += scale * w[k];
            s.q[k] += scale * w[d + k];
        }
        return s;
    };

    Stepper<H, double> a(h, spec, s0);
    Stepper<H, double> b(h, spec, shifted(s0, dir, opt.d0 / norm));
    std::vector<LyapunovPoint> out;
    out.reserve(n_steps / opt.stride + 1);
    double sum = 0.0;
    std::vector<double> diff(2 * d);
    for (std::size_t n = 1; n <= n_steps; ++n) {
        a.step(dt);
        b.step(dt);
        const State<double>& sa = a.state();
        const State<double>& sb = b.state();
        double dist = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            diff[k] = sb.p[k] - sa.p[k];
            diff[d + k] = sb.q[k] - sa.q[k];
        }
        for (double v : diff) dist += v * v;
        dist = std::sqrt(dist);
        if (!(dist > 0.0) || !std::isfinite(dist))
            throw DomainError("two-trajectory separation collapsed or diverged at step " + std::to_string(n));
        sum += std::log(dist / opt.d0);
        b.reset_state(shifted(sa, diff, opt.d0 / dist));
        if (n % opt.stride == 0 || n == n_steps) {
            const double t = static_cast<double>(n) * dt;
            out.push_back({t, sum / t});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Poincare sections.

struct Crossing {
    double t;
    std::array<double, 2> point;
};

/// Streaming detector of upward zero crossings of section(point); each
/// crossing is located by linear interpolation between the bracketing
/// samples and reported through record(point) interpolated the same way.
template <class Point>
class SectionDetector {
public:
    using SectionFn = std::function<double(const Point&)>;
    using RecordFn = std::function<std::array<double, 2>(const Point&)>;

    SectionDetector(SectionFn section, RecordFn record) : section_(std::move(section)), record_(std::move(record)) {}

    void push(double t, const Point& pt) {
        const double s = section_(pt);
        const auto r = record_(pt);
        if (has_prev_ && prev_s_ < 0.0 && s >= 0.0) {
            const double w = (0.0 - prev_s_) / (s - prev_s_);
            crossings_.push_back({prev_t_ + w * (t - prev_t_),
                                  {prev_r_[0] + w * (r[0] - prev_r_[0]), prev_r_[1] + w * (r[1] - prev_r_[1])}});
        }
        has_prev_ = true;
        prev_t_ = t;
        prev_s_ = s;
        prev_r_ = r;
    }

    const std::vector<Crossing>& crossings() const { return crossings_; }

private:
    SectionFn section_;
    RecordFn record_;
    bool has_prev_ = false;
    double prev_t_ = 0.0, prev_s_ = 0.0;
    std::array<double, 2> prev_r_{};
    std::vector<Crossing> crossings_;
};

/// Batch form over a sampled trajectory.
template <class Point>
std::vector<Crossing> poincare_section(std::span<const double> times, std::span<const Point> points,
                                       typename SectionDetector<Point>::SectionFn section,
                                       typename SectionDetector<Point>::RecordFn record) {
    SectionDetector<Point> det(std::move(section), std::move(record));
    for (std::size_t i = 0; i < points.size(); ++i) det.push(times[i], points[i]);
    return det.crossings();
}

/// Section x_k = 0 (increasing) of a doubled-state trajectory, recording (q_k, p_k).
inline SectionDetector<ExtendedState<double>> extended_section(std::size_t k = 0) {
    return SectionDetector<ExtendedState<double>>(
        [k](const ExtendedState<double>& e) { return e.x[k]; },
        [k](const ExtendedState<double>& e) { return std::array<double, 2>{e.q[k], e.p[k]}; });
}

/// Integrates the raw doubled system dGamma with the extended Strang step
/// and collects its section points.
template <class H>
std::vector<Crossing> extended_poincare_run(const H& h, ExtendedState<double> e, double dt, std::size_t n_steps,
                                            std::size_t k = 0) {
    auto det = extended_section(k);
    det.push(0.0, e);
    for (std::size_t n = 1; n <= n_steps; ++n) {
        apply_strang_extended(h, e, dt);
        det.push(static_cast<double>(n) * dt, e);
    }
    return det.crossings();
}

/// Mean distance from each section point to its nearest neighbour; small
/// for points on a closed curve, large for scattered points.
inline double mean_nearest_neighbor(const std::vector<Crossing>& pts) {
    if (pts.size() < 2) throw FitError("nearest-neighbour spread needs at least two points");
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (i == j) continue;
            const double dx = pts[i].point[0] - pts[j].point[0];
            const double dy = pts[i].point[1] - pts[j].point[1];
            best = std::min(best, std::hypot(dx, dy));
        }
        total += best;
    }
    return total / static_cast<double>(pts.size());
}

// ---------------------------------------------------------------------------
// Growth-law fits.

enum class Channel { GE, GHE, delta };

struct GrowthFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double t_min = 0.0;
    double t_max = 0.0;
    std::size_t n = 0;
};

/// Least squares of log(y) against log(x) over pairs with x, y > 0.
inline GrowthFit fit_loglog(std::span<const double> xs, std::span<const double> ys, std::size_t min_samples = 10) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0) || !std::isfinite(ys[i])) continue;
        lx.push_back(std::log(xs[i]));
        ly.push_back(std::log(ys[i]));
    }
    if (lx.size() < min_samples || lx.size() < 2)
        throw FitError("growth fit needs at least " + std::to_string(min_samples) + " positive samples, got " +
                       std::to_string(lx.size()));
    const auto n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) throw FitError("growth fit needs at least two distinct abscissae");
    GrowthFit g;
    g.slope = sxy / sxx;
    g.intercept = my - g.slope * mx;
    g.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    g.t_min = std::exp(lx.front());
    g.t_max = std::exp(lx.back());
    g.n = lx.size();
    return g;
}

inline double channel_value(const Sample& s, Channel c) {
    switch (c) {
        case Channel::GE: return s.ge ? *s.ge : std::numeric_limits<double>::quiet_NaN();
        case Channel::GHE: return s.ghe;
        case Channel::delta: return s.delta;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

/// Log-log fit of a channel against t over samples with t in [t_min, t_max].
inline GrowthFit fit_growth(const RunRecord& rec, Channel c, double t_min, double t_max) {
    std::vector<double> ts, vs;
    for (const Sample& s : rec.samples) {
        if (s.t < t_min || s.t > t_max) continue;
        const double v = channel_value(s, c);
        if (c == Channel::GE && !s.ge) throw FitError("record carries no GE channel");
        ts.push_back(s.t);
        vs.push_back(v);
    }
    for (double v : vs)
        if (!(v > 0.0)) throw FitError("growth fit window contains a nonpositive value");
    GrowthFit g = fit_loglog(ts, vs);
    g.t_min = t_min;
    g.t_max = t_max;
    return g;
}

/// Maximum of a channel over samples with t <= t_max.
inline double max_until(const RunRecord& rec, Channel c, double t_max) {
    double m = 0.0;
    for (const Sample& s : rec.samples)
        if (s.t <= t_max) m = std::max(m, channel_value(s, c));
    return m;
}

/// max over samples with t <= t_max of ||J(t) - J(0)||_2.
inline double max_j_drift_until(const RunRecord& rec, double t_max) {
    double m = 0.0;
    for (const Sample& s : rec.samples) {
        if (s.t > t_max || !s.j_drift) continue;
        const auto& j = *s.j_drift;
        m = std::max(m, std::sqrt(j[0] * j[0] + j[1] * j[1] + j[2] * j[2]));
    }
    return m;
}

/// Observed order from errors at step sizes h: the least-squares slope of
/// log(error) against log(h), plus the successive-pair slopes.
struct OrderFit {
    double order = 0.0;
    std::vector<double> pairwise;
};

inline OrderFit fit_order(std::span<const double> hs, std::span<const double> errors) {
    if (hs.size() != errors.size() || hs.size() < 3) throw FitError("order fit needs at least three step sizes");
    OrderFit f;
    f.order = fit_loglog(hs, errors, 3).slope;
    for (std::size_t i = 1; i < hs.size(); ++i)
        f.pairwise.push_back(std::log(errors[i - 1] / errors[i]) / std::log(hs[i - 1] / hs[i]));
    return f;
}

}  // namespace xsymp
