#pragma once

// Experiment drivers behind the command-line tool: single runs,
// convergence and timing sweeps, figure bundles, sections and Lyapunov
// series. Every driver returns tables; writing them is up to the caller.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "config.hpp"
#include "csv.hpp"
#include "diagnostics.hpp"
#include "integrators.hpp"
#include "problems.hpp"
#include "version.hpp"

namespace xsymp {

using AnyProblem = std::variant<Integrable1D, HarmonicOscillator, PNBinary>;

struct ResolvedProblem {
    AnyProblem h;
    State<double> s0;
    std::string label;
};

inline ResolvedProblem resolve_problem(const ProblemConfig& pc) {
    ResolvedProblem r;
    std::size_t d = 1;
    if (pc.name == "integrable1d") {
        r.h = Integrable1D{};
        r.s0 = Integrable1D::default_initial();
        r.label = "integrable1d";
    } else if (pc.name == "harmonic") {
        d = pc.dimension;
        r.h = HarmonicOscillator{d};
        r.s0 = State<double>(std::vector<double>(d, 0.0), std::vector<double>(d, 1.0));
        r.label = "harmonic";
    } else if (pc.name == "pn") {
        TrajectoryPreset t = pn_preset(pc.preset);
        if (pc.beta) t.params.beta = *pc.beta;
        if (pc.c) t.params.c = *pc.c;
        if (pc.Lambda1) t.params.Lambda1 = *pc.Lambda1;
        if (pc.Lambda2) t.params.Lambda2 = *pc.Lambda2;
        // the pole exemption belongs to the published initial data only
        if (pc.p || pc.q || pc.Lambda1 || pc.Lambda2) t.params.allow_pole = false;
        r.h = PNBinary(t.params);
        r.s0 = t.initial;
        r.label = "pn:" + t.name;
        d = 5;
    } else {
        throw ConfigError("unknown problem '" + pc.name + "'");
    }
    if (pc.p) {
        if (pc.p->size() != d) throw ConfigError("problem.p must have " + std::to_string(d) + " entries");
        r.s0.p = *pc.p;
    }
    if (pc.q) {
        if (pc.q->size() != d) throw ConfigError("problem.q must have " + std::to_string(d) + " entries");
        r.s0.q = *pc.q;
    }
    if (!all_finite(r.s0)) throw ConfigError("initial state must be finite");
    std::visit([&](const auto& h) { evaluate(h, r.s0); }, r.h);
    return r;
}

// ---------------------------------------------------------------------------
// Parallel sweep cells.

/// Runs fn(0..n-1) on up to jobs threads; rethrows the exception of the
/// lowest failing index after all cells finish.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    std::vector<std::exception_ptr> errors(n);
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Single runs.

inline Metadata describe_run(const RunConfig& cfg, const std::string& label) {
    const IntegratorSpec& m = cfg.method;
    Metadata md{{"library_version", kVersion},
                {"problem", label},
                {"method", m.name()},
                {"method.family", to_string(m.family)},
                {"method.order", std::to_string(m.order)}};
    if (m.family == Family::exp_symp) {
        md.emplace_back("method.lambda0", format_double(m.factors.lambda0));
        md.emplace_back("method.mu0", format_double(m.factors.mu0));
    }
    if (m.family == Family::weighted_projection) {
        std::string l, x;
        for (std::size_t k = 0; k < m.weights.lambda.size(); ++k) {
            l += (k ? "," : "") + format_double(m.weights.lambda[k]);
            x += (k ? "," : "") + format_double(m.weights.xi[k]);
        }
        md.emplace_back("method.lambda", l);
        md.emplace_back("method.xi", x);
        md.emplace_back("method.weight_policy", to_string(m.weight_policy));
        md.emplace_back("method.projection", m.projection == ProjectionMode::standard ? "standard" : "definition1");
    }
    if (m.family == Family::tao) md.emplace_back("method.omega", format_double(m.omega.omega));
    if (m.is_implicit()) {
        md.emplace_back("method.tol", format_double(m.tol));
        md.emplace_back("method.max_iters", std::to_string(m.max_iters));
    }
    md.emplace_back("run.h", format_double(cfg.h));
    md.emplace_back("run.t_end", format_double(cfg.t_end));
    md.emplace_back("run.stride", std::to_string(cfg.stride));
    md.emplace_back("run.seed", std::to_string(cfg.seed));
    md.emplace_back("run.reference", cfg.reference ? "true" : "false");
    return md;
}

struct RunOutcome {
    RunRecord record;
    Metadata metadata;  ///< without timing
    double wall_seconds = 0.0;
    /// Time up to which the reference passed cross-validation (infinite
    /// when it passed everywhere or no check ran).
    double reference_validated_until = std::numeric_limits<double>::infinity();

    CsvTable table() const {
        Metadata md = metadata;
        if (std::isfinite(reference_validated_until))
            md.emplace_back("reference_validated_until", format_double(reference_validated_until));
        md.emplace_back("total_iterations", std::to_string(record.meta.total_iterations));
        md.emplace_back("wall_seconds", format_double(wall_seconds));
        return run_table(record, md);
    }
};

/// Reference on the sample grid. With tolerate_unreliable, a failed cross
/// check is reported through validated_until and the fine run alone is
/// used; otherwise ReferenceUnreliable propagates.
template <class H>
std::vector<State<double>> sampled_reference(const H& h, const State<double>& s0, double dt, std::size_t n_steps,
                                             std::size_t stride, const ReferenceOptions& opt, bool tolerate_unreliable,
                                             double& validated_until) {
    validated_until = std::numeric_limits<double>::infinity();
    try {
        return reference_for_run(h, s0, dt, n_steps, stride, opt);
    } catch (const ReferenceUnreliable& e) {
        if (!tolerate_unreliable) throw;
        validated_until = e.first_failing_t();
        ReferenceOptions unchecked = opt;
        unchecked.cross_validate = false;
        return reference_for_run(h, s0, dt, n_steps, stride, unchecked);
    }
}

/// Executes one configured run. A shared precomputed reference may be
/// passed to avoid recomputation across methods.
inline RunOutcome execute_run(const RunConfig& cfg, const std::vector<State<double>>* shared_reference = nullptr,
                              bool tolerate_unreliable = false) {
    cfg.validate();
    const std::size_t n = cfg.n_steps();
    ResolvedProblem pr = resolve_problem(cfg.problem);
    IntegratorSpec spec = cfg.method;
    spec.rng_seed = cfg.seed;
    spec.validate(pr.s0.dim());
    RunOutcome out;
    out.metadata = describe_run(cfg, pr.label);
    std::visit(
        [&](const auto& h) {
            using HT = std::decay_t<decltype(h)>;
            RunHooks hooks;
            hooks.stride = cfg.stride;
            hooks.problem_name = pr.label;
            if constexpr (std::is_same_v<HT, PNBinary>)
                hooks.invariant = [&h](const State<double>& s) { return h.total_angular_momentum(s); };
            if (shared_reference) {
                hooks.reference = *shared_reference;
            } else if (cfg.reference) {
                hooks.reference = sampled_reference(h, pr.s0, cfg.h, n, cfg.stride, cfg.reference_options,
                                                    tolerate_unreliable, out.reference_validated_until);
            }
            out.record = integrate(h, pr.s0, spec, cfg.h, n, hooks);
        },
        pr.h);
    out.wall_seconds = out.record.meta.wall_seconds;
    return out;
}

/// Reference for a run configuration alone (for sharing across methods).
inline std::vector<State<double>> reference_for_config(const RunConfig& cfg, bool tolerate_unreliable,
                                                       double& validated_until) {
    ResolvedProblem pr = resolve_problem(cfg.problem);
    return std::visit(
        [&](const auto& h) {
            return sampled_reference(h, pr.s0, cfg.h, cfg.n_steps(), cfg.stride, cfg.reference_options,
                                     tolerate_unreliable, validated_until);
        },
        pr.h);
}

// ---------------------------------------------------------------------------
// Convergence.

struct ConvergenceRow {
    std::string method;
    double h = 0.0;
    double ge = 0.0;
    double wall_seconds = 0.0;
    std::uint64_t iterations = 0;
};

struct MethodOrder {
    std::string method;
    OrderFit fit;
    /// Slope of the finest successive halving, the reported order.
    double order() const { return fit.pairwise.empty() ? fit.order : fit.pairwise.back(); }
};

struct ConvergenceResult {
    std::vector<ConvergenceRow> rows;
    std::vector<MethodOrder> orders;

    CsvTable errors_table(Metadata md) const {
        CsvTable t;
        t.metadata = std::move(md);
        t.columns = {"method", "h", "GE", "iterations"};
        for (const auto& r : rows)
            t.rows.push_back({r.method, format_double(r.h), format_double(r.ge), std::to_string(r.iterations)});
        return t;
    }
    CsvTable timing_table(Metadata md) const {
        CsvTable t;
        t.metadata = std::move(md);
        t.columns = {"method", "h", "GE", "wall_seconds"};
        for (const auto& r : rows)
            t.rows.push_back({r.method, format_double(r.h), format_double(r.ge), format_double(r.wall_seconds)});
        return t;
    }
    CsvTable order_table(Metadata md) const {
        CsvTable t;
        t.metadata = std::move(md);
        t.columns = {"method", "order", "least_squares_order", "pairwise_orders"};
        for (const auto& o : orders) {
            std::string pw;
            for (std::size_t i = 0; i < o.fit.pairwise.size(); ++i)
                pw += (i ? " " : "") + format_double(o.fit.pairwise[i]);
            t.rows.push_back({o.method, format_double(o.order()), format_double(o.fit.order), pw});
        }
        return t;
    }
    const MethodOrder& order_of(const std::string& method) const {
        for (const auto& o : orders)
            if (o.method == method) return o;
        throw Error("no order for method '" + method + "'");
    }
};

/// Final-time global errors of each method at each step size against one
/// reference computed at the smallest step. base supplies the problem,
/// t_end and reference options.
inline ConvergenceResult run_convergence(const RunConfig& base, const std::vector<IntegratorSpec>& methods,
                                         std::vector<double> hs, std::size_t jobs = 1) {
    if (hs.size() < 3) throw ConfigError("convergence study needs at least three step sizes");
    if (methods.empty()) throw ConfigError("convergence study needs at least one method");
    std::sort(hs.begin(), hs.end(), std::greater<>());
    std::vector<std::size_t> steps;
    for (double h : hs) {
        RunConfig c = base;
        c.h = h;
        steps.push_back(c.n_steps());
    }
    RunConfig refcfg = base;
    refcfg.h = hs.back();
    refcfg.stride = steps.back();
    double validated = 0.0;
    const std::vector<State<double>> ref = reference_for_config(refcfg, false, validated);

    ConvergenceResult res;
    res.rows.resize(methods.size() * hs.size());
    parallel_for(res.rows.size(), jobs, [&](std::size_t cell) {
        const std::size_t mi = cell / hs.size(), hi = cell % hs.size();
        RunConfig c = base;
        c.method = methods[mi];
        c.h = hs[hi];
        c.stride = steps[hi];
        const RunOutcome o = execute_run(c, &ref);
        res.rows[cell] = {methods[mi].name(), hs[hi], *o.record.samples.back().ge, o.wall_seconds,
                          o.record.meta.total_iterations};
    });
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        std::vector<double> e;
        for (std::size_t hi = 0; hi < hs.size(); ++hi) e.push_back(res.rows[mi * hs.size() + hi].ge);
        res.orders.push_back({methods[mi].name(), fit_order(hs, e)});
    }
    return res;
}

// ---------------------------------------------------------------------------
// Growth laws.

struct GrowthRow {
    std::string method;
    RunOutcome run;
    GrowthFit ge, ghe;
    double max_ghe_early = 0.0, max_ghe = 0.0;
};

/// GE and GHE log-log slopes over [t_min, t_end] per method, with the
/// early-window energy maximum (up to t_early) for boundedness checks.
inline std::vector<GrowthRow> run_growth(const RunConfig& base, const std::vector<IntegratorSpec>& methods,
                                         double t_min, double t_early, std::size_t jobs = 1) {
    if (methods.empty()) throw ConfigError("growth study needs at least one method");
    std::vector<State<double>> ref;
    double validated = 0.0;
    if (base.reference) ref = reference_for_config(base, false, validated);
    std::vector<GrowthRow> rows(methods.size());
    parallel_for(methods.size(), jobs, [&](std::size_t i) {
        RunConfig c = base;
        c.method = methods[i];
        GrowthRow& r = rows[i];
        r.method = methods[i].name();
        r.run = execute_run(c, base.reference ? &ref : nullptr);
        if (base.reference) r.ge = fit_growth(r.run.record, Channel::GE, t_min, base.t_end);
        r.ghe = fit_growth(r.run.record, Channel::GHE, t_min, base.t_end);
        r.max_ghe_early = max_until(r.run.record, Channel::GHE, t_early);
        r.max_ghe = max_until(r.run.record, Channel::GHE, base.t_end);
    });
    return rows;
}

inline CsvTable growth_table(const std::vector<GrowthRow>& rows, Metadata md) {
    CsvTable t;
    t.metadata = std::move(md);
    t.columns = {"method", "GE_slope", "GHE_slope", "max_GHE_early", "max_GHE"};
    for (const auto& r : rows)
        t.rows.push_back({r.method, format_double(r.ge.n ? r.ge.slope : std::numeric_limits<double>::quiet_NaN()),
                          format_double(r.ghe.slope), format_double(r.max_ghe_early), format_double(r.max_ghe)});
    return t;
}

// ---------------------------------------------------------------------------
// Timing.

struct BenchRow {
    std::string method;
    std::vector<double> walls;
    double ge_final = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t iterations = 0;

    double median() const {
        std::vector<double> w = walls;
        std::sort(w.begin(), w.end());
        const std::size_t n = w.size();
        return n % 2 ? w[n / 2] : 0.5 * (w[n / 2 - 1] + w[n / 2]);
    }
};

struct BenchResult {
    std::vector<BenchRow> rows;

    const BenchRow& row(const std::string& method) const {
        for (const auto& r : rows)
            if (r.method == method) return r;
        throw Error("no timing for method '" + method + "'");
    }
    /// wall(slow) / wall(fast) on medians.
    double ratio(const std::string& slow, const std::string& fast) const {
        return row(slow).median() / row(fast).median();
    }
    /// Implicit-over-explicit ratios for every same-order pair present.
    std::vector<std::pair<std::string, double>> speedups() const {
        std::vector<std::pair<std::string, double>> out;
        for (const auto& [slow, fast] : std::vector<std::pair<std::string, std::string>>{
                 {"IRK2", "ExpSymp2"}, {"SemiSymp2", "ExpSymp2"}, {"IRK4", "ExpSymp4"}, {"SemiSymp4", "ExpSymp4"}}) {
            bool has_slow = false, has_fast = false;
            for (const auto& r : rows) {
                has_slow |= r.method == slow;
                has_fast |= r.method == fast;
            }
            if (has_slow && has_fast) out.emplace_back(slow + "/" + fast, ratio(slow, fast));
        }
        return out;
    }
    CsvTable table(Metadata md) const {
        for (const auto& [name, r] : speedups()) md.emplace_back("speedup " + name, format_double(r));
        CsvTable t;
        t.metadata = std::move(md);
        t.columns = {"method", "median_wall_seconds", "repetitions", "GE_final", "iterations"};
        for (const auto& r : rows)
            t.rows.push_back({r.method, format_double(r.median()), std::to_string(r.walls.size()),
                              format_double(r.ge_final), std::to_string(r.iterations)});
        return t;
    }
};

/// Wall-clock of each method over repetitions (sequential, so timings do
/// not compete for cores). GE uses the base reference settings when
/// base.reference is set.
inline BenchResult run_bench(const RunConfig& base, const std::vector<IntegratorSpec>& methods,
                             std::size_t repetitions = 3) {
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    base.validate();
    std::vector<State<double>> ref;
    const std::vector<State<double>>* refp = nullptr;
    if (base.reference) {
        RunConfig rc = base;
        rc.stride = base.n_steps();
        double validated = 0.0;
        ref = reference_for_config(rc, false, validated);
        refp = &ref;
    }
    BenchResult res;
    for (const IntegratorSpec& m : methods) {
        BenchRow row;
        row.method = m.name();
        for (std::size_t r = 0; r < repetitions; ++r) {
            RunConfig c = base;
            c.method = m;
            c.stride = base.n_steps();
            c.reference = false;
            const RunOutcome o = execute_run(c, refp);
            row.walls.push_back(o.wall_seconds);
            if (o.record.samples.back().ge) row.ge_final = *o.record.samples.back().ge;
            row.iterations = o.record.meta.total_iterations;
        }
        res.rows.push_back(std::move(row));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Figure bundles.

struct Curve {
    std::string name;
    CsvTable table;
};

struct FigureBundle {
    std::string id;
    std::vector<Curve> curves;
};

namespace detail {

inline RunConfig problem1_base() {
    RunConfig c;
    c.problem.name = "integrable1d";
    c.h = 0.01;
    c.t_end = 1000.0;
    c.stride = 100;
    return c;
}

inline RunConfig pn_base(const std::string& preset) {
    RunConfig c = defaults_for_problem("pn");
    c.problem.preset = preset;
    c.h = 1.0;
    c.t_end = 1e5;
    c.stride = 100;
    return c;
}

inline std::vector<IntegratorSpec> six_methods(double tol) {
    return {IntegratorSpec::irk2(tol),       IntegratorSpec::semisymp(2, tol), IntegratorSpec::exp_symp(2),
            IntegratorSpec::irk4(tol),       IntegratorSpec::semisymp(4, tol), IntegratorSpec::exp_symp(4)};
}

inline std::vector<IntegratorSpec> methods_from(const StudyConfig& st, std::vector<IntegratorSpec> fallback,
                                                const RunConfig& base) {
    if (st.methods.empty()) return fallback;
    std::vector<IntegratorSpec> out;
    for (const auto& name : st.methods) {
        IntegratorSpec s = parse_method_name(name);
        s.tol = base.method.tol;
        s.max_iters = base.method.max_iters;
        s.omega = base.method.omega;
        if (s.family == Family::exp_symp) s.factors = base.method.factors;
        out.push_back(s);
    }
    return out;
}

/// Runs each (curve name, config) against one shared reference.
inline FigureBundle run_curves(const std::string& id, const std::vector<std::pair<std::string, RunConfig>>& cells,
                               bool tolerate_unreliable, std::size_t jobs) {
    FigureBundle b;
    b.id = id;
    b.curves.resize(cells.size());
    std::vector<State<double>> ref;
    double validated = std::numeric_limits<double>::infinity();
    const bool want_ref = !cells.empty() && cells.front().second.reference;
    if (want_ref) ref = reference_for_config(cells.front().second, tolerate_unreliable, validated);
    parallel_for(cells.size(), jobs, [&](std::size_t i) {
        RunOutcome o = execute_run(cells[i].second, want_ref ? &ref : nullptr);
        o.reference_validated_until = validated;
        Metadata md = o.metadata;
        md.insert(md.begin(), {"figure", id});
        md.insert(md.begin() + 1, {"curve", cells[i].first});
        o.metadata = md;
        b.curves[i] = {cells[i].first, o.table()};
    });
    return b;
}

}  // namespace detail

/// Data for a named figure with its original parameters as defaults; run.*
/// and method.* keys in the study file override them.
inline FigureBundle run_figure(const StudyConfig& st, std::size_t jobs = 1) {
    const std::string& id = st.figure;
    std::vector<std::pair<std::string, RunConfig>> cells;
    auto with = [&](RunConfig c, const IntegratorSpec& m) {
        c.method = m;
        c.method.rng_seed = c.seed;
        return c;
    };

    if (id == "1c") {
        const RunConfig base = apply_run_keys(st.source, detail::problem1_base());
        cells.emplace_back("Pihajoki2", with(base, IntegratorSpec::pihajoki(2, false)));
        cells.emplace_back("ExpSymp2", with(base, IntegratorSpec::exp_symp(2)));
        return detail::run_curves(id, cells, false, jobs);
    }
    if (id == "2") {
        const RunConfig base = apply_run_keys(st.source, detail::problem1_base());
        for (const auto& m : detail::methods_from(st, detail::six_methods(base.method.tol), base))
            cells.emplace_back(m.name(), with(base, m));
        return detail::run_curves(id, cells, false, jobs);
    }
    if (id == "3") {
        RunConfig base = apply_run_keys(st.source, detail::problem1_base());
        std::vector<double> hs = st.hs.empty() ? std::vector<double>{0.1, 0.05, 0.025, 0.0125} : st.hs;
        const auto res =
            run_convergence(base, detail::methods_from(st, detail::six_methods(base.method.tol), base), hs, jobs);
        Metadata md{{"library_version", kVersion}, {"figure", id}, {"run.t_end", format_double(base.t_end)}};
        FigureBundle b;
        b.id = id;
        b.curves.push_back({"convergence", res.errors_table(md)});
        b.curves.push_back({"orders", res.order_table(md)});
        b.curves.push_back({"efficiency", res.timing_table(md)});
        return b;
    }
    if (id == "4") {
        const RunConfig base = apply_run_keys(st.source, detail::problem1_base());
        std::vector<FactorPair> factors = st.factors;
        if (factors.empty())
            factors = {{1.0 / std::numbers::e, 1.0 / std::numbers::pi}, {0.5, 0.5}, {1.0 / 3.0, 0.75},
                       {0.2752, 0.0731}};
        for (const FactorPair& f : factors) {
            const IntegratorSpec m = IntegratorSpec::exp_symp(4, f);
            cells.emplace_back("ExpSymp4_" + format_double(f.lambda0) + "_" + format_double(f.mu0), with(base, m));
        }
        return detail::run_curves(id, cells, false, jobs);
    }
    if (id == "5") {
        const RunConfig base = apply_run_keys(st.source, detail::problem1_base());
        const FactorPair f{0.6657, 0.4910};
        cells.emplace_back("choice1", with(base, IntegratorSpec::exp_symp(4, f)));
        cells.emplace_back("choice2", with(base, IntegratorSpec::weighted(4, {{f.lambda0}, {f.mu0}},
                                                                          WeightPolicy::constant)));
        cells.emplace_back("choice3", with(base, IntegratorSpec::weighted(4, {{f.lambda0}, {f.mu0}},
                                                                          WeightPolicy::fresh_random_per_step,
                                                                          ProjectionMode::standard, base.seed)));
        return detail::run_curves(id, cells, false, jobs);
    }
    if (id == "7" || id == "8") {
        RunConfig def = detail::pn_base(id == "7" ? "traj1_regular" : "traj2_chaotic");
        if (id == "8") def.method.tol = 4e-13;
        const RunConfig base = apply_run_keys(st.source, def);
        for (const auto& m : detail::methods_from(st, detail::six_methods(base.method.tol), base))
            cells.emplace_back(m.name(), with(base, m));
        return detail::run_curves(id, cells, id == "8", jobs);
    }
    throw ConfigError("unknown figure '" + id + "' (expected 1c, 2, 3, 4, 5, 7 or 8)");
}

// ---------------------------------------------------------------------------
// Poincare sections of the doubled Problem-1 system.

/// Doubled state on the energy surface Gamma = gamma with x = 0, q = q0,
/// y = y0 and p >= 0, or nullopt when no such p exists.
inline std::optional<ExtendedState<double>> section_seed(double q0, double y0, double gamma = 10.0) {
    const double a = (2.0 * gamma - (1.0 + q0 * q0)) / (1.0 + y0 * y0) - 1.0;
    if (!(a >= 0.0)) return std::nullopt;
    return ExtendedState<double>({std::sqrt(a)}, {0.0}, {q0}, {y0});
}

struct SectionResult {
    double q0, y0;
    std::vector<Crossing> crossings;
    double spread = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<std::pair<double, double>> default_section_seeds() {
    std::vector<std::pair<double, double>> s;
    for (double q0 : {-3.0, -2.0, -1.0, 0.0, 1.0})
        for (double y0 : {-3.0, -2.0, -1.0, 0.5, 1.0, 2.0}) s.emplace_back(q0, y0);
    return s;
}

inline std::vector<SectionResult> run_poincare(const std::vector<std::pair<double, double>>& seeds, double h,
                                               std::size_t n_steps, std::size_t jobs = 1) {
    Integrable1D H;
    std::vector<SectionResult> out(seeds.size());
    parallel_for(seeds.size(), jobs, [&](std::size_t i) {
        const auto [q0, y0] = seeds[i];
        const auto e = section_seed(q0, y0);
        if (!e) throw ConfigError("seed (" + format_double(q0) + ", " + format_double(y0) + ") is off the surface");
        out[i].q0 = q0;
        out[i].y0 = y0;
        out[i].crossings = extended_poincare_run(H, *e, h, n_steps);
        if (out[i].crossings.size() >= 2) out[i].spread = mean_nearest_neighbor(out[i].crossings);
    });
    return out;
}

inline CsvTable section_table(const SectionResult& r, Metadata md) {
    md.emplace_back("seed.q0", format_double(r.q0));
    md.emplace_back("seed.y0", format_double(r.y0));
    md.emplace_back("mean_nearest_neighbor", format_double(r.spread));
    CsvTable t;
    t.metadata = std::move(md);
    t.columns = {"t", "q", "p"};
    for (const auto& c : r.crossings)
        t.rows.push_back({format_double(c.t), format_double(c.point[0]), format_double(c.point[1])});
    return t;
}

// ---------------------------------------------------------------------------
// Lyapunov series.

inline CsvTable lyapunov_table(const std::vector<LyapunovPoint>& pts, Metadata md) {
    CsvTable t;
    t.metadata = std::move(md);
    t.columns = {"t", "sigma"};
    for (const auto& p : pts) t.rows.push_back({format_double(p.t), format_double(p.sigma)});
    return t;
}

inline std::vector<LyapunovPoint> run_lyapunov(const RunConfig& cfg, double d0) {
    ResolvedProblem pr = resolve_problem(cfg.problem);
    IntegratorSpec spec = cfg.method;
    spec.rng_seed = cfg.seed;
    LyapunovOptions opt;
    opt.d0 = d0;
    opt.stride = cfg.stride;
    return std::visit([&](const auto& h) { return lyapunov_exponent(h, spec, pr.s0, cfg.h, cfg.n_steps(), opt); },
                      pr.h);
}

}  // namespace xsymp
