// xsymp: command-line experiment runner.
//
//   xsymp run      --config run.cfg   [--out DIR] [--seed N]
//   xsymp converge --config study.cfg [--out DIR] [--jobs N]
//   xsymp bench    --config study.cfg [--out DIR]
//   xsymp figure   --config study.cfg [--out DIR] [--jobs N]
//   xsymp poincare --config study.cfg [--out DIR] [--jobs N]
//   xsymp lyapunov --config study.cfg [--out DIR] [--jobs N]
//
// Exit status: 0 success, 2 configuration error, 3 runtime error.

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "xsymp/xsymp.hpp"

namespace fs = std::filesystem;
using namespace xsymp;

namespace {

struct Options {
    std::string config;
    std::string out;
    std::size_t jobs = 1;
    std::optional<std::int64_t> seed;
};

fs::path out_dir(const Options& o) {
    if (!o.out.empty()) return o.out;
    if (const char* env = std::getenv("XSYMP_OUT_DIR"); env && *env) return env;
    return "xsymp_out";
}

KeyValues load(const Options& o) {
    KeyValues kv = load_key_values(o.config);
    if (o.seed) {
        if (*o.seed < 0) throw ConfigError("--seed must be >= 0");
        kv.set("run.seed", std::to_string(*o.seed));
    }
    return kv;
}

std::string file_safe(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
    return s;
}

void wrote(const fs::path& p) { std::cout << "wrote " << p.string() << "\n"; }

void write_to(const fs::path& p, const CsvTable& t) {
    write_csv(p, t);
    wrote(p);
}

Metadata echo(const KeyValues& kv) {
    Metadata md{{"library_version", kVersion}};
    for (const auto& [k, v] : kv.entries()) md.emplace_back(k, v);
    return md;
}

std::vector<IntegratorSpec> study_methods(const StudyConfig& st, std::vector<std::string> fallback) {
    const std::vector<std::string>& names = st.methods.empty() ? fallback : st.methods;
    std::vector<IntegratorSpec> out;
    for (const auto& n : names) {
        IntegratorSpec s = parse_method_name(n);
        s.tol = st.base.method.tol;
        s.max_iters = st.base.method.max_iters;
        s.omega = st.base.method.omega;
        s.rng_seed = st.base.seed;
        if (s.family == Family::exp_symp) s.factors = st.base.method.factors;
        out.push_back(s);
    }
    return out;
}

int cmd_run(const Options& o) {
    const KeyValues kv = load(o);
    const RunConfig cfg = parse_run_config(kv);
    const RunOutcome r = execute_run(cfg);
    fs::path path = cfg.output.empty() ? fs::path("run_" + file_safe(cfg.method.name()) + ".csv") : fs::path(cfg.output);
    if (path.is_relative()) path = out_dir(o) / path;
    write_to(path, r.table());
    const Sample& last = r.record.samples.back();
    std::cout << "t=" << format_double(last.t) << " GHE=" << format_double(last.ghe);
    if (last.ge) std::cout << " GE=" << format_double(*last.ge);
    std::cout << " wall=" << format_double(r.wall_seconds) << "s\n";
    return 0;
}

int cmd_converge(const Options& o) {
    const KeyValues kv = load(o);
    const StudyConfig st = parse_study_config(kv, StudyKind::converge);
    const fs::path dir = out_dir(o);
    const Metadata md = echo(kv);
    if (st.kind == StudyKind::growth) {
        const auto rows = run_growth(st.base, study_methods(st, {"ExpSymp2", "ExpSymp4"}), 10.0,
                                     std::min(50.0, st.base.t_end), o.jobs);
        for (const auto& r : rows) write_to(dir / ("growth_" + file_safe(r.method) + ".csv"), r.run.table());
        write_to(dir / "growth_summary.csv", growth_table(rows, md));
        for (const auto& r : rows)
            std::cout << r.method << " GE slope " << format_double(r.ge.slope) << " GHE slope "
                      << format_double(r.ghe.slope) << "\n";
        return 0;
    }
    const std::vector<double> hs = st.hs.empty() ? std::vector<double>{0.1, 0.05, 0.025, 0.0125} : st.hs;
    const auto res = run_convergence(st.base, study_methods(st, {"ExpSymp2", "ExpSymp4"}), hs, o.jobs);
    write_to(dir / "converge_errors.csv", res.errors_table(md));
    write_to(dir / "converge_orders.csv", res.order_table(md));
    write_to(dir / "converge_efficiency.csv", res.timing_table(md));
    for (const auto& m : res.orders) std::cout << m.method << " order " << format_double(m.order()) << "\n";
    return 0;
}

int cmd_bench(const Options& o) {
    const KeyValues kv = load(o);
    const StudyConfig st = parse_study_config(kv, StudyKind::bench);
    const auto res = run_bench(st.base, study_methods(st, {"ExpSymp2", "IRK2"}), st.repetitions);
    write_to(out_dir(o) / "bench.csv", res.table(echo(kv)));
    for (const auto& r : res.rows) std::cout << r.method << " " << format_double(r.median()) << "s\n";
    for (const auto& [name, ratio] : res.speedups()) std::cout << "speedup " << name << " " << format_double(ratio) << "\n";
    return 0;
}

int cmd_figure(const Options& o) {
    const KeyValues kv = load(o);
    const StudyConfig st = parse_study_config(kv, StudyKind::figure);
    if (st.figure.empty()) throw ConfigError("study.figure is required");
    const FigureBundle b = run_figure(st, o.jobs);
    const fs::path dir = out_dir(o) / ("figure_" + file_safe(b.id));
    for (const auto& c : b.curves) write_to(dir / (file_safe(c.name) + ".csv"), c.table);
    return 0;
}

int cmd_poincare(const Options& o) {
    const KeyValues kv = load(o);
    const StudyConfig st = parse_study_config(kv, StudyKind::poincare);
    if (st.base.problem.name != "integrable1d") throw ConfigError("poincare supports problem.name = integrable1d only");
    const auto seeds = st.seeds.empty() ? default_section_seeds() : st.seeds;
    const auto res = run_poincare(seeds, st.base.h, st.base.n_steps(), o.jobs);
    const fs::path dir = out_dir(o) / "poincare";
    const Metadata md = echo(kv);
    CsvTable summary;
    summary.metadata = md;
    summary.columns = {"q0", "y0", "crossings", "mean_nearest_neighbor"};
    for (const auto& r : res) {
        write_to(dir / ("seed_" + file_safe(format_double(r.q0)) + "_" + file_safe(format_double(r.y0)) + ".csv"),
                 section_table(r, md));
        summary.rows.push_back(
            {format_double(r.q0), format_double(r.y0), std::to_string(r.crossings.size()), format_double(r.spread)});
    }
    write_to(dir / "summary.csv", summary);
    return 0;
}

int cmd_lyapunov(const Options& o) {
    const KeyValues kv = load(o);
    StudyConfig st = parse_study_config(kv, StudyKind::lyapunov);
    RunConfig base = st.base;
    if (!kv.has("problem.name")) {
        RunConfig def = defaults_for_problem("pn");
        def.method = IntegratorSpec::exp_symp(4);
        def.t_end = 1e5;
        def.stride = 100;
        base = apply_run_keys(kv, def);
    }
    std::vector<std::string> presets = st.presets;
    if (presets.empty()) presets = base.problem.name == "pn" ? std::vector<std::string>{"traj1_regular", "traj2_chaotic"}
                                                             : std::vector<std::string>{""};
    std::vector<std::vector<LyapunovPoint>> out(presets.size());
    parallel_for(presets.size(), o.jobs, [&](std::size_t i) {
        RunConfig c = base;
        if (!presets[i].empty()) c.problem.preset = presets[i];
        out[i] = run_lyapunov(c, st.d0);
    });
    for (std::size_t i = 0; i < presets.size(); ++i) {
        Metadata md = echo(kv);
        md.emplace_back("method", base.method.name());
        if (!presets[i].empty()) md.emplace_back("preset", presets[i]);
        const std::string name = presets[i].empty() ? base.problem.name : presets[i];
        write_to(out_dir(o) / ("lyapunov_" + file_safe(name) + ".csv"), lyapunov_table(out[i], md));
        if (!out[i].empty()) std::cout << name << " sigma(T) = " << format_double(out[i].back().sigma) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"xsymp: explicit symplectic integrators for inseparable Hamiltonians"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1, 1);
    Options o;

    struct Sub {
        const char* name;
        const char* help;
        int (*fn)(const Options&);
    };
    const Sub subs[] = {{"run", "single integration to CSV", cmd_run},
                        {"converge", "convergence, efficiency or growth sweep", cmd_converge},
                        {"bench", "wall-clock comparison", cmd_bench},
                        {"figure", "data bundle for a named figure", cmd_figure},
                        {"poincare", "sections of the doubled Problem-1 flow", cmd_poincare},
                        {"lyapunov", "two-particle Lyapunov indicator", cmd_lyapunov}};
    std::vector<std::pair<CLI::App*, int (*)(const Options&)>> handlers;
    for (const Sub& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        sub->add_option("--config", o.config, "configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory (default $XSYMP_OUT_DIR or ./xsymp_out)");
        sub->add_option("--jobs", o.jobs, "parallel sweep cells")->check(CLI::Range(1, 1024));
        sub->add_option("--seed", o.seed, "override run.seed");
        handlers.emplace_back(sub, s.fn);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        for (auto& [sub, fn] : handlers)
            if (sub->parsed()) return fn(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const StepError& e) {
        std::cerr << "runtime error at step " << e.step_index() << ": " << e.what() << "\n";
        return 3;
    } catch (const ReferenceUnreliable& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
