#pragma once

// Plain-text run and study configuration.
//
// Grammar (one entry per line, LF or CRLF):
//   line    := blank | comment | entry
//   comment := optional spaces, '#', anything
//   entry   := key spaces? '=' spaces? value
//   key     := section '.' name   (section in problem, method, run, study)
// Values are trimmed; a trailing '#' comment is not stripped. Lists are
// comma separated; pairs inside a list use ':' (e.g. 0.5:0.5, 0.2752:0.0731).
// Unknown keys and duplicate keys are errors.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "integrators.hpp"
#include "problems.hpp"

namespace xsymp {

/// Parsed key = value entries, keeping file order for echoing.
class KeyValues {
public:
    void set(const std::string& key, const std::string& value) {
        if (!values_.count(key)) order_.push_back(key);
        values_[key] = value;
    }
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::string& get(const std::string& key) const { return values_.at(key); }
    std::optional<std::string> find(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }
    const std::vector<std::string>& keys() const { return order_; }
    std::vector<std::pair<std::string, std::string>> entries() const {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& k : order_) out.emplace_back(k, values_.at(k));
        return out;
    }

private:
    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.push_back("");
    return out;
}

}  // namespace detail

inline KeyValues parse_key_values(const std::string& text) {
    static const char* sections[] = {"problem.", "method.", "run.", "study."};
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));
        bool known_section = false;
        for (const char* s : sections)
            if (key.rfind(s, 0) == 0 && key.size() > std::char_traits<char>::length(s)) known_section = true;
        if (!known_section)
            throw ConfigError("line " + std::to_string(lineno) + ": key '" + key +
                              "' must start with problem., method., run. or study.");
        if (kv.has(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv.set(key, value);
    }
    return kv;
}

inline KeyValues load_key_values(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_key_values(ss.str());
}

inline double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const char* b = v.data();
    const char* e = v.data() + v.size();
    if (!v.empty() && *b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || ptr != e || v.empty())
        throw ConfigError(key + ": '" + v + "' is not a number");
    return out;
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
        throw ConfigError(key + ": '" + v + "' is not an integer");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": '" + v + "' is not a boolean");
}

inline std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : detail::split(v, ',')) out.push_back(parse_double(key, item));
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

inline std::vector<std::pair<double, double>> parse_pair_list(const std::string& key, const std::string& v) {
    std::vector<std::pair<double, double>> out;
    for (const auto& item : detail::split(v, ',')) {
        const auto parts = detail::split(item, ':');
        if (parts.size() != 2) throw ConfigError(key + ": '" + item + "' is not an a:b pair");
        out.emplace_back(parse_double(key, parts[0]), parse_double(key, parts[1]));
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

/// Method shorthands: ExpSymp2/4, IRK2, IRK4, SemiSymp2/4, Pihajoki2/4,
/// PihajokiMix2/4, Tao2/4 (omega from method.omega), Euler1.
inline IntegratorSpec parse_method_name(const std::string& name) {
    auto order_of = [&](const std::string& prefix) -> std::optional<int> {
        if (name.rfind(prefix, 0) != 0) return std::nullopt;
        const std::string rest = name.substr(prefix.size());
        if (rest == "2") return 2;
        if (rest == "4") return 4;
        return std::nullopt;
    };
    if (name == "IRK2") return IntegratorSpec::irk2();
    if (name == "IRK4") return IntegratorSpec::irk4();
    if (name == "Euler1") return IntegratorSpec::explicit_euler();
    if (auto r = order_of("ExpSymp")) return IntegratorSpec::exp_symp(*r);
    if (auto r = order_of("SemiSymp")) return IntegratorSpec::semisymp(*r);
    if (auto r = order_of("PihajokiMix")) return IntegratorSpec::pihajoki(*r, true);
    if (auto r = order_of("Pihajoki")) return IntegratorSpec::pihajoki(*r, false);
    if (auto r = order_of("Tao")) {
        IntegratorSpec s = IntegratorSpec::tao(0.0, *r);
        return s;
    }
    throw ConfigError("unknown method name '" + name + "'");
}

inline Family parse_family(const std::string& v) {
    for (Family f : {Family::exp_symp, Family::pihajoki, Family::pihajoki_midmix, Family::tao, Family::semiexplicit,
                     Family::implicit_midpoint, Family::gauss4, Family::weighted_projection, Family::explicit_euler})
        if (to_string(f) == v) return f;
    throw ConfigError("method.family: unknown family '" + v + "'");
}

inline WeightPolicy parse_policy(const std::string& v) {
    for (WeightPolicy w : {WeightPolicy::constant, WeightPolicy::alternating, WeightPolicy::fresh_random_per_step})
        if (to_string(w) == v) return w;
    throw ConfigError("method.weight_policy: unknown policy '" + v + "'");
}

inline ProjectionMode parse_projection(const std::string& v) {
    if (v == "standard") return ProjectionMode::standard;
    if (v == "definition1") return ProjectionMode::definition1;
    throw ConfigError("method.projection: expected standard or definition1, got '" + v + "'");
}

struct ProblemConfig {
    std::string name = "integrable1d";  ///< integrable1d | harmonic | pn
    std::string preset;                 ///< pn presets
    std::size_t dimension = 1;          ///< harmonic only
    std::optional<std::vector<double>> p, q;
    std::optional<double> beta, c, Lambda1, Lambda2;
};

struct RunConfig {
    ProblemConfig problem;
    IntegratorSpec method = IntegratorSpec::exp_symp(2);
    double h = 0.01;
    double t_end = 1000.0;
    std::size_t stride = 100;
    std::string output;
    std::uint64_t seed = 0;
    bool reference = true;
    ReferenceOptions reference_options;

    /// Number of steps t_end / h; throws ConfigError unless it is an
    /// integer up to a few ulps.
    std::size_t n_steps() const {
        if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("run.h must be positive");
        if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("run.t_end must be positive");
        const double n = t_end / h;
        const double r = std::round(n);
        if (r < 1.0 || std::abs(n - r) > 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, r)) {
            char buf[200];
            std::snprintf(buf, sizeof buf, "run.t_end = %.17g is not an integer multiple of run.h = %.17g", t_end,
                          h);
            throw ConfigError(buf);
        }
        return static_cast<std::size_t>(r);
    }

    void validate() const {
        n_steps();
        if (stride < 1) throw ConfigError("run.stride must be >= 1");
    }
};

namespace detail {

inline void check_known(const KeyValues& kv, const std::vector<std::string>& allowed) {
    for (const auto& k : kv.keys())
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw ConfigError("unknown key '" + k + "'");
}

inline const std::vector<std::string>& run_keys() {
    static const std::vector<std::string> keys = {
        "problem.name",       "problem.preset",     "problem.dimension",     "problem.p",
        "problem.q",          "problem.beta",       "problem.c",             "problem.lambda1",
        "problem.lambda2",    "method.name",        "method.family",         "method.order",
        "method.lambda0",     "method.mu0",         "method.lambda",         "method.xi",
        "method.weight_policy", "method.projection", "method.omega",         "method.tol",
        "method.max_iters",   "run.h",              "run.t_end",             "run.stride",
        "run.output",         "run.seed",           "run.reference",         "run.reference_fine",
        "run.reference_check", "run.reference_agreement"};
    return keys;
}

}  // namespace detail

/// Applies problem.*, method.* and run.* entries on top of base.
inline RunConfig apply_run_keys(const KeyValues& kv, RunConfig cfg) {
    auto str = [&](const char* k) { return kv.find(k); };
    auto num = [&](const char* k) -> std::optional<double> {
        if (auto v = kv.find(k)) return parse_double(k, *v);
        return std::nullopt;
    };

    ProblemConfig& pr = cfg.problem;
    if (auto v = str("problem.name")) {
        if (*v != "integrable1d" && *v != "harmonic" && *v != "pn")
            throw ConfigError("problem.name: expected integrable1d, harmonic or pn, got '" + *v + "'");
        pr.name = *v;
    }
    if (auto v = str("problem.preset")) pr.preset = *v;
    if (auto v = str("problem.dimension")) {
        const auto d = parse_int("problem.dimension", *v);
        if (d < 1) throw ConfigError("problem.dimension must be >= 1");
        pr.dimension = static_cast<std::size_t>(d);
    }
    if (auto v = str("problem.p")) pr.p = parse_double_list("problem.p", *v);
    if (auto v = str("problem.q")) pr.q = parse_double_list("problem.q", *v);
    if (auto v = num("problem.beta")) pr.beta = *v;
    if (auto v = num("problem.c")) pr.c = *v;
    if (auto v = num("problem.lambda1")) pr.Lambda1 = *v;
    if (auto v = num("problem.lambda2")) pr.Lambda2 = *v;
    if (pr.name == "pn" && pr.preset.empty()) pr.preset = "traj1_regular";

    IntegratorSpec& m = cfg.method;
    if (auto v = str("method.name")) {
        const IntegratorSpec named = parse_method_name(*v);
        m.family = named.family;
        m.order = named.order;
    }
    if (auto v = str("method.family")) m.family = parse_family(*v);
    if (auto v = str("method.order")) m.order = static_cast<int>(parse_int("method.order", *v));
    if (auto v = num("method.lambda0")) m.factors.lambda0 = *v;
    if (auto v = num("method.mu0")) m.factors.mu0 = *v;
    if (auto v = str("method.lambda")) m.weights.lambda = parse_double_list("method.lambda", *v);
    if (auto v = str("method.xi")) m.weights.xi = parse_double_list("method.xi", *v);
    if (auto v = str("method.weight_policy")) m.weight_policy = parse_policy(*v);
    if (auto v = str("method.projection")) m.projection = parse_projection(*v);
    if (auto v = num("method.omega")) m.omega = MixingStrength(*v);
    if (auto v = num("method.tol")) m.tol = *v;
    if (auto v = str("method.max_iters")) m.max_iters = static_cast<int>(parse_int("method.max_iters", *v));

    if (auto v = num("run.h")) cfg.h = *v;
    if (auto v = num("run.t_end")) cfg.t_end = *v;
    if (auto v = str("run.stride")) {
        const auto s = parse_int("run.stride", *v);
        if (s < 1) throw ConfigError("run.stride must be >= 1");
        cfg.stride = static_cast<std::size_t>(s);
    }
    if (auto v = str("run.output")) cfg.output = *v;
    if (auto v = str("run.seed")) {
        const auto s = parse_int("run.seed", *v);
        if (s < 0) throw ConfigError("run.seed must be >= 0");
        cfg.seed = static_cast<std::uint64_t>(s);
    }
    if (auto v = str("run.reference")) cfg.reference = parse_bool("run.reference", *v);
    if (auto v = str("run.reference_fine")) {
        const auto f = parse_int("run.reference_fine", *v);
        if (f < 1) throw ConfigError("run.reference_fine must be >= 1");
        cfg.reference_options.fine_factor = static_cast<std::size_t>(f);
    }
    if (auto v = str("run.reference_check")) {
        const auto f = parse_int("run.reference_check", *v);
        if (f < 1) throw ConfigError("run.reference_check must be >= 1");
        cfg.reference_options.check_factor = static_cast<std::size_t>(f);
    }
    if (auto v = num("run.reference_agreement")) cfg.reference_options.agreement = *v;
    m.rng_seed = cfg.seed;
    return cfg;
}

/// Defaults for a problem: reference refinement and agreement levels.
inline RunConfig defaults_for_problem(const std::string& name) {
    RunConfig cfg;
    cfg.problem.name = name;
    if (name == "pn") {
        cfg.problem.preset = "traj1_regular";
        cfg.h = 1.0;
        cfg.t_end = 10000.0;
        cfg.stride = 10;
        cfg.reference_options.fine_factor = 50;
        cfg.reference_options.check_factor = 100;
        cfg.reference_options.agreement = 1e-8;
    }
    return cfg;
}

inline RunConfig parse_run_config(const KeyValues& kv) {
    std::vector<std::string> allowed = detail::run_keys();
    detail::check_known(kv, allowed);
    const std::string pname = kv.find("problem.name").value_or("integrable1d");
    RunConfig cfg = apply_run_keys(kv, defaults_for_problem(pname));
    cfg.validate();
    return cfg;
}

enum class StudyKind { converge, efficiency, growth, bench, figure, poincare, lyapunov };

struct StudyConfig {
    StudyKind kind = StudyKind::converge;
    std::string figure;  ///< 1c, 2, 3, 4, 5, 7, 8
    RunConfig base;
    std::vector<double> hs;
    std::vector<std::string> methods;
    std::vector<FactorPair> factors;
    std::vector<double> omegas;
    std::size_t repetitions = 3;
    std::vector<std::pair<double, double>> seeds;  ///< poincare (q0, y0) seeds
    std::vector<std::string> presets;              ///< lyapunov presets
    double d0 = 1e-8;
    /// The parsed entries, re-applied over figure defaults.
    KeyValues source;
};

inline StudyKind parse_study_kind(const std::string& v) {
    if (v == "converge") return StudyKind::converge;
    if (v == "efficiency") return StudyKind::efficiency;
    if (v == "growth") return StudyKind::growth;
    if (v == "bench") return StudyKind::bench;
    if (v == "figure" || v.rfind("figure:", 0) == 0) return StudyKind::figure;
    if (v == "poincare") return StudyKind::poincare;
    if (v == "lyapunov") return StudyKind::lyapunov;
    throw ConfigError("study.kind: unknown kind '" + v + "'");
}

inline std::vector<std::string> parse_name_list(const std::string& key, const std::string& v) {
    auto out = detail::split(v, ',');
    for (const auto& s : out)
        if (s.empty()) throw ConfigError(key + ": empty list entry");
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

/// Study settings other than the base run; base is filled by the study
/// runner after figure defaults are known.
inline StudyConfig parse_study_config(const KeyValues& kv, std::optional<StudyKind> expected = std::nullopt) {
    std::vector<std::string> allowed = detail::run_keys();
    for (const char* k : {"study.kind", "study.figure", "study.h", "study.methods", "study.factors", "study.omega",
                          "study.repetitions", "study.seeds", "study.presets", "study.d0"})
        allowed.emplace_back(k);
    detail::check_known(kv, allowed);
    StudyConfig st;
    st.source = kv;
    if (auto v = kv.find("study.kind")) {
        st.kind = parse_study_kind(*v);
        if (v->rfind("figure:", 0) == 0) st.figure = v->substr(7);
    } else if (expected) {
        st.kind = *expected;
    } else {
        throw ConfigError("study.kind is required");
    }
    // converge also accepts the efficiency and growth sweeps
    if (expected && st.kind != *expected &&
        !(*expected == StudyKind::converge && (st.kind == StudyKind::efficiency || st.kind == StudyKind::growth)))
        throw ConfigError("study.kind does not match the subcommand");
    if (auto v = kv.find("study.figure")) {
        if (!st.figure.empty() && st.figure != *v) throw ConfigError("study.kind and study.figure disagree");
        st.figure = *v;
    }
    if (auto v = kv.find("study.h")) st.hs = parse_double_list("study.h", *v);
    for (double h : st.hs)
        if (!(h > 0.0)) throw ConfigError("study.h entries must be positive");
    if (auto v = kv.find("study.methods")) {
        st.methods = parse_name_list("study.methods", *v);
        for (const auto& m : st.methods) parse_method_name(m);
    }
    if (auto v = kv.find("study.factors"))
        for (auto [a, b] : parse_pair_list("study.factors", *v)) st.factors.push_back({a, b});
    if (auto v = kv.find("study.omega")) st.omegas = parse_double_list("study.omega", *v);
    for (double w : st.omegas) MixingStrength check(w);
    if (auto v = kv.find("study.repetitions")) {
        const auto r = parse_int("study.repetitions", *v);
        if (r < 1) throw ConfigError("study.repetitions must be >= 1");
        st.repetitions = static_cast<std::size_t>(r);
    }
    if (auto v = kv.find("study.seeds")) st.seeds = parse_pair_list("study.seeds", *v);
    if (auto v = kv.find("study.presets")) st.presets = parse_name_list("study.presets", *v);
    if (auto v = kv.find("study.d0")) {
        st.d0 = parse_double("study.d0", *v);
        if (!(st.d0 > 0.0)) throw ConfigError("study.d0 must be positive");
    }
    const std::string pname = kv.find("problem.name").value_or("integrable1d");
    st.base = apply_run_keys(kv, defaults_for_problem(pname));
    return st;
}

}  // namespace xsymp
