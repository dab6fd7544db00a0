#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace xsymp {

/// One diagnostic sample of a run.
struct Sample {
    double t = 0.0;
    std::optional<double> ge;   ///< global error vs reference, when one was supplied
    double ghe = 0.0;           ///< |H(s_n) - H(s_0)|
    double delta = 0.0;         ///< distance of the (pre-projection) extended state from N
    std::optional<std::array<double, 3>> j_drift;  ///< componentwise |J(t) - J(0)|
};

struct RunMetadata {
    std::string method;
    std::string problem;
    double h = 0.0;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
    std::uint64_t n_steps = 0;
    std::uint64_t stride = 1;
    std::uint64_t total_iterations = 0;
};

/// Time series of diagnostics for a single integration; t is strictly increasing.
struct RunRecord {
    RunMetadata meta;
    std::vector<Sample> samples;
};

}  // namespace xsymp
