#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kcsolve/problems.hpp"

namespace kcsolve::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_config = 1,
    exit_max_iter = 2,
    exit_left_interval = 3,
    exit_condition = 4,
    exit_oracle_inconclusive = 5,
    exit_disagreement = 6,
    exit_io = 10,
};

struct RunConfig {
    std::string problem = "example1";
    std::string f = "poly-signchanging";
    std::optional<std::filesystem::path> definition;

    std::vector<double> domain{0.0, 1.0};  ///< a,b or ax,bx,ay,by
    int n = 128;                           ///< cells per axis

    double p = 2.0;
    double c = 1.0;
    double d = 1.0;
    double q = 0.5;
    std::optional<double> lambda;
    double lambda_frac = 0.5;
    std::optional<double> mu;
    double mu_frac = 0.5;
    std::optional<double> sigma;  ///< builder default when unset

    double theta = 1.0;
    double tol = 1e-10;
    int max_iter = 10000;
    std::string start = "psi-end";

    std::uint64_t seed = 0;
    int trials = 1000;
    int points = 16;
    int jobs = 0;  ///< 0: KCSOLVE_JOBS or hardware concurrency

    std::filesystem::path out_dir = ".";
};

DomainSpec domain_of(const RunConfig& config);

/// Builds the configured problem on `green`. With `enforce`, example
/// parameters must lie in their guaranteed range and (G1)/(G2) must hold.
BuiltProblem build_problem(const RunConfig& config, const GreenOperator& green, bool enforce = true);

/// `key = expression` lines; keys A (s, t), m, g (x, y, u), p, alpha,
/// phi and psi (x, y, xi, phi1). '#' starts a comment.
BuiltProblem load_definition(const std::filesystem::path& path, const GreenOperator& green);

/// Presets `constant:<v>` and `poly-signchanging`, or a file of `x value`
/// rows interpolated linearly (1D only).
SpatialFunction parse_forcing(const std::string& text, int dimension);

int cmd_solve(const RunConfig& config);
int cmd_verify(const RunConfig& config);
int cmd_sweep(const RunConfig& config);
int cmd_oracle_compare(const RunConfig& config);

/// Maps an error to its exit code: I/O errors to 10, failed conditions to 4,
/// everything else to 1.
int exit_code_for(const Error& error);

} // namespace kcsolve::cli
