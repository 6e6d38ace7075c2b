#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kcsolve/core.hpp"

namespace kcsolve {

using SpatialFunction = std::function<double(const Point&)>;

/// Nodal lookup for a field: exact at interior nodes, nearest node elsewhere.
SpatialFunction nodal_function(const Field& f);

struct ConditionReport {
    bool passed = false;
    double sub_margin = 0.0;    ///< min of g(ω) − β^α(−Δ_h φ) over tested nodes
    double super_margin = 0.0;  ///< min of (−Δ_h ψ) − g(ω)
    std::optional<double> order_margin;  ///< min of φ and ψ − φ (G1 only)
    double slack = 0.0;         ///< η the margins are compared against
    double worst_margin() const;
};

/// Nodewise sub/supersolution inequalities plus 0 <= φ <= ψ, with slack
/// η = 1e-9 (1 + g_max).
ConditionReport check_G1(const Grid& grid, const NonlinearityG& g, const OrderInterval& interval);

struct G2Options {
    std::vector<double> beta_levels = default_beta_levels();
    int omega_trials = 200;
    std::uint64_t seed = 0;

    static std::vector<double> default_beta_levels();  ///< 1, 1/2, ..., 2^-10
};

/// Sampled check of β^α(−Δφ) <= g(x, ω) <= −Δψ for ω in [βφ, ψ]. The
/// endpoints ω = βφ and ω = ψ are always among the samples. Not a proof.
ConditionReport check_G2(const Grid& grid, const NonlinearityG& g, const OrderInterval& interval,
                         const G2Options& options = {});

struct BuiltProblem {
    std::string name;
    ProblemSpec spec;
    OrderInterval interval;
    std::optional<double> threshold;  ///< λ_f or μ_0
    std::optional<double> parameter;  ///< the λ or μ the interval was built for
    std::vector<std::pair<std::string, double>> constants;

    double constant(const std::string& key) const;
};

/// Build options shared by all examples. With `enforce`, the parameter must
/// lie inside its guaranteed range and the built interval must pass
/// check_G1 and check_G2; without it the instance is returned unchecked.
struct BuildChecks {
    bool enforce = true;
    std::uint64_t seed = 0;
};

// -(1 + d‖u‖_2^2)Δu = u^p + λ f(x)
struct Example1Params {
    double p = 2.0;
    double d = 1.0;
    double sigma = 0.5;
    std::optional<double> lambda;  ///< absolute λ; otherwise lambda_frac * λ_f
    double lambda_frac = 0.5;
    BuildChecks checks;
};

// -(1 + c‖u‖_2^2 + d‖∇u‖_2^2)Δu = μ u^q + u^p
struct Example2Params {
    double c = 1.0;
    double d = 1.0;
    double q = 0.5;
    double p = 2.0;
    double sigma = 0.5;
    std::optional<double> mu;
    double mu_frac = 0.5;
    BuildChecks checks;
};

// -(1 + d sin^2(‖∇u‖_2))Δu = sin^2(u) + f(x)
struct Example3Params {
    double d = 1.0;
    BuildChecks checks;
};

// -(1 + d‖∇u‖_2^2)Δu = μ u^q + π sin^3(u)
struct Example4Params {
    double d = 1.0;
    double q = 0.5;
    double sigma = 0.9;
    std::optional<double> mu;
    double mu_frac = 0.5;
    BuildChecks checks;
};

struct Example1Constants {
    double M0;
    double lambda_f;
};
/// M_0 = σ (max ξ^p + max|f|)^{-1/(p-1)}, λ_f = M_0^p.
Example1Constants example1_constants(double max_xi, double max_abs_f, double p, double sigma);

struct ThresholdConstants {
    double M1;
    double mu0;
};
/// M_1 = σ (max ξ^p)^{-1/(p-1)}, μ_0 = (M_1 − M_1^p max ξ^p) / (M_1^q max ξ^q).
ThresholdConstants example2_constants(double max_xi, double p, double q, double sigma);
/// M_1 = σ min((π max ξ^3)^{-1/2}, (π/2) / max ξ), μ_0 = (M_1 − π M_1^3 max ξ^3) / (M_1^q max ξ^q).
ThresholdConstants example4_constants(double max_xi, double q, double sigma);

BuiltProblem build_example1(const GreenOperator& green, const SpatialFunction& f, const Example1Params& params = {});
BuiltProblem build_example1(const GreenOperator& green, const Field& f, const Example1Params& params = {});
BuiltProblem build_example2(const GreenOperator& green, const Example2Params& params = {});
BuiltProblem build_example3(const GreenOperator& green, const SpatialFunction& f, const Example3Params& params = {});
BuiltProblem build_example3(const GreenOperator& green, const Field& f, const Example3Params& params = {});
BuiltProblem build_example4(const GreenOperator& green, const Example4Params& params = {});

} // namespace kcsolve
