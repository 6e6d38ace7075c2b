#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "kcsolve/core.hpp"

namespace kcsolve {

/// Largest interior node count per axis accepted by the dense Newton oracle.
inline constexpr std::size_t kOracleAxisLimit = 65;

struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
};

struct NewtonOptions {
    double tol = 1e-12;           ///< on ‖F‖_∞ / (1 + g_max)
    int max_iter = 50;
    std::optional<double> g_max;  ///< defaults to g_max over [0, max u0]
};

struct OracleResult {
    Field u;
    int newton_iterations = 0;
    double final_residual = 0.0;  ///< ‖F(u)‖_∞ / (1 + g_max)
    bool converged = false;
};

/// F(u) = A(‖u‖_p, ‖∇u‖_2)(−Δ_h u) − g(·, u) for `spec` as given, without normalization.
Field nonlocal_residual(const ProblemSpec& spec, const Field& u);

/// Jacobian of F including the rank-one terms from ∂A/∂s and ∂A/∂t.
/// A's partials and g's s-derivative come from finite differences.
DenseMatrix newton_jacobian(const ProblemSpec& spec, const Field& u);

/// Damped Newton on the full nonlocal system (normalized by m). Step halving
/// down to 2^-20 until ‖F‖_∞ decreases; failure to decrease ends the run with
/// converged = false. Throws Error(singular_jacobian), and
/// Error(parameter_out_of_range) on grids above kOracleAxisLimit.
OracleResult newton_solve(const ProblemSpec& spec, const GreenOperator& green, const Field& u0,
                          const NewtonOptions& options = {});

struct PositivityReport {
    bool dense_checked = false;
    double min_entry = 0.0;        ///< min of the assembled inverse (dense variant only)
    bool torsion_matches = false;  ///< solve(1) equals the cached torsion and is >= 0
    bool monotone = false;         ///< f <= f' implies solve(f) <= solve(f') on random pairs
    bool passed = false;
};

/// Discrete comparison principle. The dense inverse is assembled when the
/// grid has at most 64 interior nodes; the row-sum and monotonicity checks
/// always run.
PositivityReport green_positivity_check(const GreenOperator& green, std::uint64_t seed = 0, int pairs = 50);

} // namespace kcsolve
