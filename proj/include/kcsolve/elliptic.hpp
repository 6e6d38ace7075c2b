#pragma once

#include <cstddef>
#include <vector>

#include "kcsolve/grid.hpp"

namespace kcsolve {

/// Cholesky factor of a symmetric positive definite band matrix, stored
/// row by row as the lower band (bandwidth + 1 entries per row).
class BandedCholesky {
public:
    BandedCholesky() = default;

    /// `band[i * (bandwidth + 1) + (j - i + bandwidth)]` holds A(i, j), j in [i - bandwidth, i].
    BandedCholesky(std::size_t n, std::size_t bandwidth, std::vector<double> band);

    std::size_t size() const noexcept { return n_; }
    std::size_t bandwidth() const noexcept { return bw_; }

    /// Solves A x = b in place.
    void solve_in_place(std::span<double> b) const;

private:
    double& at(std::size_t i, std::size_t j) { return band_[i * (bw_ + 1) + (j + bw_ - i)]; }
    double at(std::size_t i, std::size_t j) const { return band_[i * (bw_ + 1) + (j + bw_ - i)]; }

    std::size_t n_ = 0;
    std::size_t bw_ = 0;
    std::vector<double> band_;
};

enum class SolverKind { automatic, banded, conjugate_gradient };

/// Inverse of the Dirichlet operator -Δ_h on a grid: the discrete Green
/// operator. Immutable after construction; solve() may be called concurrently.
///
/// 1D grids and 2D grids up to 129 interior nodes per axis use a banded
/// Cholesky factorization. Larger 2D grids fall back to conjugate gradients
/// with relative residual 1e-12.
class GreenOperator {
public:
    explicit GreenOperator(const Grid& grid, SolverKind kind = SolverKind::automatic,
                           std::size_t cg_max_iterations = 0);

    const Grid& grid() const noexcept { return grid_; }
    SolverKind kind() const noexcept { return kind_; }

    /// u with -Δ_h u = f. Throws Error(solver_failure) if CG hits its cap.
    Field solve(const Field& f) const;

    /// ξ = solve(1), computed once at construction.
    const Field& torsion() const noexcept { return torsion_; }

private:
    Field solve_cg(const Field& f) const;

    Grid grid_;
    SolverKind kind_;
    std::size_t cg_max_iterations_;
    BandedCholesky factor_;
    Field torsion_;
};

inline Field solve_poisson(const GreenOperator& green, const Field& f) { return green.solve(f); }
inline const Field& torsion_function(const GreenOperator& green) { return green.torsion(); }

struct EigenPair {
    double lambda1;
    Field phi1;  ///< positive, max value exactly 1
    int iterations;
};

/// Principal Dirichlet eigenpair by inverse power iteration. Stops once
/// successive Rayleigh quotients agree to tol * lambda and the eigen-residual
/// is below 1e-10 * lambda (or the roundoff floor of the stencil).
/// Throws Error(no_convergence) after 10^4 iterations.
EigenPair principal_eigenpair(const GreenOperator& green, double tol = 1e-12);

/// (h_1 ... h_d * sum |u_i|^p)^(1/p). Throws Error(invalid_exponent) if p < 1.
double lp_norm(const Field& u, double p);

/// sqrt(vol * u . (-Δ_h u)), the discrete Dirichlet energy.
double h1_seminorm(const Field& u);

} // namespace kcsolve
