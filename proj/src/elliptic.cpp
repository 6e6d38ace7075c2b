#include "kcsolve/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kcsolve {

BandedCholesky::BandedCholesky(std::size_t n, std::size_t bandwidth, std::vector<double> band)
    : n_(n), bw_(bandwidth), band_(std::move(band)) {
    if (band_.size() != n_ * (bw_ + 1)) throw Error(ErrorCode::shape_mismatch, "band storage has the wrong size");
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t first = i > bw_ ? i - bw_ : 0;
        for (std::size_t j = first; j <= i; ++j) {
            double sum = at(i, j);
            const std::size_t kfirst = std::max(first, j > bw_ ? j - bw_ : 0);
            for (std::size_t k = kfirst; k < j; ++k) sum -= at(i, k) * at(j, k);
            if (j == i) {
                if (!(sum > 0.0)) throw Error(ErrorCode::solver_failure, "matrix is not positive definite");
                at(i, i) = std::sqrt(sum);
            } else {
                at(i, j) = sum / at(j, j);
            }
        }
    }
}

void BandedCholesky::solve_in_place(std::span<double> b) const {
    // L y = b
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t first = i > bw_ ? i - bw_ : 0;
        double sum = b[i];
        for (std::size_t k = first; k < i; ++k) sum -= at(i, k) * b[k];
        b[i] = sum / at(i, i);
    }
    // L^T x = y
    for (std::size_t ii = n_; ii-- > 0;) {
        const std::size_t last = std::min(n_ - 1, ii + bw_);
        double sum = b[ii];
        for (std::size_t k = ii + 1; k <= last; ++k) sum -= at(k, ii) * b[k];
        b[ii] = sum / at(ii, ii);
    }
}

namespace {

constexpr std::size_t kBandedAxisLimit = 129;

BandedCholesky factor_laplacian(const Grid& grid) {
    const std::size_t nx = grid.interior(0);
    const double cx = 1.0 / (grid.spacing(0) * grid.spacing(0));
    if (grid.dimension() == 1) {
        std::vector<double> band(nx * 2, 0.0);
        for (std::size_t i = 0; i < nx; ++i) {
            band[i * 2 + 1] = 2.0 * cx;
            if (i > 0) band[i * 2] = -cx;
        }
        return BandedCholesky(nx, 1, std::move(band));
    }
    const std::size_t ny = grid.interior(1);
    const double cy = 1.0 / (grid.spacing(1) * grid.spacing(1));
    const std::size_t bw = nx;
    const std::size_t n = nx * ny;
    std::vector<double> band(n * (bw + 1), 0.0);
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t k = grid.index(i, j);
            double* row = band.data() + k * (bw + 1);
            row[bw] = 2.0 * cx + 2.0 * cy;
            if (i > 0) row[bw - 1] = -cx;
            if (j > 0) row[0] = -cy;
        }
    }
    return BandedCholesky(n, bw, std::move(band));
}

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

} // namespace

GreenOperator::GreenOperator(const Grid& grid, SolverKind kind, std::size_t cg_max_iterations)
    : grid_(grid), kind_(kind), cg_max_iterations_(cg_max_iterations), torsion_(grid) {
    if (kind_ == SolverKind::automatic) {
        const bool small = grid_.dimension() == 1 ||
                           (grid_.interior(0) <= kBandedAxisLimit && grid_.interior(1) <= kBandedAxisLimit);
        kind_ = small ? SolverKind::banded : SolverKind::conjugate_gradient;
    }
    if (cg_max_iterations_ == 0) cg_max_iterations_ = 50 * (grid_.interior(0) + grid_.interior(1)) + 500;
    if (kind_ == SolverKind::banded) factor_ = factor_laplacian(grid_);
    torsion_ = solve(Field(grid_, 1.0));
}

Field GreenOperator::solve(const Field& f) const {
    if (!(f.grid() == grid_)) throw Error(ErrorCode::shape_mismatch, "right-hand side is not defined on this grid");
    if (kind_ == SolverKind::conjugate_gradient) return solve_cg(f);
    Field u = f;
    factor_.solve_in_place(u.values());
    return u;
}

Field GreenOperator::solve_cg(const Field& f) const {
    Field x(grid_);
    Field r = f;
    const double bnorm = std::sqrt(dot(f.values(), f.values()));
    if (bnorm == 0.0) return x;
    Field p = r;
    double rr = dot(r.values(), r.values());
    for (std::size_t it = 0; it < cg_max_iterations_; ++it) {
        const Field ap = apply_laplacian(grid_, p);
        const double alpha = rr / dot(p.values(), ap.values());
        for (std::size_t k = 0; k < x.size(); ++k) {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        const double rr_next = dot(r.values(), r.values());
        if (std::sqrt(rr_next) <= 1e-12 * bnorm) return x;
        const double beta = rr_next / rr;
        rr = rr_next;
        for (std::size_t k = 0; k < p.size(); ++k) p[k] = r[k] + beta * p[k];
    }
    throw Error(ErrorCode::solver_failure,
                "conjugate gradients did not reach relative residual 1e-12 in " +
                    std::to_string(cg_max_iterations_) + " iterations");
}

EigenPair principal_eigenpair(const GreenOperator& green, double tol) {
    if (!(tol > 0.0)) throw Error(ErrorCode::parameter_out_of_range, "eigen tolerance must be positive");
    const Grid& grid = green.grid();

    double stencil_norm = 0.0;
    for (int k = 0; k < grid.dimension(); ++k) stencil_norm += 4.0 / (grid.spacing(k) * grid.spacing(k));
    const double roundoff_floor = 64.0 * std::numeric_limits<double>::epsilon() * stencil_norm;

    Field v = green.torsion();
    v *= 1.0 / v.max();
    double lambda_prev = std::numeric_limits<double>::infinity();
    constexpr int kMaxIterations = 10000;
    for (int it = 1; it <= kMaxIterations; ++it) {
        Field w = green.solve(v);
        // Orient positive, then normalize so that the largest entry is exactly 1.
        if (std::accumulate(w.values().begin(), w.values().end(), 0.0) < 0.0) w *= -1.0;
        const double peak = w.max();
        for (double& x : w.values()) x /= peak;

        const Field lw = apply_laplacian(grid, w);
        const double lambda = dot(w.values(), lw.values()) / dot(w.values(), w.values());
        double residual = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) residual = std::max(residual, std::abs(lw[k] - lambda * w[k]));

        const bool settled = std::abs(lambda - lambda_prev) < tol * lambda;
        if (settled && residual <= std::max(1e-10 * lambda, roundoff_floor)) return EigenPair{lambda, std::move(w), it};
        lambda_prev = lambda;
        v = std::move(w);
    }
    throw Error(ErrorCode::no_convergence, "inverse power iteration did not converge in 10^4 iterations");
}

double lp_norm(const Field& u, double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) throw Error(ErrorCode::invalid_exponent, "norm exponent must lie in [1, inf)");
    double sum = 0.0;
    if (p == 2.0) {
        for (double v : u.values()) sum += v * v;
        return std::sqrt(u.grid().cell_volume() * sum);
    }
    for (double v : u.values()) sum += std::pow(std::abs(v), p);
    return std::pow(u.grid().cell_volume() * sum, 1.0 / p);
}

double h1_seminorm(const Field& u) {
    const Field lu = apply_laplacian(u.grid(), u);
    const double energy = u.grid().cell_volume() * dot(u.values(), lu.values());
    return std::sqrt(std::max(energy, 0.0));
}

} // namespace kcsolve
