#include "kcsolve/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "kcsolve/random.hpp"

namespace kcsolve {

namespace {

/// dA/dx along one argument; one-sided second-order stencil near 0 keeps the
/// evaluation inside R_+.
template <typename Eval>
double partial(Eval&& eval, double x) {
    const double h = 1e-6 * (1.0 + std::abs(x));
    if (x >= h) return (eval(x + h) - eval(x - h)) / (2.0 * h);
    return (-3.0 * eval(x) + 4.0 * eval(x + h) - eval(x + 2.0 * h)) / (2.0 * h);
}

double g_derivative(const NonlinearityG& g, const Point& x, double s) {
    const double h = 1e-6 * (1.0 + std::abs(s));
    return (g(x, s + h) - g(x, s - h)) / (2.0 * h);
}

Eigen::MatrixXd to_eigen(const DenseMatrix& m) {
    Eigen::MatrixXd out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = m(i, j);
    return out;
}

} // namespace

Field nonlocal_residual(const ProblemSpec& spec, const Field& u) {
    const double a = spec.A(lp_norm(u, spec.p), h1_seminorm(u));
    Field f = apply_laplacian(u.grid(), u);
    f *= a;
    f -= spec.g.evaluate(u);
    return f;
}

DenseMatrix newton_jacobian(const ProblemSpec& spec, const Field& u) {
    const Grid& grid = u.grid();
    const std::size_t n = grid.size();
    const double vol = grid.cell_volume();
    const double p = spec.p;
    const double s = lp_norm(u, p);
    const double t = h1_seminorm(u);
    const double a = spec.A(s, t);
    const double a_s = partial([&](double x) { return spec.A(x, t); }, s);
    const double a_t = partial([&](double x) { return spec.A(s, x); }, t);
    const Field lu = apply_laplacian(grid, u);

    // ∇_u(A(s(u), t(u))) = A_s ∂s/∂u + A_t ∂t/∂u
    std::vector<double> grad_a(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double ds = 0.0;
        if (s > 0.0 && u[k] != 0.0)
            ds = vol * std::copysign(std::pow(std::abs(u[k]), p - 1.0), u[k]) / std::pow(s, p - 1.0);
        const double dt = t > 0.0 ? vol * lu[k] / t : 0.0;
        grad_a[k] = a_s * ds + a_t * dt;
    }

    DenseMatrix jac{n, n, std::vector<double>(n * n, 0.0)};
    // A (−Δ_h) block, assembled column by column from unit vectors.
    Field unit(grid);
    for (std::size_t j = 0; j < n; ++j) {
        unit[j] = 1.0;
        const Field col = apply_laplacian(grid, unit);
        for (std::size_t i = 0; i < n; ++i)
            if (col[i] != 0.0) jac(i, j) = a * col[i];
        unit[j] = 0.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) jac(i, j) += lu[i] * grad_a[j];
        jac(i, i) -= g_derivative(spec.g, grid.coordinate(i), u[i]);
    }
    return jac;
}

OracleResult newton_solve(const ProblemSpec& spec, const GreenOperator& green, const Field& u0,
                          const NewtonOptions& options) {
    spec.validate();
    const Grid& grid = green.grid();
    for (int k = 0; k < grid.dimension(); ++k)
        if (grid.interior(k) > kOracleAxisLimit)
            throw Error(ErrorCode::parameter_out_of_range,
                        "dense Newton oracle supports at most " + std::to_string(kOracleAxisLimit) +
                            " interior nodes per axis");
    if (!(u0.grid() == grid)) throw Error(ErrorCode::shape_mismatch, "initial guess is not on the grid");

    const ProblemSpec work = spec.normalized();
    const double scale = 1.0 + std::abs(options.g_max ? *options.g_max : g_max(work.g, grid, u0));
    auto norm = [](const Field& f) { return f.max_abs(); };

    OracleResult result{.u = u0};
    Field residual = nonlocal_residual(work, result.u);
    double rnorm = norm(residual);
    for (int it = 0; it < options.max_iter; ++it) {
        if (rnorm <= options.tol * scale) {
            result.converged = true;
            break;
        }
        const Eigen::MatrixXd jac = to_eigen(newton_jacobian(work, result.u));
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        if (!(lu.rcond() > 1e-14)) throw Error(ErrorCode::singular_jacobian, "Newton Jacobian is numerically singular");
        const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(residual.values().data(),
                                                                     static_cast<Eigen::Index>(residual.size()));
        const Eigen::VectorXd step = lu.solve(rhs);

        bool accepted = false;
        for (double damping = 1.0; damping >= 0x1.0p-20; damping *= 0.5) {
            Field trial = result.u;
            for (std::size_t k = 0; k < trial.size(); ++k) trial[k] -= damping * step[static_cast<Eigen::Index>(k)];
            Field trial_residual = nonlocal_residual(work, trial);
            const double trial_norm = norm(trial_residual);
            if (trial_norm < rnorm) {
                result.u = std::move(trial);
                residual = std::move(trial_residual);
                rnorm = trial_norm;
                accepted = true;
                break;
            }
        }
        result.newton_iterations = it + 1;
        if (!accepted) break;
    }
    if (!result.converged && rnorm <= options.tol * scale) result.converged = true;
    result.final_residual = rnorm / scale;
    return result;
}

PositivityReport green_positivity_check(const GreenOperator& green, std::uint64_t seed, int pairs) {
    const Grid& grid = green.grid();
    const std::size_t n = grid.size();
    PositivityReport report;

    if (n <= 64) {
        report.dense_checked = true;
        report.min_entry = std::numeric_limits<double>::infinity();
        Field unit(grid);
        for (std::size_t j = 0; j < n; ++j) {
            unit[j] = 1.0;
            report.min_entry = std::min(report.min_entry, green.solve(unit).min());
            unit[j] = 0.0;
        }
    }

    const Field row_sums = green.solve(Field(grid, 1.0));
    report.torsion_matches = sup_distance(row_sums, green.torsion()) == 0.0 && row_sums.min() >= 0.0;

    report.monotone = true;
    UniformStream rng(seed);
    Field lo(grid), hi(grid);
    for (int pair = 0; pair < pairs; ++pair) {
        for (std::size_t k = 0; k < n; ++k) {
            lo[k] = 2.0 * rng.next() - 1.0;
            hi[k] = lo[k] + rng.next();
        }
        const Field a = green.solve(lo);
        const Field b = green.solve(hi);
        const double tol = 1e-12 * (1.0 + std::max(a.max_abs(), b.max_abs()));
        for (std::size_t k = 0; k < n; ++k)
            if (a[k] > b[k] + tol) report.monotone = false;
    }

    report.passed = report.torsion_matches && report.monotone && (!report.dense_checked || report.min_entry >= -1e-13);
    return report;
}

} // namespace kcsolve
