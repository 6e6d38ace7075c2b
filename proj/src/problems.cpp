#include "kcsolve/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "kcsolve/random.hpp"

namespace kcsolve {

SpatialFunction nodal_function(const Field& f) {
    auto shared = std::make_shared<const Field>(f);
    return [shared](const Point& x) {
        const Grid& grid = shared->grid();
        std::size_t index[2] = {0, 0};
        for (int k = 0; k < grid.dimension(); ++k) {
            const double pos = (x[k] - grid.spec().lower[k]) / grid.spacing(k) - 1.0;
            const double clamped = std::clamp(std::round(pos), 0.0, static_cast<double>(grid.interior(k) - 1));
            index[k] = static_cast<std::size_t>(clamped);
        }
        return (*shared)[grid.index(index[0], index[1])];
    };
}

double ConditionReport::worst_margin() const {
    double worst = std::min(sub_margin, super_margin);
    if (order_margin) worst = std::min(worst, *order_margin);
    return worst;
}

namespace {

double condition_slack(const NonlinearityG& g, const Grid& grid, const Field& psi) {
    return 1e-9 * (1.0 + std::abs(g_max(g, grid, psi)));
}

void require_interval_on(const Grid& grid, const OrderInterval& interval) {
    if (!(interval.phi.grid() == grid) || !(interval.psi.grid() == grid))
        throw Error(ErrorCode::shape_mismatch, "order interval is not on the grid");
}

} // namespace

ConditionReport check_G1(const Grid& grid, const NonlinearityG& g, const OrderInterval& interval) {
    require_interval_on(grid, interval);
    const Field& phi = interval.phi;
    const Field& psi = interval.psi;
    const Field lphi = apply_laplacian(grid, phi);
    const Field lpsi = apply_laplacian(grid, psi);

    ConditionReport r;
    r.slack = condition_slack(g, grid, psi);
    r.sub_margin = std::numeric_limits<double>::infinity();
    r.super_margin = std::numeric_limits<double>::infinity();
    double order = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Point x = grid.coordinate(k);
        r.sub_margin = std::min(r.sub_margin, g(x, phi[k]) - lphi[k]);
        r.super_margin = std::min(r.super_margin, lpsi[k] - g(x, psi[k]));
        order = std::min({order, phi[k], psi[k] - phi[k]});
    }
    r.order_margin = order;
    const double order_slack = 1e-12 * (1.0 + psi.max_abs());
    r.passed = r.sub_margin >= -r.slack && r.super_margin >= -r.slack && order >= -order_slack;
    return r;
}

std::vector<double> G2Options::default_beta_levels() {
    std::vector<double> levels;
    for (int k = 0; k <= 10; ++k) levels.push_back(std::ldexp(1.0, -k));
    return levels;
}

ConditionReport check_G2(const Grid& grid, const NonlinearityG& g, const OrderInterval& interval,
                         const G2Options& options) {
    require_interval_on(grid, interval);
    const Field& phi = interval.phi;
    const Field& psi = interval.psi;
    const Field lphi = apply_laplacian(grid, phi);
    const Field lpsi = apply_laplacian(grid, psi);

    ConditionReport r;
    r.slack = condition_slack(g, grid, psi);
    r.sub_margin = std::numeric_limits<double>::infinity();
    r.super_margin = std::numeric_limits<double>::infinity();

    UniformStream rng(options.seed);
    Field omega(grid);
    auto test = [&](double scale) {
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double gk = g(grid.coordinate(k), omega[k]);
            r.sub_margin = std::min(r.sub_margin, gk - scale * lphi[k]);
            r.super_margin = std::min(r.super_margin, lpsi[k] - gk);
        }
    };
    for (double beta : options.beta_levels) {
        const double scale = interval.alpha == 0.0 ? 1.0 : std::pow(beta, interval.alpha);
        for (std::size_t k = 0; k < grid.size(); ++k) omega[k] = beta * phi[k];
        test(scale);
        omega = psi;
        test(scale);
        for (int trial = 0; trial < options.omega_trials; ++trial) {
            for (std::size_t k = 0; k < grid.size(); ++k) {
                const double lo = beta * phi[k];
                omega[k] = lo + rng.next() * (psi[k] - lo);
            }
            test(scale);
        }
    }
    r.passed = r.sub_margin >= -r.slack && r.super_margin >= -r.slack;
    return r;
}

double BuiltProblem::constant(const std::string& key) const {
    for (const auto& [k, v] : constants)
        if (k == key) return v;
    throw Error(ErrorCode::parameter_out_of_range, "problem '" + name + "' has no constant '" + key + "'");
}

Example1Constants example1_constants(double max_xi, double max_abs_f, double p, double sigma) {
    const double M0 = sigma * std::pow(std::pow(max_xi, p) + max_abs_f, -1.0 / (p - 1.0));
    return {M0, std::pow(M0, p)};
}

ThresholdConstants example2_constants(double max_xi, double p, double q, double sigma) {
    const double xi_p = std::pow(max_xi, p);
    const double M1 = sigma * std::pow(xi_p, -1.0 / (p - 1.0));
    const double mu0 = (M1 - std::pow(M1, p) * xi_p) / (std::pow(M1, q) * std::pow(max_xi, q));
    return {M1, mu0};
}

ThresholdConstants example4_constants(double max_xi, double q, double sigma) {
    constexpr double pi = std::numbers::pi;
    const double xi_3 = max_xi * max_xi * max_xi;
    const double M1 = sigma * std::min(1.0 / std::sqrt(pi * xi_3), (pi / 2.0) / max_xi);
    const double mu0 = (M1 - pi * M1 * M1 * M1 * xi_3) / (std::pow(M1, q) * std::pow(max_xi, q));
    return {M1, mu0};
}

namespace {

double positive_part_pow(double s, double e) { return s > 0.0 ? std::pow(s, e) : 0.0; }

void require_positive(double value, const char* name) {
    if (!(value > 0.0) || !std::isfinite(value))
        throw Error(ErrorCode::parameter_out_of_range, std::string(name) + " must be positive");
}

void require_safety(double sigma) {
    if (!(sigma > 0.0 && sigma < 1.0)) throw Error(ErrorCode::parameter_out_of_range, "safety factor must lie in (0, 1)");
}

/// Samples f, requires f != 0 and a nonnegative discrete solution of −Δφ_0 = f.
struct Forcing {
    Field values;
    Field solution;
    double max_abs;
};

Forcing check_forcing(const GreenOperator& green, const SpatialFunction& f) {
    Field values = Field::sample(green.grid(), f);
    if (!values.all_finite()) throw Error(ErrorCode::infeasible_f, "f is not finite on the grid");
    const double max_abs = values.max_abs();
    if (max_abs == 0.0) throw Error(ErrorCode::infeasible_f, "f vanishes identically on the grid");
    Field solution = green.solve(values);
    if (solution.min() < -1e-12 * (1.0 + solution.max_abs()))
        throw Error(ErrorCode::infeasible_f, "-Δφ = f has a negative discrete solution (min " +
                                                 std::to_string(solution.min()) + ")");
    return {std::move(values), std::move(solution), max_abs};
}

double resolve_parameter(const std::optional<double>& absolute, double fraction, double threshold,
                         const BuildChecks& checks, const char* name) {
    const double value = absolute ? *absolute : fraction * threshold;
    if (checks.enforce && !(value > 0.0 && value < threshold))
        throw Error(ErrorCode::parameter_out_of_range, std::string(name) + " = " + std::to_string(value) +
                                                           " is outside (0, " + std::to_string(threshold) + ")");
    return value;
}

/// Largest c with c φ_1 <= ψ at every node.
double ratio_cap(const Field& psi, const Field& phi1) {
    double cap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < psi.size(); ++k) cap = std::min(cap, psi[k] / phi1[k]);
    return cap;
}

void finish(BuiltProblem& built, const GreenOperator& green, const BuildChecks& checks) {
    if (!checks.enforce) return;
    const ConditionReport g1 = check_G1(green.grid(), built.spec.g, built.interval);
    if (!g1.passed)
        throw Error(ErrorCode::condition_failed,
                    built.name + " fails the sub/supersolution check, worst margin " + std::to_string(g1.worst_margin()));
    G2Options opts;
    opts.seed = checks.seed;
    const ConditionReport g2 = check_G2(green.grid(), built.spec.g, built.interval, opts);
    if (!g2.passed)
        throw Error(ErrorCode::condition_failed,
                    built.name + " fails the beta-scaling check, worst margin " + std::to_string(g2.worst_margin()));
}

} // namespace

BuiltProblem build_example1(const GreenOperator& green, const SpatialFunction& f, const Example1Params& params) {
    if (!(params.p > 1.0)) throw Error(ErrorCode::invalid_p, "example1 needs p > 1");
    require_positive(params.d, "d");
    require_safety(params.sigma);

    const Forcing forcing = check_forcing(green, f);
    const Field& xi = green.torsion();
    const double max_xi = xi.max();
    const Example1Constants k = example1_constants(max_xi, forcing.max_abs, params.p, params.sigma);
    const double lambda = resolve_parameter(params.lambda, params.lambda_frac, k.lambda_f, params.checks, "lambda");

    const double d = params.d;
    const double p = params.p;
    BuiltProblem built{
        .name = "example1",
        .spec = ProblemSpec{green.grid().spec(), CoefficientA([d](double s, double) { return 1.0 + d * s * s; }, 1.0),
                            NonlinearityG([f, p, lambda](const Point& x, double s) {
                                return positive_part_pow(s, p) + lambda * f(x);
                            }),
                            2.0},
        .interval = OrderInterval{lambda * forcing.solution, k.M0 * xi, 0.0},
        .threshold = k.lambda_f,
        .parameter = lambda,
        .constants = {{"M0", k.M0}, {"lambda_f", k.lambda_f}, {"lambda", lambda}, {"max_xi", max_xi},
                      {"max_abs_f", forcing.max_abs}, {"sigma", params.sigma}, {"p", p}, {"d", d}},
    };
    finish(built, green, params.checks);
    return built;
}

BuiltProblem build_example1(const GreenOperator& green, const Field& f, const Example1Params& params) {
    f.require_same_grid(Field(green.grid()));
    return build_example1(green, nodal_function(f), params);
}

BuiltProblem build_example2(const GreenOperator& green, const Example2Params& params) {
    if (!(params.q > 0.0 && params.q < 1.0) || !(params.p > 1.0))
        throw Error(ErrorCode::invalid_exponents, "example2 needs 0 < q < 1 < p");
    require_positive(params.c, "c");
    require_positive(params.d, "d");
    require_safety(params.sigma);

    const Field& xi = green.torsion();
    const double max_xi = xi.max();
    const ThresholdConstants k = example2_constants(max_xi, params.p, params.q, params.sigma);
    const double mu = resolve_parameter(params.mu, params.mu_frac, k.mu0, params.checks, "mu");

    const EigenPair eig = principal_eigenpair(green);
    const Field psi = k.M1 * xi;
    const double growth_cap = std::pow(mu / eig.lambda1, 1.0 / (1.0 - params.q));
    const double M0 = params.sigma * std::min(growth_cap, ratio_cap(psi, eig.phi1));

    const double c = params.c, d = params.d, q = params.q, p = params.p;
    BuiltProblem built{
        .name = "example2",
        .spec = ProblemSpec{green.grid().spec(),
                            CoefficientA([c, d](double s, double t) { return 1.0 + c * s * s + d * t * t; }, 1.0),
                            NonlinearityG([mu, q, p](const Point&, double s) {
                                return mu * positive_part_pow(s, q) + positive_part_pow(s, p);
                            }),
                            2.0},
        .interval = OrderInterval{M0 * eig.phi1, psi, q},
        .threshold = k.mu0,
        .parameter = mu,
        .constants = {{"M0", M0}, {"M1", k.M1}, {"mu0", k.mu0}, {"mu", mu}, {"lambda1", eig.lambda1},
                      {"max_xi", max_xi}, {"sigma", params.sigma}, {"c", c}, {"d", d}, {"q", q}, {"p", p}},
    };
    finish(built, green, params.checks);
    return built;
}

BuiltProblem build_example3(const GreenOperator& green, const SpatialFunction& f, const Example3Params& params) {
    require_positive(params.d, "d");
    const Forcing forcing = check_forcing(green, f);
    const Field& xi = green.torsion();
    const double M0 = 1.0 + forcing.max_abs + 0.1;

    const double d = params.d;
    BuiltProblem built{
        .name = "example3",
        .spec = ProblemSpec{green.grid().spec(), CoefficientA([d](double, double t) {
                                const double st = std::sin(t);
                                return 1.0 + d * st * st;
                            }, 1.0),
                            NonlinearityG([f](const Point& x, double s) {
                                const double ss = std::sin(s);
                                return ss * ss + f(x);
                            }),
                            2.0},
        .interval = OrderInterval{forcing.solution, M0 * xi, 0.0},
        .threshold = std::nullopt,
        .parameter = std::nullopt,
        .constants = {{"M0", M0}, {"max_xi", xi.max()}, {"max_abs_f", forcing.max_abs}, {"d", d}},
    };
    finish(built, green, params.checks);
    return built;
}

BuiltProblem build_example3(const GreenOperator& green, const Field& f, const Example3Params& params) {
    f.require_same_grid(Field(green.grid()));
    return build_example3(green, nodal_function(f), params);
}

BuiltProblem build_example4(const GreenOperator& green, const Example4Params& params) {
    if (!(params.q > 0.0 && params.q < 1.0)) throw Error(ErrorCode::invalid_exponents, "example4 needs 0 < q < 1");
    require_positive(params.d, "d");
    require_safety(params.sigma);

    constexpr double pi = std::numbers::pi;
    const Field& xi = green.torsion();
    const double max_xi = xi.max();
    const ThresholdConstants k = example4_constants(max_xi, params.q, params.sigma);
    const double mu = resolve_parameter(params.mu, params.mu_frac, k.mu0, params.checks, "mu");

    const EigenPair eig = principal_eigenpair(green);
    const Field psi = k.M1 * xi;
    const double growth_cap = std::pow(mu / eig.lambda1, 1.0 / (1.0 - params.q));
    // M0 φ_1 <= ψ <= π/2 keeps sin(M0 φ_1) >= 0.
    const double M0 = params.sigma * std::min({growth_cap, ratio_cap(psi, eig.phi1), pi / 2.0});

    const double d = params.d, q = params.q;
    BuiltProblem built{
        .name = "example4",
        .spec = ProblemSpec{green.grid().spec(), CoefficientA([d](double, double t) { return 1.0 + d * t * t; }, 1.0),
                            NonlinearityG([mu, q](const Point&, double s) {
                                const double ss = std::sin(s);
                                return mu * positive_part_pow(s, q) + pi * ss * ss * ss;
                            }),
                            2.0},
        .interval = OrderInterval{M0 * eig.phi1, psi, q},
        .threshold = k.mu0,
        .parameter = mu,
        .constants = {{"M0", M0}, {"M1", k.M1}, {"mu0", k.mu0}, {"mu", mu}, {"lambda1", eig.lambda1},
                      {"max_xi", max_xi}, {"sigma", params.sigma}, {"d", d}, {"q", q}},
    };
    finish(built, green, params.checks);
    return built;
}

} // namespace kcsolve
