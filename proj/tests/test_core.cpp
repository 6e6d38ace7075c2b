#include <doctest.h>

#include <cmath>
#include <numbers>

#include <json.hpp>

#include "kcsolve/core.hpp"
#include "kcsolve/oracle.hpp"
#include "kcsolve/problems.hpp"
#include "kcsolve/random.hpp"

using namespace kcsolve;
using std::numbers::pi;

namespace {

CoefficientA constant_A(double value = 1.0) {
    return CoefficientA([value](double, double) { return value; }, value);
}

NonlinearityG constant_g(double value) {
    return NonlinearityG([value](const Point&, double) { return value; });
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::io_error;
}

double poly_f(const Point& x) { return 12.0 * x[0] - 12.0 * x[0] * x[0] - 2.0; }

} // namespace

TEST_CASE("coefficient lower bound and normalization") {
    const CoefficientA A([](double s, double t) { return 2.0 + s + t; }, 2.0);
    CHECK(A(1.0, 1.0) == 4.0);
    CHECK(A.normalized()(1.0, 1.0) == 2.0);
    CHECK(A.normalized().lower_bound() == 1.0);
    const CoefficientA bad([](double s, double) { return 1.0 - s; }, 0.5);
    CHECK(code_of([&] { bad(0.9, 0.0); }) == ErrorCode::coefficient_below_bound);
    CHECK(code_of([] { CoefficientA([](double, double) { return 1.0; }, 0.0); }) == ErrorCode::coefficient_below_bound);

    const ProblemSpec spec{DomainSpec::interval(0.0, 1.0, 8), A, constant_g(3.0), 1.0};
    CHECK(code_of([&] { spec.validate(); }) == ErrorCode::invalid_p);
    const ProblemSpec scaled = ProblemSpec{spec.domain, A, constant_g(3.0), 2.0}.normalized();
    CHECK(scaled.g(Point{0.5, 0.0}, 0.0) == 1.5);
}

TEST_CASE("maximize_A") {
    CHECK(maximize_A(constant_A(), 3.0, 4.0) == 1.0);

    const CoefficientA quad([](double, double t) { return 1.0 + t * t; }, 1.0);
    CHECK(maximize_A(quad, 1.0, 3.0) == doctest::Approx(10.0).epsilon(1e-6));
    CHECK(maximize_A(quad, 1.0, 3.0) >= 10.0);

    const CoefficientA wave([](double, double t) { return 1.0 + std::sin(t) * std::sin(t); }, 1.0);
    double scan = 0.0;
    for (int i = 0; i <= 1000000; ++i) {
        const double t = 2.0 * i / 1000000.0;
        scan = std::max(scan, 1.0 + std::sin(t) * std::sin(t));
    }
    const double M = maximize_A(wave, 0.7, 2.0);
    CHECK(std::abs(M - scan) <= 1e-6);
    CHECK(std::abs(M - 2.0) <= 1e-6);
}

TEST_CASE("compute_r_M") {
    CHECK(compute_r_M(1.0, 0.7) == 1.0);
    CHECK(compute_r_M(2.0, 0.0) == 0.5);
    CHECK(compute_r_M(2.0, 0.5) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(compute_r_M(2.0, 1.0) == 0.0);
    CHECK(compute_r_M(2.0, 1.7) == 0.0);
    CHECK(code_of([] { compute_r_M(0.5, 0.0); }) == ErrorCode::invalid_m);
    CHECK(code_of([] { compute_r_M(2.0, -0.5); }) == ErrorCode::unsupported_alpha);

    UniformStream rng(42);
    for (int i = 0; i < 20000; ++i) {
        const double M = 1.0 + 999.0 * rng.next();
        const double alpha = 2.0 * rng.next();
        const double r = compute_r_M(M, alpha);
        const double lhs = std::pow(r, alpha) / M;
        CHECK(std::abs(lhs - r) <= 1e-12 * std::abs(r));
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
    }
}

TEST_CASE("g_max") {
    const Grid grid(DomainSpec::interval(0.0, 1.0, 256));
    const Field psi3(grid, 3.0);
    CHECK(g_max(constant_g(1.0), grid, psi3) == 1.0);
    CHECK(g_max(NonlinearityG([](const Point&, double s) { return s * s; }), grid, psi3) == doctest::Approx(9.0).epsilon(1e-6));
    const NonlinearityG g3([](const Point& x, double s) { return std::sin(s) * std::sin(s) + poly_f(x); });
    CHECK(std::abs(g_max(g3, grid, Field(grid, 2.0)) - 2.0) <= 1e-4);
}

TEST_CASE("apply_T") {
    const Grid grid(DomainSpec::interval(0.0, 1.0, 256));
    const GreenOperator green(grid);
    const Field& xi = green.torsion();
    UniformStream rng(9);
    Field v(grid);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = rng.next();

    const ProblemSpec flat{grid.spec(), constant_A(), constant_g(1.0), 2.0};
    CHECK(sup_distance(apply_T(flat, green, v), xi) == 0.0);

    const ProblemSpec kirchhoff{grid.spec(), CoefficientA([](double, double t) { return 1.0 + t * t; }, 1.0), constant_g(1.0), 2.0};
    CHECK(sup_distance(apply_T(kirchhoff, green, Field(grid)), xi) == 0.0);
    const Field t_xi = apply_T(kirchhoff, green, xi);
    for (std::size_t k = 0; k < grid.size(); ++k) CHECK(t_xi[k] == doctest::Approx(12.0 / 13.0 * xi[k]).epsilon(1e-3));

    CHECK(code_of([&] { apply_T(flat, green, Field(Grid(DomainSpec::interval(0.0, 1.0, 8)))); }) == ErrorCode::shape_mismatch);
}

TEST_CASE("apply_T sup bound and positivity on an example instance") {
    const GreenOperator green(Grid(DomainSpec::interval(0.0, 1.0, 128)));
    const BuiltProblem built = build_example1(green, poly_f);
    const ProblemSpec work = built.spec.normalized();
    const IntervalConstants c = interval_constants(built.spec, built.interval);
    const Field lower = c.r_M * built.interval.phi;
    const Field& upper = built.interval.psi;
    const double bound = g_max(work.g, green.grid(), upper) * green.torsion().max();
    UniformStream rng(17);
    Field w(green.grid());
    for (int trial = 0; trial < 200; ++trial) {
        for (std::size_t k = 0; k < w.size(); ++k) w[k] = lower[k] + rng.next() * (upper[k] - lower[k]);
        const Field tw = apply_T(work, green, w);
        CHECK(tw.max_abs() <= bound * (1.0 + 1e-12));
    }

    // g >= 0 pointwise gives T(v) >= 0.
    const ProblemSpec positive{green.grid().spec(), constant_A(),
                               NonlinearityG([](const Point& x, double s) { return s * s + x[0]; }), 2.0};
    for (int trial = 0; trial < 50; ++trial) {
        for (std::size_t k = 0; k < w.size(); ++k) w[k] = 4.0 * rng.next() - 2.0;
        CHECK(apply_T(positive, green, w).min() >= -1e-12);
    }
}

TEST_CASE("verify_invariance") {
    const GreenOperator green(Grid(DomainSpec::interval(0.0, 1.0, 128)));
    const Grid& grid = green.grid();
    {
        const ProblemSpec spec{grid.spec(), constant_A(), constant_g(1.0), 2.0};
        const OrderInterval interval{Field(grid), 2.0 * green.torsion(), 0.0};
        const InvarianceReport report = verify_invariance(spec, green, interval, 200, 1);
        CHECK(report.passed());
        CHECK(report.fields_checked == 202);
        CHECK(report.r_M == 1.0);
    }
    {
        Example1Params params;
        params.lambda_frac = 0.5;
        const BuiltProblem built = build_example1(green, poly_f, params);
        const InvarianceReport report = verify_invariance(built.spec, green, built.interval, 1000, 7);
        CHECK(report.violations == 0);
        CHECK(report.fields_checked == 1002);

        // Direct search: halve ψ until T leaves the interval; (G1) must fail there too.
        OrderInterval shrunk = built.interval;
        int halvings = 0;
        InvarianceReport broken;
        while (halvings < 12) {
            shrunk.psi *= 0.5;
            ++halvings;
            broken = verify_invariance(built.spec, green, shrunk, 200, 7);
            if (!broken.passed()) break;
        }
        CHECK_FALSE(broken.passed());
        CHECK(broken.worst_violation > 0.0);
        CHECK_FALSE(check_G1(grid, built.spec.g, shrunk).passed);
    }
}

TEST_CASE("fixed point: constant data") {
    const GreenOperator green(Grid(DomainSpec::interval(0.0, 1.0, 64)));
    const Grid& grid = green.grid();
    const ProblemSpec spec{grid.spec(), constant_A(), constant_g(1.0), 2.0};
    const OrderInterval interval{Field(grid), 2.0 * green.torsion(), 0.0};
    for (StartPoint start : {StartPoint::phi_end, StartPoint::psi_end, StartPoint::midpoint}) {
        SolveOptions options;
        options.start = start;
        const SolveReport report = fixed_point_solve(spec, green, interval, options);
        CHECK(report.status == SolveStatus::converged);
        CHECK(report.iterations <= 2);
        CHECK(report.residual < 1e-11);
        CHECK(sup_distance(report.u, green.torsion()) <= 1e-15);
    }
    CHECK(parse_start_point("midpoint") == StartPoint::midpoint);
    CHECK(code_of([] { parse_start_point("middle"); }) == ErrorCode::parse_error);
}

TEST_CASE("fixed point: linear contraction at half the principal eigenvalue") {
    const GreenOperator green(Grid(DomainSpec::interval(0.0, 1.0, 128)));
    const EigenPair eig = principal_eigenpair(green);
    const double lambda = eig.lambda1 / 2.0;
    const ProblemSpec spec{green.grid().spec(), constant_A(),
                           NonlinearityG([lambda](const Point&, double s) { return lambda * s; }), 2.0};
    const OrderInterval interval{Field(green.grid()), eig.phi1, 0.0};
    SolveOptions options;
    options.max_iter = 12;
    options.tol = 1e-300;
    const SolveReport report = fixed_point_solve(spec, green, interval, options);
    CHECK(report.status == SolveStatus::max_iter);
    REQUIRE(report.sup_diff_history.size() == 12);
    for (std::size_t k = 10; k < 12; ++k)
        CHECK(std::abs(report.sup_diff_history[k] / report.sup_diff_history[k - 1] - 0.5) <= 0.05);
    CHECK(std::abs(report.u.max() - std::ldexp(1.0, -12)) <= 1e-9);

    options = {};
    const SolveReport full = fixed_point_solve(spec, green, interval, options);
    CHECK(full.status == SolveStatus::converged);
    CHECK(full.u.max_abs() <= 1e-9);
}

TEST_CASE("fixed point: Mann iterates stay inside the interval") {
    const GreenOperator green(Grid(DomainSpec::interval(0.0, 1.0, 64)));
    const BuiltProblem built = build_example2(green);
    const IntervalConstants c = interval_constants(built.spec, built.interval);
    const Field lower = c.r_M * built.interval.phi;
    const double eps = 1e-10 * (1.0 + built.interval.psi.max_abs());
    for (double theta : {1.0, 0.5, 0.25}) {
        SolveOptions options;
        options.theta = theta;
        options.start = StartPoint::phi_end;
        const SolveReport full = fixed_point_solve(built.spec, green, built.interval, options);
        CHECK(full.status == SolveStatus::converged);
        for (int k = 1; k <= 15; ++k) {
            options.max_iter = k;
            const SolveReport partial = fixed_point_solve(built.spec, green, built.interval, options);
            CHECK(partial.status != SolveStatus::left_interval);
            for (std::size_t i = 0; i < partial.u.size(); ++i) {
                CHECK(partial.u[i] >= lower[i] - eps);
                CHECK(partial.u[i] <= built.interval.psi[i] + eps);
            }
        }
    }
}

TEST_CASE("fixed point: step consistency and Newton agreement on example 3") {
    const GreenOperator green(Grid(DomainSpec::interval(0.0, 1.0, 34)));
    REQUIRE(green.grid().size() == 33);
    const BuiltProblem built = build_example3(green, [](const Point&) { return 2.0; });
    const SolveReport report = fixed_point_solve(built.spec, green, built.interval);
    REQUIRE(report.status == SolveStatus::converged);
    CHECK(report.residual <= 1e-8);
    const ProblemSpec work = built.spec.normalized();
    CHECK(sup_distance(report.u, apply_T(work, green, report.u)) <= 2e-10 * (1.0 + built.interval.psi.max_abs()));

    const Field u0 = 0.5 * (report.r_M * built.interval.phi + built.interval.psi);
    const OracleResult oracle = newton_solve(built.spec, green, u0);
    REQUIRE(oracle.converged);
    CHECK(sup_distance(oracle.u, report.u) <= 1e-8);
}

TEST_CASE("fixed point rejects bad options and mismatched grids") {
    const GreenOperator green(Grid(DomainSpec::interval(0.0, 1.0, 16)));
    const ProblemSpec spec{green.grid().spec(), constant_A(), constant_g(1.0), 2.0};
    const OrderInterval interval{Field(green.grid()), green.torsion(), 0.0};
    SolveOptions options;
    options.theta = 0.0;
    CHECK(code_of([&] { fixed_point_solve(spec, green, interval, options); }) == ErrorCode::parameter_out_of_range);
    const ProblemSpec other{DomainSpec::interval(0.0, 1.0, 20), constant_A(), constant_g(1.0), 2.0};
    CHECK(code_of([&] { fixed_point_solve(other, green, interval); }) == ErrorCode::shape_mismatch);
}

TEST_CASE("report JSON key order") {
    const GreenOperator green(Grid(DomainSpec::interval(0.0, 1.0, 16)));
    const ProblemSpec spec{green.grid().spec(), constant_A(), constant_g(1.0), 2.0};
    const OrderInterval interval{Field(green.grid()), 2.0 * green.torsion(), 0.0};
    const SolveReport report = fixed_point_solve(spec, green, interval);
    const auto j = nlohmann::ordered_json::parse(report_to_json(report));
    std::vector<std::string> keys;
    for (const auto& [key, value] : j.items()) keys.push_back(key);
    CHECK(keys == std::vector<std::string>{"status", "iterations", "residual", "M", "r_M", "norms", "history"});
    CHECK(j["status"] == "converged");
    CHECK(j["norms"].begin().key() == "lp");
    CHECK(j["history"].size() == static_cast<std::size_t>(report.iterations));
    CHECK(j["residual"].get<double>() == report.residual);
}
