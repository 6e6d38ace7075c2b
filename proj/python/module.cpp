#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "commands.hpp"
#include "kcsolve/oracle.hpp"
#include "kcsolve/problems.hpp"

namespace py = pybind11;
using namespace kcsolve;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Field& f) {
    Array out(static_cast<py::ssize_t>(f.size()));
    std::copy(f.values().begin(), f.values().end(), out.mutable_data());
    return out;
}

Field to_field(const Grid& grid, const Array& a) {
    if (a.ndim() != 1 || static_cast<std::size_t>(a.shape(0)) != grid.size())
        throw Error(ErrorCode::shape_mismatch, "expected a flat array of " + std::to_string(grid.size()) + " values");
    return Field(grid, std::vector<double>(a.data(), a.data() + a.size()));
}

/// Forcing given as an array of nodal values or a callable f(x, y).
Field forcing_field(const GreenOperator& green, const py::object& f) {
    const Grid& grid = green.grid();
    if (py::isinstance<py::function>(f)) {
        Field out(grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const Point x = grid.coordinate(k);
            out[k] = f(x[0], x[1]).cast<double>();
        }
        return out;
    }
    return to_field(grid, f.cast<Array>());
}

py::dict condition_dict(const ConditionReport& r) {
    py::dict d;
    d["passed"] = r.passed;
    d["sub_margin"] = r.sub_margin;
    d["super_margin"] = r.super_margin;
    d["order_margin"] = r.order_margin ? py::object(py::float_(*r.order_margin)) : py::object(py::none());
    d["slack"] = r.slack;
    return d;
}

BuildChecks checks_of(bool enforce, std::uint64_t seed) { return BuildChecks{enforce, seed}; }

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Finite-difference solver for nonlocal Kirchhoff-type Dirichlet problems.";

    static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, e.what());
        }
    });

    py::class_<DomainSpec>(m, "DomainSpec")
        .def_static("interval", &DomainSpec::interval, py::arg("a"), py::arg("b"), py::arg("n"))
        .def_static("rectangle", &DomainSpec::rectangle, py::arg("ax"), py::arg("bx"), py::arg("ay"), py::arg("by"),
                    py::arg("nx"), py::arg("ny"))
        .def_readonly("dimension", &DomainSpec::dimension)
        .def_readonly("lower", &DomainSpec::lower)
        .def_readonly("upper", &DomainSpec::upper)
        .def_readonly("cells", &DomainSpec::cells);

    py::class_<Grid>(m, "Grid")
        .def(py::init<const DomainSpec&>())
        .def_property_readonly("dimension", &Grid::dimension)
        .def_property_readonly("size", &Grid::size)
        .def("interior", &Grid::interior)
        .def("spacing", &Grid::spacing)
        .def_property_readonly("cell_volume", &Grid::cell_volume)
        .def("coordinates", [](const Grid& g) {
            py::array_t<double> out({static_cast<py::ssize_t>(g.size()), static_cast<py::ssize_t>(g.dimension())});
            auto view = out.mutable_unchecked<2>();
            for (std::size_t k = 0; k < g.size(); ++k) {
                const Point x = g.coordinate(k);
                for (int a = 0; a < g.dimension(); ++a) view(static_cast<py::ssize_t>(k), a) = x[static_cast<std::size_t>(a)];
            }
            return out;
        });

    py::class_<GreenOperator>(m, "GreenOperator")
        .def(py::init([](const DomainSpec& domain, const std::string& solver) {
                 SolverKind kind = SolverKind::automatic;
                 if (solver == "banded") kind = SolverKind::banded;
                 else if (solver == "cg") kind = SolverKind::conjugate_gradient;
                 else if (solver != "auto") throw Error(ErrorCode::parse_error, "solver must be auto, banded or cg");
                 return GreenOperator(Grid(domain), kind);
             }),
             py::arg("domain"), py::arg("solver") = "auto")
        .def_property_readonly("grid", &GreenOperator::grid)
        .def_property_readonly("torsion", [](const GreenOperator& g) { return to_numpy(g.torsion()); })
        .def("solve", [](const GreenOperator& g, const Array& f) {
            const Field rhs = to_field(g.grid(), f);
            Field u(g.grid());
            {
                py::gil_scoped_release release;
                u = g.solve(rhs);
            }
            return to_numpy(u);
        });

    m.def("apply_laplacian", [](const Grid& g, const Array& u) { return to_numpy(apply_laplacian(g, to_field(g, u))); });
    m.def("lp_norm", [](const Grid& g, const Array& u, double p) { return lp_norm(to_field(g, u), p); },
          py::arg("grid"), py::arg("u"), py::arg("p"));
    m.def("h1_seminorm", [](const Grid& g, const Array& u) { return h1_seminorm(to_field(g, u)); });
    m.def("principal_eigenpair", [](const GreenOperator& g, double tol) {
        const EigenPair e = principal_eigenpair(g, tol);
        return py::make_tuple(e.lambda1, to_numpy(e.phi1));
    }, py::arg("green"), py::arg("tol") = 1e-12);

    m.def("compute_r_M", &compute_r_M, py::arg("M"), py::arg("alpha"));
    m.def("maximize_A", [](const std::function<double(double, double)>& fn, double s_max, double t_max, double m) {
        return maximize_A(CoefficientA(fn, m), s_max, t_max);
    }, py::arg("A"), py::arg("s_max"), py::arg("t_max"), py::arg("lower_bound") = 1.0);

    py::class_<BuiltProblem>(m, "BuiltProblem")
        .def_readonly("name", &BuiltProblem::name)
        .def_readonly("threshold", &BuiltProblem::threshold)
        .def_readonly("parameter", &BuiltProblem::parameter)
        .def_property_readonly("alpha", [](const BuiltProblem& b) { return b.interval.alpha; })
        .def_property_readonly("p", [](const BuiltProblem& b) { return b.spec.p; })
        .def_property_readonly("phi", [](const BuiltProblem& b) { return to_numpy(b.interval.phi); })
        .def_property_readonly("psi", [](const BuiltProblem& b) { return to_numpy(b.interval.psi); })
        .def_property_readonly("constants", [](const BuiltProblem& b) {
            py::dict d;
            for (const auto& [k, v] : b.constants) d[py::str(k)] = v;
            return d;
        })
        .def("A", [](const BuiltProblem& b, double s, double t) { return b.spec.A(s, t); })
        .def("g", [](const BuiltProblem& b, double x, double y, double u) { return b.spec.g(Point{x, y}, u); })
        .def("__repr__", [](const BuiltProblem& b) { return "<BuiltProblem " + b.name + ">"; });

    m.def("build_example1",
          [](const GreenOperator& green, const py::object& f, double p, double d, double sigma,
             std::optional<double> lambda, double lambda_frac, bool enforce, std::uint64_t seed) {
              Example1Params params{p, d, sigma, lambda, lambda_frac, checks_of(enforce, seed)};
              return build_example1(green, forcing_field(green, f), params);
          },
          py::arg("green"), py::arg("f"), py::arg("p") = 2.0, py::arg("d") = 1.0, py::arg("sigma") = 0.5,
          py::arg("lam") = py::none(), py::arg("lambda_frac") = 0.5, py::arg("enforce") = true, py::arg("seed") = 0);
    m.def("build_example2",
          [](const GreenOperator& green, double c, double d, double q, double p, double sigma, std::optional<double> mu,
             double mu_frac, bool enforce, std::uint64_t seed) {
              return build_example2(green, Example2Params{c, d, q, p, sigma, mu, mu_frac, checks_of(enforce, seed)});
          },
          py::arg("green"), py::arg("c") = 1.0, py::arg("d") = 1.0, py::arg("q") = 0.5, py::arg("p") = 2.0,
          py::arg("sigma") = 0.5, py::arg("mu") = py::none(), py::arg("mu_frac") = 0.5, py::arg("enforce") = true,
          py::arg("seed") = 0);
    m.def("build_example3",
          [](const GreenOperator& green, const py::object& f, double d, bool enforce, std::uint64_t seed) {
              return build_example3(green, forcing_field(green, f), Example3Params{d, checks_of(enforce, seed)});
          },
          py::arg("green"), py::arg("f"), py::arg("d") = 1.0, py::arg("enforce") = true, py::arg("seed") = 0);
    m.def("build_example4",
          [](const GreenOperator& green, double d, double q, double sigma, std::optional<double> mu, double mu_frac,
             bool enforce, std::uint64_t seed) {
              return build_example4(green, Example4Params{d, q, sigma, mu, mu_frac, checks_of(enforce, seed)});
          },
          py::arg("green"), py::arg("d") = 1.0, py::arg("q") = 0.5, py::arg("sigma") = 0.9, py::arg("mu") = py::none(),
          py::arg("mu_frac") = 0.5, py::arg("enforce") = true, py::arg("seed") = 0);

    py::class_<SolveReport>(m, "SolveReport")
        .def_property_readonly("u", [](const SolveReport& r) { return to_numpy(r.u); })
        .def_readonly("iterations", &SolveReport::iterations)
        .def_readonly("history", &SolveReport::sup_diff_history)
        .def_readonly("residual", &SolveReport::residual)
        .def_readonly("M", &SolveReport::M)
        .def_readonly("r_M", &SolveReport::r_M)
        .def_readonly("lp", &SolveReport::lp)
        .def_readonly("h1", &SolveReport::h1)
        .def_readonly("theta_final", &SolveReport::theta_final)
        .def_property_readonly("status", [](const SolveReport& r) { return std::string(to_string(r.status)); })
        .def("to_json", &report_to_json);

    m.def("fixed_point_solve",
          [](const BuiltProblem& b, const GreenOperator& green, double theta, double tol, int max_iter,
             const std::string& start) {
              SolveOptions options;
              options.theta = theta;
              options.tol = tol;
              options.max_iter = max_iter;
              options.start = parse_start_point(start);
              py::gil_scoped_release release;
              return fixed_point_solve(b.spec, green, b.interval, options);
          },
          py::arg("problem"), py::arg("green"), py::arg("theta") = 1.0, py::arg("tol") = 1e-10,
          py::arg("max_iter") = 10000, py::arg("start") = "psi-end");

    m.def("check_G1", [](const BuiltProblem& b, const GreenOperator& green) {
        return condition_dict(check_G1(green.grid(), b.spec.normalized().g, b.interval));
    });
    m.def("check_G2", [](const BuiltProblem& b, const GreenOperator& green, std::uint64_t seed) {
        G2Options options;
        options.seed = seed;
        return condition_dict(check_G2(green.grid(), b.spec.normalized().g, b.interval, options));
    }, py::arg("problem"), py::arg("green"), py::arg("seed") = 0);
    m.def("verify_invariance", [](const BuiltProblem& b, const GreenOperator& green, int trials, std::uint64_t seed) {
        const InvarianceReport r = verify_invariance(b.spec, green, b.interval, trials, seed);
        py::dict d;
        d["passed"] = r.passed();
        d["fields_checked"] = r.fields_checked;
        d["violations"] = r.violations;
        d["worst_violation"] = r.worst_violation;
        d["outside_rectangle"] = r.outside_rectangle;
        d["violations_inside_rectangle"] = r.violations_inside_rectangle;
        d["M"] = r.M;
        d["r_M"] = r.r_M;
        return d;
    }, py::arg("problem"), py::arg("green"), py::arg("trials") = 1000, py::arg("seed") = 0);
    m.def("newton_solve", [](const BuiltProblem& b, const GreenOperator& green, const Array& u0) {
        const OracleResult r = newton_solve(b.spec, green, to_field(green.grid(), u0));
        py::dict d;
        d["u"] = to_numpy(r.u);
        d["converged"] = r.converged;
        d["iterations"] = r.newton_iterations;
        d["residual"] = r.final_residual;
        return d;
    });

    py::class_<cli::RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_readwrite("problem", &cli::RunConfig::problem)
        .def_readwrite("f", &cli::RunConfig::f)
        .def_readwrite("definition", &cli::RunConfig::definition)
        .def_readwrite("domain", &cli::RunConfig::domain)
        .def_readwrite("n", &cli::RunConfig::n)
        .def_readwrite("p", &cli::RunConfig::p)
        .def_readwrite("c", &cli::RunConfig::c)
        .def_readwrite("d", &cli::RunConfig::d)
        .def_readwrite("q", &cli::RunConfig::q)
        .def_readwrite("lam", &cli::RunConfig::lambda)
        .def_readwrite("lambda_frac", &cli::RunConfig::lambda_frac)
        .def_readwrite("mu", &cli::RunConfig::mu)
        .def_readwrite("mu_frac", &cli::RunConfig::mu_frac)
        .def_readwrite("sigma", &cli::RunConfig::sigma)
        .def_readwrite("theta", &cli::RunConfig::theta)
        .def_readwrite("tol", &cli::RunConfig::tol)
        .def_readwrite("max_iter", &cli::RunConfig::max_iter)
        .def_readwrite("start", &cli::RunConfig::start)
        .def_readwrite("seed", &cli::RunConfig::seed)
        .def_readwrite("trials", &cli::RunConfig::trials)
        .def_readwrite("points", &cli::RunConfig::points)
        .def_readwrite("jobs", &cli::RunConfig::jobs)
        .def_readwrite("out_dir", &cli::RunConfig::out_dir);

    auto command = [&m](const char* name, int (*fn)(const cli::RunConfig&)) {
        m.def(name, [fn](const cli::RunConfig& c) {
            py::gil_scoped_release release;
            return fn(c);
        });
    };
    command("cmd_solve", &cli::cmd_solve);
    command("cmd_verify", &cli::cmd_verify);
    command("cmd_sweep", &cli::cmd_sweep);
    command("cmd_oracle_compare", &cli::cmd_oracle_compare);
}
