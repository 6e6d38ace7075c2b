#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "kcsolve/expression.hpp"
#include "kcsolve/oracle.hpp"

namespace kcsolve::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr double kOracleTolerance = 1e-8;

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

/// Error text without the leading "code: ".
std::string detail(const Error& e) {
    const std::string what = e.what();
    const auto colon = what.find(": ");
    return colon == std::string::npos ? what : what.substr(colon + 2);
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot open " + path.string() + " for writing");
    return out;
}

void close_output(std::ofstream& out, const fs::path& path) {
    out.close();
    if (!out) throw Error(ErrorCode::io_error, "failed writing " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out = open_output(path);
    out << text << '\n';
    close_output(out, path);
}

void make_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::io_error, "cannot create directory " + dir.string());
}

int exit_for_status(SolveStatus status) {
    switch (status) {
    case SolveStatus::converged: return exit_ok;
    case SolveStatus::max_iter: return exit_max_iter;
    case SolveStatus::left_interval: return exit_left_interval;
    }
    return exit_config;
}

template <typename Body>
int guarded(Body&& body) {
    try {
        return body();
    } catch (const Error& e) {
        std::cerr << "kcsolve: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const fs::filesystem_error& e) {
        std::cerr << "kcsolve: " << e.what() << '\n';
        return exit_io;
    }
}

json condition_json(const ConditionReport& r) {
    json j;
    j["passed"] = r.passed;
    j["sub_margin"] = r.sub_margin;
    j["super_margin"] = r.super_margin;
    j["order_margin"] = r.order_margin ? json(*r.order_margin) : json(nullptr);
    j["slack"] = r.slack;
    j["worst_margin"] = r.worst_margin();
    return j;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

SolveOptions solve_options(const RunConfig& config) {
    SolveOptions options;
    options.theta = config.theta;
    options.tol = config.tol;
    options.max_iter = config.max_iter;
    options.start = parse_start_point(config.start);
    return options;
}

struct PointResult {
    std::optional<double> parameter;
    std::string status = "error";
    int iterations = 0;
    double residual = std::nan("");
    double min_ratio = std::nan("");
    int exit_code = exit_config;
};

/// The solve pipeline behind both `solve` and every sweep point.
PointResult solve_into(const RunConfig& config, const GreenOperator& green, const BuiltProblem& built,
                       const fs::path& dir) {
    const SolveReport report = fixed_point_solve(built.spec, green, built.interval, solve_options(config));

    make_directory(dir);
    const Field lower = report.r_M * built.interval.phi;
    {
        const fs::path path = dir / "solution.csv";
        std::ofstream out = open_output(path);
        write_csv(out, {{"u", &report.u}, {"phi", &built.interval.phi}, {"psi", &built.interval.psi}, {"rM_phi", &lower}});
        close_output(out, path);
    }
    write_text(dir / "report.json", report_to_json(report));

    PointResult row;
    row.parameter = built.parameter;
    row.status = std::string(to_string(report.status));
    row.iterations = report.iterations;
    row.residual = report.residual;
    double ratio = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < report.u.size(); ++k)
        if (built.interval.phi[k] > 0.0) ratio = std::min(ratio, report.u[k] / built.interval.phi[k]);
    row.min_ratio = ratio;
    row.exit_code = exit_for_status(report.status);
    return row;
}

std::string csv_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int default_jobs() {
    if (const char* env = std::getenv("KCSOLVE_JOBS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

} // namespace

int exit_code_for(const Error& error) {
    switch (error.code()) {
    case ErrorCode::io_error: return exit_io;
    case ErrorCode::condition_failed: return exit_condition;
    default: return exit_config;
    }
}

DomainSpec domain_of(const RunConfig& config) {
    const auto& d = config.domain;
    if (d.size() == 2) return DomainSpec::interval(d[0], d[1], config.n);
    if (d.size() == 4) return DomainSpec::rectangle(d[0], d[1], d[2], d[3], config.n, config.n);
    throw Error(ErrorCode::invalid_domain, "--domain takes a,b (interval) or ax,bx,ay,by (rectangle)");
}

SpatialFunction parse_forcing(const std::string& text, int dimension) {
    if (text == "poly-signchanging") return [](const Point& x) { return 12.0 * x[0] - 12.0 * x[0] * x[0] - 2.0; };
    if (text.starts_with("constant:")) {
        const std::string value = text.substr(9);
        char* end = nullptr;
        const double v = std::strtod(value.c_str(), &end);
        if (value.empty() || *end != '\0' || !std::isfinite(v))
            throw Error(ErrorCode::parse_error, "bad constant forcing '" + text + "'");
        return [v](const Point&) { return v; };
    }

    std::ifstream in(text);
    if (!in) throw Error(ErrorCode::io_error, "cannot read forcing table " + text);
    if (dimension != 1) throw Error(ErrorCode::parse_error, "tabulated forcing is supported on intervals only");
    std::vector<std::pair<double, double>> table;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        double x = 0.0, v = 0.0;
        std::string rest;
        if (!(fields >> x >> v) || (fields >> rest))
            throw Error(ErrorCode::parse_error, text + ":" + std::to_string(lineno) + ": expected 'x value'");
        table.emplace_back(x, v);
    }
    if (table.size() < 2) throw Error(ErrorCode::parse_error, text + ": need at least two rows");
    std::sort(table.begin(), table.end());
    return [table = std::move(table)](const Point& p) {
        const double x = p[0];
        if (x <= table.front().first) return table.front().second;
        if (x >= table.back().first) return table.back().second;
        const auto hi = std::upper_bound(table.begin(), table.end(), std::make_pair(x, -HUGE_VAL));
        const auto lo = hi - 1;
        const double w = (x - lo->first) / (hi->first - lo->first);
        return (1.0 - w) * lo->second + w * hi->second;
    };
}

BuiltProblem load_definition(const fs::path& path, const GreenOperator& green) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot read problem definition " + path.string());

    static const std::map<std::string, std::vector<std::string>> variables = {
        {"A", {"s", "t"}},  {"m", {}},     {"g", {"x", "y", "u"}},           {"p", {}},
        {"alpha", {}},      {"phi", {"x", "y", "xi", "phi1"}}, {"psi", {"x", "y", "xi", "phi1"}},
    };
    std::map<std::string, Expression> exprs;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
        line = line.substr(0, line.find('#'));
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::parse_error, where + "expected 'key = expression'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const auto vars = variables.find(key);
        if (vars == variables.end()) throw Error(ErrorCode::parse_error, where + "unknown key '" + key + "'");
        if (exprs.contains(key)) throw Error(ErrorCode::parse_error, where + "duplicate key '" + key + "'");
        try {
            // Blank out the key so parse columns count from the start of the line.
            exprs.emplace(key, Expression::parse(std::string(eq + 1, ' ') + line.substr(eq + 1), vars->second));
        } catch (const Error& e) {
            throw Error(ErrorCode::parse_error, where + detail(e));
        }
    }
    for (const char* key : {"A", "g", "phi", "psi"})
        if (!exprs.contains(key)) throw Error(ErrorCode::parse_error, path.string() + ": missing key '" + key + "'");

    auto scalar = [&](const char* key, double fallback) {
        const auto it = exprs.find(key);
        return it == exprs.end() ? fallback : it->second.evaluate({});
    };
    const double m = scalar("m", 1.0);
    const double p = scalar("p", 2.0);
    const double alpha = scalar("alpha", 0.0);

    const Grid& grid = green.grid();
    CoefficientA A(
        [e = exprs.at("A")](double s, double t) {
            const double v[] = {s, t};
            return e.evaluate(v);
        },
        m);
    NonlinearityG g([e = exprs.at("g")](const Point& x, double u) {
        const double v[] = {x[0], x[1], u};
        return e.evaluate(v);
    });

    std::optional<Field> phi1;
    if (exprs.at("phi").uses("phi1") || exprs.at("psi").uses("phi1")) phi1 = principal_eigenpair(green).phi1;
    auto sample = [&](const Expression& e) {
        Field out(grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const Point x = grid.coordinate(k);
            const double v[] = {x[0], x[1], green.torsion()[k], phi1 ? (*phi1)[k] : 0.0};
            out[k] = e.evaluate(v);
        }
        if (!out.all_finite()) throw Error(ErrorCode::parse_error, path.string() + ": phi/psi not finite on the grid");
        return out;
    };

    BuiltProblem built{.name = "custom",
                       .spec = ProblemSpec{grid.spec(), std::move(A), std::move(g), p},
                       .interval = OrderInterval{sample(exprs.at("phi")), sample(exprs.at("psi")), alpha},
                       .threshold = std::nullopt,
                       .parameter = std::nullopt,
                       .constants = {{"m", m}, {"p", p}, {"alpha", alpha}}};
    built.spec.validate();
    return built;
}

BuiltProblem build_problem(const RunConfig& config, const GreenOperator& green, bool enforce) {
    const BuildChecks checks{enforce, config.seed};
    const int dim = green.grid().dimension();
    if (config.problem == "example1") {
        Example1Params params;
        params.p = config.p;
        params.d = config.d;
        if (config.sigma) params.sigma = *config.sigma;
        params.lambda = config.lambda;
        params.lambda_frac = config.lambda_frac;
        params.checks = checks;
        return build_example1(green, parse_forcing(config.f, dim), params);
    }
    if (config.problem == "example2") {
        Example2Params params;
        params.c = config.c;
        params.d = config.d;
        params.q = config.q;
        params.p = config.p;
        if (config.sigma) params.sigma = *config.sigma;
        params.mu = config.mu;
        params.mu_frac = config.mu_frac;
        params.checks = checks;
        return build_example2(green, params);
    }
    if (config.problem == "example3") {
        Example3Params params;
        params.d = config.d;
        params.checks = checks;
        return build_example3(green, parse_forcing(config.f, dim), params);
    }
    if (config.problem == "example4") {
        Example4Params params;
        params.d = config.d;
        params.q = config.q;
        if (config.sigma) params.sigma = *config.sigma;
        params.mu = config.mu;
        params.mu_frac = config.mu_frac;
        params.checks = checks;
        return build_example4(green, params);
    }
    if (config.problem == "custom") {
        if (!config.definition) throw Error(ErrorCode::parse_error, "--problem custom needs --def <file>");
        BuiltProblem built = load_definition(*config.definition, green);
        if (enforce) {
            const NonlinearityG g = built.spec.normalized().g;
            const ConditionReport g1 = check_G1(green.grid(), g, built.interval);
            if (!g1.passed)
                throw Error(ErrorCode::condition_failed, "custom interval fails the sub/supersolution check, worst margin " +
                                                             std::to_string(g1.worst_margin()));
            G2Options opts;
            opts.seed = config.seed;
            const ConditionReport g2 = check_G2(green.grid(), g, built.interval, opts);
            if (!g2.passed)
                throw Error(ErrorCode::condition_failed, "custom interval fails the beta-scaling check, worst margin " +
                                                             std::to_string(g2.worst_margin()));
        }
        return built;
    }
    throw Error(ErrorCode::parse_error, "unknown problem '" + config.problem + "'");
}

int cmd_solve(const RunConfig& config) {
    return guarded([&] {
        const GreenOperator green(Grid(domain_of(config)));
        const BuiltProblem built = build_problem(config, green);
        return solve_into(config, green, built, config.out_dir).exit_code;
    });
}

int cmd_verify(const RunConfig& config) {
    return guarded([&] {
        const GreenOperator green(Grid(domain_of(config)));
        const BuiltProblem built = build_problem(config, green, false);
        const NonlinearityG g = built.spec.normalized().g;

        const ConditionReport g1 = check_G1(green.grid(), g, built.interval);
        G2Options g2_options;
        g2_options.seed = config.seed;
        const ConditionReport g2 = check_G2(green.grid(), g, built.interval, g2_options);
        const InvarianceReport inv = verify_invariance(built.spec, green, built.interval, config.trials, config.seed);
        const PositivityReport pos = green_positivity_check(green, config.seed);
        const bool passed = g1.passed && g2.passed && inv.passed() && pos.passed;

        json j;
        j["problem"] = built.name;
        j["parameter"] = optional_json(built.parameter);
        j["threshold"] = optional_json(built.threshold);
        j["G1"] = condition_json(g1);
        j["G2"] = condition_json(g2);
        json ij;
        ij["passed"] = inv.passed();
        ij["fields_checked"] = inv.fields_checked;
        ij["violations"] = inv.violations;
        ij["worst_violation"] = inv.worst_violation;
        ij["outside_rectangle"] = inv.outside_rectangle;
        ij["violations_inside_rectangle"] = inv.violations_inside_rectangle;
        ij["M"] = inv.M;
        ij["r_M"] = inv.r_M;
        j["invariance"] = ij;
        json pj;
        pj["passed"] = pos.passed;
        pj["dense_checked"] = pos.dense_checked;
        pj["min_entry"] = pos.dense_checked ? json(pos.min_entry) : json(nullptr);
        pj["torsion_matches"] = pos.torsion_matches;
        pj["monotone"] = pos.monotone;
        j["positivity"] = pj;
        j["passed"] = passed;

        make_directory(config.out_dir);
        write_text(config.out_dir / "verification.json", j.dump(2));
        return passed ? exit_ok : exit_condition;
    });
}

int cmd_sweep(const RunConfig& config) {
    return guarded([&] {
        if (config.problem != "example1" && config.problem != "example2" && config.problem != "example4")
            throw Error(ErrorCode::parse_error, "sweep supports example1, example2 and example4");
        if (config.points < 1) throw Error(ErrorCode::parameter_out_of_range, "--points must be at least 1");

        const GreenOperator green(Grid(domain_of(config)));
        const int points = config.points;
        std::vector<double> fractions(static_cast<std::size_t>(points), 0.5);
        if (points > 1)
            for (int i = 0; i < points; ++i) fractions[static_cast<std::size_t>(i)] = 0.05 + 0.9 * i / (points - 1);

        make_directory(config.out_dir);
        std::vector<PointResult> rows(fractions.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < rows.size(); i = next++) {
                RunConfig point = config;
                point.lambda.reset();
                point.mu.reset();
                point.lambda_frac = point.mu_frac = fractions[i];
                char name[32];
                std::snprintf(name, sizeof name, "point_%03zu", i);
                try {
                    const BuiltProblem built = build_problem(point, green);
                    rows[i] = solve_into(point, green, built, config.out_dir / name);
                } catch (const Error& e) {
                    rows[i].status = std::string(to_string(e.code()));
                    rows[i].exit_code = exit_code_for(e);
                }
            }
        };
        const int jobs = std::min(config.jobs > 0 ? config.jobs : default_jobs(), points);
        {
            std::vector<std::jthread> pool;
            for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
            worker();
        }

        const fs::path path = config.out_dir / "sweep.csv";
        std::ofstream out = open_output(path);
        out << "parameter,status,iterations,residual,min_ratio\n";
        int code = exit_ok;
        for (const PointResult& row : rows) {
            out << csv_number(row.parameter.value_or(std::nan(""))) << ',' << row.status << ',' << row.iterations << ','
                << csv_number(row.residual) << ',' << csv_number(row.min_ratio) << '\n';
            if (code == exit_ok) code = row.exit_code;
        }
        close_output(out, path);
        return code;
    });
}

int cmd_oracle_compare(const RunConfig& config) {
    return guarded([&] {
        const Grid grid(domain_of(config));
        for (int axis = 0; axis < grid.dimension(); ++axis)
            if (grid.interior(axis) > kOracleAxisLimit)
                throw Error(ErrorCode::parameter_out_of_range, "oracle-compare supports at most " +
                                                                   std::to_string(kOracleAxisLimit) +
                                                                   " interior nodes per axis");
        const GreenOperator green(grid);
        const BuiltProblem built = build_problem(config, green);
        const SolveReport fp = fixed_point_solve(built.spec, green, built.interval, solve_options(config));

        json j;
        j["problem"] = built.name;
        j["n"] = config.n;
        j["fixed_point"] = {{"status", to_string(fp.status)}, {"iterations", fp.iterations}, {"residual", fp.residual}};

        int code = exit_for_status(fp.status);
        std::string verdict = "fixed-point-" + std::string(to_string(fp.status));
        json diff = nullptr;
        if (fp.status == SolveStatus::converged) {
            const Field u0 = 0.5 * (fp.r_M * built.interval.phi + built.interval.psi);
            json nj;
            try {
                const OracleResult oracle = newton_solve(built.spec, green, u0);
                nj = {{"converged", oracle.converged},
                      {"iterations", oracle.newton_iterations},
                      {"residual", oracle.final_residual}};
                if (oracle.converged) {
                    const double d = sup_distance(oracle.u, fp.u);
                    diff = d;
                    verdict = d <= kOracleTolerance ? "agree" : "disagree";
                    code = d <= kOracleTolerance ? exit_ok : exit_disagreement;
                } else {
                    verdict = "oracle-inconclusive";
                    code = exit_oracle_inconclusive;
                }
            } catch (const Error& e) {
                if (e.code() != ErrorCode::singular_jacobian) throw;
                nj = {{"converged", false}, {"error", to_string(e.code())}};
                verdict = "oracle-inconclusive";
                code = exit_oracle_inconclusive;
            }
            j["newton"] = nj;
        } else {
            j["newton"] = nullptr;
        }
        j["sup_diff"] = diff;
        j["tolerance"] = kOracleTolerance;
        j["verdict"] = verdict;

        make_directory(config.out_dir);
        write_text(config.out_dir / "oracle.json", j.dump(2));
        return code;
    });
}

} // namespace kcsolve::cli
