#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <unistd.h>

#include "commands.hpp"
#include "kcsolve/oracle.hpp"

using namespace kcsolve;
using namespace kcsolve::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("kcsolve_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& path) { return nlohmann::json::parse(slurp(path)); }

/// Rows of a CSV file as numbers; the header is returned separately.
std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::vector<std::string>* header = nullptr) {
    std::ifstream in(path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            if (header) *header = cells;
            first = false;
        } else {
            rows.push_back(cells);
        }
    }
    return rows;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

RunConfig config_for(const std::string& problem, const fs::path& out) {
    RunConfig c;
    c.problem = problem;
    c.out_dir = out;
    return c;
}

} // namespace

TEST_CASE("solve: example 1 with the sign-changing forcing") {
    const fs::path dir = scratch("solve1");
    RunConfig c = config_for("example1", dir);
    c.n = 257;
    CHECK(cmd_solve(c) == exit_ok);
    const auto report = read_json(dir / "report.json");
    CHECK(report["status"] == "converged");
    CHECK(report["residual"].get<double>() < 1e-8);

    std::vector<std::string> header;
    const auto rows = read_csv(dir / "solution.csv", &header);
    CHECK(header == std::vector<std::string>{"x", "u", "phi", "psi", "rM_phi"});
    CHECK(rows.size() == 256);
}

TEST_CASE("solve: threshold guard and custom definitions") {
    RunConfig c = config_for("example2", scratch("guard"));
    c.mu = 1e9;
    CHECK(cmd_solve(c) == exit_config);

    const fs::path dir = scratch("custom");
    write_file(dir / "flat.txt", "# A = 1, g = 1 has u = xi\nA = 1\ng = 1\nphi = 0\npsi = 2 * xi\n");
    c = config_for("custom", dir / "out");
    c.definition = dir / "flat.txt";
    CHECK(cmd_solve(c) == exit_ok);
    const GreenOperator green(Grid(domain_of(c)));
    const auto rows = read_csv(dir / "out" / "solution.csv");
    REQUIRE(rows.size() == green.grid().size());
    for (std::size_t k = 0; k < rows.size(); ++k) CHECK(std::abs(std::stod(rows[k][1]) - green.torsion()[k]) <= 1e-15);

    c.definition = dir / "missing.txt";
    CHECK(cmd_solve(c) == exit_io);
}

TEST_CASE("definition files report line numbers") {
    const fs::path dir = scratch("defs");
    const GreenOperator green(Grid(DomainSpec::interval(0.0, 1.0, 16)));
    auto message = [&](const std::string& text) -> std::string {
        write_file(dir / "d.txt", text);
        try {
            load_definition(dir / "d.txt", green);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::parse_error);
            return e.what();
        }
        return "";
    };
    CHECK(message("A = 1\n\ng = 1 +\n").find("d.txt:3: column") != std::string::npos);
    CHECK(message("A = 1\nB = 2\n").find("d.txt:2: unknown key 'B'") != std::string::npos);
    CHECK(message("A = 1\nA = 2\n").find("d.txt:2: duplicate key 'A'") != std::string::npos);
    CHECK(message("A = 1\nno equals sign\n").find("d.txt:2: expected") != std::string::npos);
    CHECK(message("A = 1\ng = 1\npsi = xi\n").find("missing key 'phi'") != std::string::npos);
    CHECK(message("A = u\n").find("d.txt:1: column 5: unknown name 'u'") != std::string::npos);

    write_file(dir / "ok.txt", "A = 2 + s^2 + t\nm = 2\ng = x + y + u\np = 3\nalpha = 0.25\nphi = 0.5 * phi1\npsi = xi + 1\n");
    const BuiltProblem b = load_definition(dir / "ok.txt", green);
    CHECK(b.spec.A(1.0, 2.0) == 5.0);
    CHECK(b.spec.A.lower_bound() == 2.0);
    CHECK(b.spec.g(Point{0.25, 0.0}, 1.0) == 1.25);
    CHECK(b.spec.p == 3.0);
    CHECK(b.interval.alpha == 0.25);
    CHECK(b.interval.phi.max() == 0.5);
    CHECK(sup_distance(b.interval.psi, green.torsion() + Field(green.grid(), 1.0)) == 0.0);
}

TEST_CASE("forcing presets and tables") {
    const Point mid{0.5, 0.0};
    CHECK(parse_forcing("poly-signchanging", 1)(mid) == 1.0);
    CHECK(parse_forcing("constant:2.5", 1)(mid) == 2.5);
    CHECK_THROWS_AS(parse_forcing("constant:abc", 1), Error);

    const fs::path dir = scratch("table");
    write_file(dir / "f.txt", "# x f\n0 0\n1, 4\n0.5 1\n");
    const SpatialFunction f = parse_forcing((dir / "f.txt").string(), 1);
    CHECK(f(Point{0.25, 0.0}) == 0.5);
    CHECK(f(Point{0.75, 0.0}) == 2.5);
    CHECK(f(Point{2.0, 0.0}) == 4.0);
    CHECK_THROWS_AS(parse_forcing((dir / "f.txt").string(), 2), Error);
    CHECK_THROWS_AS(parse_forcing((dir / "none.txt").string(), 1), Error);
}

TEST_CASE("verify") {
    {
        // Example 3 satisfies the nodewise conditions; the sampled invariance
        // check is reported separately (see the acceptance suite).
        const fs::path dir = scratch("verify3");
        const int code = cmd_verify(config_for("example3", dir));
        const auto j = read_json(dir / "verification.json");
        CHECK(j["G1"]["passed"] == true);
        CHECK(j["G2"]["passed"] == true);
        CHECK(j["positivity"]["passed"] == true);
        CHECK(j["invariance"]["violations_inside_rectangle"] == 0);
        CHECK(code == (j["invariance"]["passed"] == true ? exit_ok : exit_condition));
    }
    {
        const fs::path dir = scratch("verify1");
        RunConfig c = config_for("example1", dir);
        c.f = "constant:2";
        c.sigma = 0.9;
        c.lambda_frac = 1.5;
        CHECK(cmd_verify(c) != exit_ok);
        const auto j = read_json(dir / "verification.json");
        CHECK(j["G1"]["super_margin"].get<double>() < 0.0);
        CHECK(j["passed"] == false);
    }
    {
        const fs::path dir = scratch("verify_custom");
        write_file(dir / "d.txt", "A = 1\ng = 1\nphi = 2 * xi\npsi = xi\n");
        RunConfig c = config_for("custom", dir);
        c.definition = dir / "d.txt";
        CHECK(cmd_verify(c) != exit_ok);
        CHECK(read_json(dir / "verification.json")["G1"]["order_margin"].get<double>() < 0.0);
    }
}

TEST_CASE("sweep") {
    {
        const fs::path dir = scratch("sweep1");
        RunConfig c = config_for("example1", dir);
        c.jobs = 3;
        CHECK(cmd_sweep(c) == exit_ok);
        std::vector<std::string> header;
        const auto rows = read_csv(dir / "sweep.csv", &header);
        CHECK(header == std::vector<std::string>{"parameter", "status", "iterations", "residual", "min_ratio"});
        REQUIRE(rows.size() == 16);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(rows[i][1] == "converged");
            if (i > 0) CHECK(std::stod(rows[i][0]) > std::stod(rows[i - 1][0]));
        }

        const fs::path serial = scratch("sweep1_serial");
        c.jobs = 1;
        c.out_dir = serial;
        CHECK(cmd_sweep(c) == exit_ok);
        CHECK(slurp(dir / "sweep.csv") == slurp(serial / "sweep.csv"));
        CHECK(slurp(dir / "point_007" / "solution.csv") == slurp(serial / "point_007" / "solution.csv"));
    }
    {
        const fs::path dir = scratch("sweep4");
        RunConfig c = config_for("example4", dir);
        c.points = 6;
        CHECK(cmd_sweep(c) == exit_ok);
        for (int i = 0; i < 6; ++i) {
            char name[16];
            std::snprintf(name, sizeof name, "point_%03d", i);
            const auto rows = read_csv(dir / name / "solution.csv");
            const Grid grid(domain_of(c));
            Field psi(grid);
            for (std::size_t k = 0; k < rows.size(); ++k) psi[k] = std::stod(rows[k][3]);
            const double t = h1_seminorm(psi);
            const double factor = 1.0 / ((1.0 + c.d * t * t) * (1.0 + c.d * t * t));
            const double eps = 1e-10 * (1.0 + psi.max_abs());
            for (const auto& row : rows) CHECK(std::stod(row[1]) >= factor * std::stod(row[2]) - eps);
        }
    }
    {
        const fs::path dir = scratch("sweep_single");
        RunConfig c = config_for("example2", dir / "sweep");
        c.points = 1;
        CHECK(cmd_sweep(c) == exit_ok);
        c.out_dir = dir / "solve";
        CHECK(cmd_solve(c) == exit_ok);
        CHECK(slurp(dir / "sweep" / "point_000" / "solution.csv") == slurp(dir / "solve" / "solution.csv"));
        CHECK(slurp(dir / "sweep" / "point_000" / "report.json") == slurp(dir / "solve" / "report.json"));
    }
    CHECK(cmd_sweep(config_for("example3", scratch("sweep3"))) == exit_config);
}

TEST_CASE("oracle-compare") {
    {
        const fs::path dir = scratch("oracle3");
        RunConfig c = config_for("example3", dir);
        c.n = 33;
        CHECK(cmd_oracle_compare(c) == exit_ok);
        const auto j = read_json(dir / "oracle.json");
        CHECK(j["verdict"] == "agree");
        CHECK(j["sup_diff"].get<double>() <= 1e-8);
    }
    {
        const fs::path dir = scratch("oracle_flat");
        write_file(dir / "d.txt", "A = 1\ng = 1\nphi = 0\npsi = 2 * xi\n");
        RunConfig c = config_for("custom", dir);
        c.definition = dir / "d.txt";
        c.n = 33;
        CHECK(cmd_oracle_compare(c) == exit_ok);
        CHECK(read_json(dir / "oracle.json")["sup_diff"].get<double>() <= 1e-12);
    }
    RunConfig c = config_for("example3", scratch("oracle_cap"));
    c.n = 129;
    CHECK(cmd_oracle_compare(c) == exit_config);
}

TEST_CASE("exit code classes") {
    {
        RunConfig c = config_for("example2", scratch("maxiter"));
        c.max_iter = 2;
        CHECK(cmd_solve(c) == exit_max_iter);
    }
    {
        // A spike in A narrower than the sampling of maximize_A: M is
        // underestimated, so r_M φ is too high and the first iterate drops out.
        const fs::path dir = scratch("left");
        RunConfig c = config_for("custom", dir / "out");
        const GreenOperator green(Grid(domain_of(c)));
        const double s0 = lp_norm(0.5 * green.torsion(), 2.0);
        char def[256];
        std::snprintf(def, sizeof def, "A = 1 + 1000 * exp(-((s - %.17g) * 1e9)^2)\ng = 1\nphi = 0.5 * xi\npsi = 2 * xi\n", s0);
        write_file(dir / "spike.txt", def);
        c.definition = dir / "spike.txt";
        c.start = "phi-end";
        CHECK(cmd_solve(c) == exit_left_interval);
        CHECK(read_json(dir / "out" / "report.json")["status"] == "left-interval");
    }
    {
        const fs::path dir = scratch("g1fail");
        write_file(dir / "d.txt", "A = 1\ng = 1\nphi = 0\npsi = xi / 2\n");
        RunConfig c = config_for("custom", dir / "out");
        c.definition = dir / "d.txt";
        CHECK(cmd_solve(c) == exit_condition);
    }
    {
        const fs::path dir = scratch("io");
        write_file(dir / "blocker", "");
        CHECK(cmd_solve(config_for("example1", dir / "blocker" / "sub")) == exit_io);
    }
    {
        RunConfig c = config_for("example1", scratch("badn"));
        c.n = 2;
        CHECK(cmd_solve(c) == exit_config);
        c.n = 64;
        c.domain = {0.0, 1.0, 2.0};
        CHECK(cmd_solve(c) == exit_config);
    }
}

TEST_CASE("solve output is deterministic") {
    for (const char* problem : {"example1", "example2", "example3", "example4"}) {
        const fs::path a = scratch(std::string("det_a_") + problem);
        const fs::path b = scratch(std::string("det_b_") + problem);
        RunConfig c = config_for(problem, a);
        c.seed = 12345;
        CHECK(cmd_solve(c) == exit_ok);
        c.out_dir = b;
        CHECK(cmd_solve(c) == exit_ok);
        CHECK(slurp(a / "solution.csv") == slurp(b / "solution.csv"));
        CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
    }
}
