#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using kcsolve::cli::RunConfig;

namespace {

void add_options(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--problem", cfg.problem, "example1 | example2 | example3 | example4 | custom")
        ->check(CLI::IsMember({"example1", "example2", "example3", "example4", "custom"}))
        ->capture_default_str();
    cmd->add_option("--f", cfg.f, "forcing: constant:<v>, poly-signchanging or a file of 'x value' rows")
        ->capture_default_str();
    cmd->add_option("--def", cfg.definition, "problem definition file for --problem custom");
    cmd->add_option("--domain", cfg.domain, "a,b or ax,bx,ay,by")->delimiter(',')->expected(2, 4)->capture_default_str();
    cmd->add_option("--n", cfg.n, "cells per axis")->capture_default_str();

    cmd->add_option("--p", cfg.p, "norm / power exponent")->capture_default_str();
    cmd->add_option("--c", cfg.c)->capture_default_str();
    cmd->add_option("--d", cfg.d)->capture_default_str();
    cmd->add_option("--q", cfg.q, "concave exponent")->capture_default_str();
    cmd->add_option("--lambda", cfg.lambda, "absolute lambda (example1)");
    cmd->add_option("--lambda-frac", cfg.lambda_frac, "lambda as a fraction of lambda_f")->capture_default_str();
    cmd->add_option("--mu", cfg.mu, "absolute mu (example2, example4)");
    cmd->add_option("--mu-frac", cfg.mu_frac, "mu as a fraction of mu_0")->capture_default_str();
    cmd->add_option("--sigma", cfg.sigma, "safety factor in (0,1)");

    cmd->add_option("--theta", cfg.theta, "Mann relaxation in (0,1]")->capture_default_str();
    cmd->add_option("--tol", cfg.tol)->capture_default_str();
    cmd->add_option("--max-iter", cfg.max_iter)->capture_default_str();
    cmd->add_option("--start", cfg.start)->check(CLI::IsMember({"phi-end", "psi-end", "midpoint"}))->capture_default_str();

    cmd->add_option("--seed", cfg.seed)->capture_default_str();
    cmd->add_option("--trials", cfg.trials, "random interval fields for the invariance check")->capture_default_str();
    cmd->add_option("--points", cfg.points, "sweep ladder size")->capture_default_str();
    cmd->add_option("--jobs", cfg.jobs, "sweep threads (0: hardware concurrency)")->envname("KCSOLVE_JOBS");
    cmd->add_option("--out-dir", cfg.out_dir, "directory for output files")->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonlocal Kirchhoff-type Dirichlet solver"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto* solve = app.add_subcommand("solve", "build, check and solve one problem");
    auto* verify = app.add_subcommand("verify", "report the sub/supersolution, invariance and positivity checks");
    auto* sweep = app.add_subcommand("sweep", "solve across the guaranteed parameter range");
    auto* oracle = app.add_subcommand("oracle-compare", "compare the fixed point with the dense Newton oracle");
    for (auto* cmd : {solve, verify, sweep, oracle}) add_options(cmd, cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kcsolve::cli::exit_config;
    }

    if (*solve) return kcsolve::cli::cmd_solve(cfg);
    if (*verify) return kcsolve::cli::cmd_verify(cfg);
    if (*sweep) return kcsolve::cli::cmd_sweep(cfg);
    return kcsolve::cli::cmd_oracle_compare(cfg);
}
