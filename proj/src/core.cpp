#include "kcsolve/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "kcsolve/random.hpp"

namespace kcsolve {

CoefficientA::CoefficientA(Function fn, double lower_bound) : fn_(std::move(fn)), m_(lower_bound) {
    if (!(m_ > 0.0) || !std::isfinite(m_))
        throw Error(ErrorCode::coefficient_below_bound, "declared lower bound m must be positive");
}

double CoefficientA::operator()(double s, double t) const {
    const double value = fn_(s, t);
    if (!std::isfinite(value) || value < m_)
        throw Error(ErrorCode::coefficient_below_bound, "A(" + std::to_string(s) + ", " + std::to_string(t) +
                                                            ") = " + std::to_string(value) + " is below m = " +
                                                            std::to_string(m_));
    return value;
}

CoefficientA CoefficientA::normalized() const {
    if (m_ == 1.0) return *this;
    return CoefficientA([fn = fn_, m = m_](double s, double t) { return fn(s, t) / m; }, 1.0);
}

NonlinearityG::NonlinearityG(Function fn) : fn_(std::move(fn)) {}

NonlinearityG NonlinearityG::scaled(double factor) const {
    if (factor == 1.0) return *this;
    return NonlinearityG([fn = fn_, factor](const Point& x, double s) { return factor * fn(x, s); });
}

Field NonlinearityG::evaluate(const Field& v) const {
    const Grid& grid = v.grid();
    Field out(grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        out[k] = fn_(grid.coordinate(k), v[k]);
        if (!std::isfinite(out[k]))
            throw Error(ErrorCode::solver_failure, "g is not finite at node " + std::to_string(k) +
                                                       " (s = " + std::to_string(v[k]) + ")");
    }
    return out;
}

void ProblemSpec::validate() const {
    domain.validate();
    if (!(p > 1.0) || !std::isfinite(p)) throw Error(ErrorCode::invalid_p, "norm exponent p must satisfy 1 < p < inf");
}

ProblemSpec ProblemSpec::normalized() const {
    const double m = A.lower_bound();
    return ProblemSpec{domain, A.normalized(), g.scaled(1.0 / m), p};
}

std::string_view to_string(SolveStatus status) noexcept {
    switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max-iter";
    case SolveStatus::left_interval: return "left-interval";
    }
    return "unknown";
}

StartPoint parse_start_point(std::string_view name) {
    if (name == "phi-end") return StartPoint::phi_end;
    if (name == "psi-end") return StartPoint::psi_end;
    if (name == "midpoint") return StartPoint::midpoint;
    throw Error(ErrorCode::parse_error, "unknown start point '" + std::string(name) + "'");
}

namespace {

std::vector<double> linspace(double lo, double hi, int count) {
    if (count <= 1 || hi <= lo) return {lo};
    std::vector<double> out(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
    out.back() = hi;
    return out;
}

} // namespace

double maximize_A(const CoefficientA& A, double s_max, double t_max) {
    if (!(s_max >= 0.0) || !(t_max >= 0.0))
        throw Error(ErrorCode::parameter_out_of_range, "maximize_A needs s_max, t_max >= 0");

    double best = -std::numeric_limits<double>::infinity();
    double best_s = 0.0;
    double best_t = 0.0;
    auto scan = [&](const std::vector<double>& ss, const std::vector<double>& ts) {
        for (double t : ts) {
            for (double s : ss) {
                const double value = A(s, t);
                if (value > best) {
                    best = value;
                    best_s = s;
                    best_t = t;
                }
            }
        }
    };

    constexpr int kCoarse = 64;
    scan(linspace(0.0, s_max, kCoarse), linspace(0.0, t_max, kCoarse));

    double cell_s = s_max / (kCoarse - 1);
    double cell_t = t_max / (kCoarse - 1);
    for (int round = 0; round < 3; ++round) {
        const double s_lo = std::max(0.0, best_s - cell_s), s_hi = std::min(s_max, best_s + cell_s);
        const double t_lo = std::max(0.0, best_t - cell_t), t_hi = std::min(t_max, best_t + cell_t);
        // New spacing is cell / 8 on each axis.
        const int ns = cell_s > 0.0 ? static_cast<int>(std::lround((s_hi - s_lo) / (cell_s / 8.0))) + 1 : 1;
        const int nt = cell_t > 0.0 ? static_cast<int>(std::lround((t_hi - t_lo) / (cell_t / 8.0))) + 1 : 1;
        scan(linspace(s_lo, s_hi, ns), linspace(t_lo, t_hi, nt));
        cell_s /= 8.0;
        cell_t /= 8.0;
    }

    if (best == A.lower_bound()) return best;
    return best * (1.0 + 1e-9);
}

double compute_r_M(double M, double alpha) {
    if (!(M >= 1.0) || !std::isfinite(M)) throw Error(ErrorCode::invalid_m, "M must be a finite number >= 1");
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
        throw Error(ErrorCode::unsupported_alpha, "alpha must be >= 0 (the series of alpha^k is not summed for alpha < 0)");
    if (M == 1.0) return 1.0;
    if (alpha >= 1.0) return 0.0;
    // sum_{k>=0} alpha^k = 1 / (1 - alpha), with 0^0 = 1.
    const double r = std::pow(1.0 / M, 1.0 / (1.0 - alpha));
    // Below the normal range the fixed-point identity cannot be represented.
    return r < std::numeric_limits<double>::min() ? 0.0 : r;
}

double g_max(const NonlinearityG& g, const Grid& grid, const Field& psi) {
    const double top = std::max(psi.max(), 0.0);
    constexpr int kLevels = 256;
    const std::vector<double> levels = linspace(0.0, top, kLevels);

    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_node = 0;
    double best_s = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Point x = grid.coordinate(k);
        for (double s : levels) {
            const double value = g(x, s);
            if (value > best) {
                best = value;
                best_node = k;
                best_s = s;
            }
        }
    }
    if (top > 0.0) {
        const double ds = top / (kLevels - 1);
        const Point x = grid.coordinate(best_node);
        for (double s : linspace(std::max(0.0, best_s - ds), std::min(top, best_s + ds), kLevels))
            best = std::max(best, g(x, s));
    }
    return best;
}

Field apply_T(const ProblemSpec& spec, const GreenOperator& green, const Field& v) {
    if (!(v.grid() == green.grid())) throw Error(ErrorCode::shape_mismatch, "field is not on the operator's grid");
    const double a = spec.A(lp_norm(v, spec.p), h1_seminorm(v));
    Field w = green.solve(spec.g.evaluate(v));
    w *= 1.0 / a;
    return w;
}

double pde_residual(const ProblemSpec& spec, const Field& u) {
    const double a = spec.A(lp_norm(u, spec.p), h1_seminorm(u));
    const Field lu = apply_laplacian(u.grid(), u);
    const Field gu = spec.g.evaluate(u);
    double r = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) r = std::max(r, std::abs(a * lu[k] - gu[k]));
    return r;
}

IntervalConstants interval_constants(const ProblemSpec& spec, const OrderInterval& interval) {
    const ProblemSpec work = spec.normalized();
    const double M = maximize_A(work.A, lp_norm(interval.psi, work.p), h1_seminorm(interval.psi));
    return {M, compute_r_M(M, interval.alpha)};
}

namespace {

void check_shapes(const ProblemSpec& spec, const GreenOperator& green, const OrderInterval& interval) {
    spec.validate();
    if (!(Grid(spec.domain) == green.grid()))
        throw Error(ErrorCode::shape_mismatch, "Green operator was built for a different domain");
    if (!(interval.phi.grid() == green.grid()) || !(interval.psi.grid() == green.grid()))
        throw Error(ErrorCode::shape_mismatch, "order interval is not on the problem grid");
}

/// Largest distance of w outside [lower - eps, upper + eps]; infinity for non-finite entries.
double excursion(const Field& w, const Field& lower, const Field& upper, double eps) {
    double worst = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (!std::isfinite(w[k])) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, (lower[k] - eps) - w[k]);
        worst = std::max(worst, w[k] - (upper[k] + eps));
    }
    return worst;
}

} // namespace

InvarianceReport verify_invariance(const ProblemSpec& spec, const GreenOperator& green,
                                   const OrderInterval& interval, int trials, std::uint64_t seed) {
    check_shapes(spec, green, interval);
    const ProblemSpec work = spec.normalized();
    const IntervalConstants c = interval_constants(spec, interval);

    InvarianceReport report;
    report.M = c.M;
    report.r_M = c.r_M;
    const Field lower = c.r_M * interval.phi;
    const Field& upper = interval.psi;
    const double eps = 1e-10 * (1.0 + upper.max_abs());

    const double s_max = lp_norm(upper, work.p);
    const double t_max = h1_seminorm(upper);
    auto check = [&](const Field& w) {
        const double out = excursion(apply_T(work, green, w), lower, upper, eps);
        const bool inside = lp_norm(w, work.p) <= s_max && h1_seminorm(w) <= t_max;
        ++report.fields_checked;
        if (!inside) ++report.outside_rectangle;
        if (out > 0.0) {
            ++report.violations;
            if (inside) ++report.violations_inside_rectangle;
            report.worst_violation = std::max(report.worst_violation, out);
        }
    };

    check(lower);
    check(upper);
    UniformStream rng(seed);
    Field w(green.grid());
    for (int trial = 0; trial < trials; ++trial) {
        for (std::size_t k = 0; k < w.size(); ++k) w[k] = lower[k] + rng.next() * (upper[k] - lower[k]);
        check(w);
    }
    return report;
}

SolveReport fixed_point_solve(const ProblemSpec& spec, const GreenOperator& green, const OrderInterval& interval,
                              const SolveOptions& options) {
    check_shapes(spec, green, interval);
    if (!(options.tol > 0.0) || options.max_iter < 1 || !(options.theta > 0.0 && options.theta <= 1.0))
        throw Error(ErrorCode::parameter_out_of_range, "need tol > 0, max_iter >= 1 and theta in (0, 1]");

    const ProblemSpec work = spec.normalized();
    const IntervalConstants c = interval_constants(spec, interval);
    const Field lower = c.r_M * interval.phi;
    const Field& upper = interval.psi;
    const double psi_sup = upper.max_abs();
    const double eps = 1e-10 * (1.0 + psi_sup);
    const double step_tol = options.tol * (1.0 + psi_sup);
    const double residual_scale = 1.0 + g_max(work.g, green.grid(), upper);

    SolveReport report{.u = Field(green.grid())};
    report.M = c.M;
    report.r_M = c.r_M;
    switch (options.start) {
    case StartPoint::phi_end: report.u = lower; break;
    case StartPoint::psi_end: report.u = upper; break;
    case StartPoint::midpoint: report.u = 0.5 * (lower + upper); break;
    }

    double theta = options.theta;
    int rising = 0;
    report.status = SolveStatus::max_iter;
    for (int it = 1; it <= options.max_iter; ++it) {
        Field next = apply_T(work, green, report.u);
        if (theta != 1.0) {
            next *= theta;
            next += (1.0 - theta) * report.u;
        }
        const double diff = sup_distance(next, report.u);
        report.iterations = it;
        report.u = std::move(next);
        if (excursion(report.u, lower, upper, eps) > 0.0) {
            report.status = SolveStatus::left_interval;
            break;
        }
        if (!report.sup_diff_history.empty() && diff >= report.sup_diff_history.back())
            ++rising;
        else
            rising = 0;
        report.sup_diff_history.push_back(diff);
        if (options.oscillation_fallback && rising >= 5 && theta > 0.5) {
            theta = 0.5;
            rising = 0;
        }
        if (diff < step_tol && pde_residual(work, report.u) / residual_scale <= options.residual_tol) {
            report.status = SolveStatus::converged;
            break;
        }
    }

    report.theta_final = theta;
    if (report.u.all_finite()) {
        report.residual = pde_residual(work, report.u) / residual_scale;
        report.lp = lp_norm(report.u, work.p);
        report.h1 = h1_seminorm(report.u);
    } else {
        report.residual = std::numeric_limits<double>::infinity();
    }
    return report;
}

std::string report_to_json(const SolveReport& report) {
    nlohmann::ordered_json j;
    j["status"] = to_string(report.status);
    j["iterations"] = report.iterations;
    j["residual"] = report.residual;
    j["M"] = report.M;
    j["r_M"] = report.r_M;
    j["norms"] = {{"lp", report.lp}, {"h1", report.h1}};
    j["history"] = report.sup_diff_history;
    return j.dump(2);
}

} // namespace kcsolve
