#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "kcsolve/elliptic.hpp"
#include "kcsolve/grid.hpp"

namespace kcsolve {

/// Nonlocal coefficient A(s, t) with a declared lower bound m > 0, where
/// s = ‖u‖_p and t = ‖∇u‖_2. Every evaluation is checked against m.
class CoefficientA {
public:
    using Function = std::function<double(double s, double t)>;

    CoefficientA(Function fn, double lower_bound);

    /// Throws Error(coefficient_below_bound) if the value is below m or not finite.
    double operator()(double s, double t) const;

    double lower_bound() const noexcept { return m_; }

    /// A / m, with lower bound 1.
    CoefficientA normalized() const;

private:
    Function fn_;
    double m_;
};

/// Right-hand side g(x, s). Hölder continuity in x is the caller's obligation.
class NonlinearityG {
public:
    using Function = std::function<double(const Point& x, double s)>;

    explicit NonlinearityG(Function fn);

    double operator()(const Point& x, double s) const { return fn_(x, s); }

    NonlinearityG scaled(double factor) const;

    /// g(x_k, v_k) at every interior node; throws Error(solver_failure) on non-finite values.
    Field evaluate(const Field& v) const;

private:
    Function fn_;
};

/// -A(‖u‖_p, ‖∇u‖_2) Δu = g(x, u) in Ω, u = 0 on ∂Ω.
struct ProblemSpec {
    DomainSpec domain;
    CoefficientA A;
    NonlinearityG g;
    double p = 2.0;

    /// Throws Error(invalid_p) unless p > 1. Dimensions 1 and 2 have 2* = inf.
    void validate() const;

    /// Divides A and g by the lower bound m so the working coefficient is >= 1.
    ProblemSpec normalized() const;
};

/// Sub/supersolution pair with the exponent α of the β-scaling condition.
struct OrderInterval {
    Field phi;
    Field psi;
    double alpha = 0.0;
};

enum class SolveStatus { converged, max_iter, left_interval };
std::string_view to_string(SolveStatus status) noexcept;

enum class StartPoint { phi_end, psi_end, midpoint };
StartPoint parse_start_point(std::string_view name);

struct SolveOptions {
    double theta = 1.0;          ///< Mann relaxation, 1 is plain Picard
    double tol = 1e-10;          ///< step tolerance, scaled by 1 + ‖ψ‖_∞
    int max_iter = 10000;
    StartPoint start = StartPoint::psi_end;
    double residual_tol = 1e-8;  ///< required of the scaled PDE residual before declaring convergence
    bool oscillation_fallback = true;
};

struct SolveReport {
    Field u;
    int iterations = 0;
    std::vector<double> sup_diff_history{};
    double residual = 0.0;
    double M = 1.0;
    double r_M = 1.0;
    double lp = 0.0;   ///< ‖u‖_p
    double h1 = 0.0;   ///< ‖∇u‖_2
    double theta_final = 1.0;
    SolveStatus status = SolveStatus::max_iter;
};

struct InvarianceReport {
    int fields_checked = 0;
    int violations = 0;
    double worst_violation = 0.0;  ///< largest distance outside the slackened interval, 0 if none
    /// Sampled fields whose (‖w‖_p, ‖∇w‖_2) fall outside [0, ‖ψ‖_p] x [0, ‖∇ψ‖_2],
    /// where A(w) <= M is not guaranteed.
    int outside_rectangle = 0;
    int violations_inside_rectangle = 0;
    double M = 1.0;
    double r_M = 1.0;
    bool passed() const noexcept { return violations == 0; }
};

/// Upper estimate of max A over [0, s_max] x [0, t_max]: 64 x 64 samples,
/// then three rounds of 8x refinement around the best sample. The result is
/// inflated by 1e-9 relative unless every sample sat at the lower bound.
double maximize_A(const CoefficientA& A, double s_max, double t_max);

/// The shrink factor r_M, with (1/M) r_M^α = r_M.
double compute_r_M(double M, double alpha);

/// max g over interior nodes x [0, max ψ], refined once in s around the maximizer.
double g_max(const NonlinearityG& g, const Grid& grid, const Field& psi);

/// T(v) = (−Δ_h)^{-1} g(·, v) / A(‖v‖_p, ‖∇v‖_2). `spec` is used as given.
Field apply_T(const ProblemSpec& spec, const GreenOperator& green, const Field& v);

struct IntervalConstants {
    double M;
    double r_M;
};

/// M over [0, ‖ψ‖_p] x [0, ‖∇ψ‖_2] for the normalized coefficient, and r_M.
IntervalConstants interval_constants(const ProblemSpec& spec, const OrderInterval& interval);

/// Samples `trials` fields w = r_Mφ + Θ(ψ − r_Mφ) plus both endpoints and
/// checks T(w) ∈ [r_Mφ − ε, ψ + ε] with ε = 1e-10 (1 + ‖ψ‖_∞).
InvarianceReport verify_invariance(const ProblemSpec& spec, const GreenOperator& green,
                                   const OrderInterval& interval, int trials, std::uint64_t seed);

/// Mann-relaxed Picard iteration u ← (1 − θ) u + θ T(u) inside [r_Mφ, ψ].
SolveReport fixed_point_solve(const ProblemSpec& spec, const GreenOperator& green,
                              const OrderInterval& interval, const SolveOptions& options = {});

/// ‖A(‖u‖_p, ‖∇u‖_2)(−Δ_h u) − g(·, u)‖_∞ for `spec` as given, without normalization.
double pde_residual(const ProblemSpec& spec, const Field& u);

/// {status, iterations, residual, M, r_M, norms: {lp, h1}, history}
std::string report_to_json(const SolveReport& report);

} // namespace kcsolve
