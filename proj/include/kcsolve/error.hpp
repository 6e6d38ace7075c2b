#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kcsolve {

enum class ErrorCode {
    invalid_domain,
    shape_mismatch,
    solver_failure,
    no_convergence,
    invalid_exponent,
    coefficient_below_bound,
    unsupported_alpha,
    invalid_m,
    infeasible_f,
    invalid_p,
    invalid_exponents,
    parameter_out_of_range,
    condition_failed,
    singular_jacobian,
    parse_error,
    io_error,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace kcsolve
