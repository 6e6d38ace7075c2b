#include "kcsolve/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace kcsolve {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::invalid_domain: return "invalid-domain";
    case ErrorCode::shape_mismatch: return "shape-mismatch";
    case ErrorCode::solver_failure: return "solver-failure";
    case ErrorCode::no_convergence: return "no-convergence";
    case ErrorCode::invalid_exponent: return "invalid-exponent";
    case ErrorCode::coefficient_below_bound: return "coefficient-below-bound";
    case ErrorCode::unsupported_alpha: return "unsupported-alpha";
    case ErrorCode::invalid_m: return "invalid-M";
    case ErrorCode::infeasible_f: return "infeasible-f";
    case ErrorCode::invalid_p: return "invalid-p";
    case ErrorCode::invalid_exponents: return "invalid-exponents";
    case ErrorCode::parameter_out_of_range: return "parameter-out-of-range";
    case ErrorCode::condition_failed: return "condition-failed";
    case ErrorCode::singular_jacobian: return "singular-jacobian";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::io_error: return "io-error";
    }
    return "unknown";
}

DomainSpec DomainSpec::interval(double a, double b, int n) {
    DomainSpec s;
    s.dimension = 1;
    s.lower = {a, 0.0};
    s.upper = {b, 1.0};
    s.cells = {n, 1};
    return s;
}

DomainSpec DomainSpec::rectangle(double ax, double bx, double ay, double by, int nx, int ny) {
    DomainSpec s;
    s.dimension = 2;
    s.lower = {ax, ay};
    s.upper = {bx, by};
    s.cells = {nx, ny};
    return s;
}

void DomainSpec::validate() const {
    if (dimension != 1 && dimension != 2)
        throw Error(ErrorCode::invalid_domain, "dimension must be 1 or 2");
    for (int k = 0; k < dimension; ++k) {
        if (!(std::isfinite(lower[k]) && std::isfinite(upper[k]) && lower[k] < upper[k]))
            throw Error(ErrorCode::invalid_domain, "axis " + std::to_string(k) + " bounds must satisfy a < b");
        if (cells[k] < 3)
            throw Error(ErrorCode::invalid_domain,
                        "axis " + std::to_string(k) + " needs at least 3 cells, got " + std::to_string(cells[k]));
    }
}

Grid::Grid(const DomainSpec& spec) : spec_(spec) {
    spec_.validate();
    if (spec_.dimension == 1) {
        // Canonical form so that equal 1D grids compare equal.
        spec_.lower[1] = 0.0;
        spec_.upper[1] = 1.0;
        spec_.cells[1] = 1;
    }
    size_ = 1;
    volume_ = 1.0;
    for (int k = 0; k < spec_.dimension; ++k) {
        interior_[k] = static_cast<std::size_t>(spec_.cells[k] - 1);
        spacing_[k] = (spec_.upper[k] - spec_.lower[k]) / spec_.cells[k];
        size_ *= interior_[k];
        volume_ *= spacing_[k];
    }
}

Point Grid::coordinate(std::size_t node) const noexcept {
    Point p{0.0, 0.0};
    const std::size_t i = node % interior_[0];
    p[0] = spec_.lower[0] + static_cast<double>(i + 1) * spacing_[0];
    if (spec_.dimension == 2) {
        const std::size_t j = node / interior_[0];
        p[1] = spec_.lower[1] + static_cast<double>(j + 1) * spacing_[1];
    }
    return p;
}

Grid build_grid(const DomainSpec& spec) { return Grid(spec); }

Field::Field(const Grid& grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

Field::Field(const Grid& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size())
        throw Error(ErrorCode::shape_mismatch, "field has " + std::to_string(values_.size()) +
                                                   " values, grid has " + std::to_string(grid_.size()) + " nodes");
}

double Field::max() const { return *std::max_element(values_.begin(), values_.end()); }
double Field::min() const { return *std::min_element(values_.begin(), values_.end()); }

double Field::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

bool Field::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void Field::require_same_grid(const Field& other) const {
    if (!(grid_ == other.grid_)) throw Error(ErrorCode::shape_mismatch, "fields live on different grids");
}

Field& Field::operator+=(const Field& other) {
    require_same_grid(other);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
    return *this;
}

Field& Field::operator-=(const Field& other) {
    require_same_grid(other);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
    return *this;
}

Field& Field::operator*=(double c) {
    for (double& v : values_) v *= c;
    return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double c, Field a) { return a *= c; }
Field operator*(Field a, double c) { return a *= c; }

double sup_distance(const Field& a, const Field& b) {
    a.require_same_grid(b);
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
    return d;
}

Field apply_laplacian(const Grid& grid, const Field& u) {
    if (!(u.grid() == grid)) throw Error(ErrorCode::shape_mismatch, "field is not defined on this grid");
    Field out(grid);
    const std::size_t nx = grid.interior(0);
    const double cx = 1.0 / (grid.spacing(0) * grid.spacing(0));
    if (grid.dimension() == 1) {
        for (std::size_t i = 0; i < nx; ++i) {
            const double left = i > 0 ? u[i - 1] : 0.0;
            const double right = i + 1 < nx ? u[i + 1] : 0.0;
            out[i] = (2.0 * u[i] - left - right) * cx;
        }
        return out;
    }
    const std::size_t ny = grid.interior(1);
    const double cy = 1.0 / (grid.spacing(1) * grid.spacing(1));
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t k = grid.index(i, j);
            const double w = i > 0 ? u[k - 1] : 0.0;
            const double e = i + 1 < nx ? u[k + 1] : 0.0;
            const double s = j > 0 ? u[k - nx] : 0.0;
            const double n = j + 1 < ny ? u[k + nx] : 0.0;
            out[k] = (2.0 * u[k] - w - e) * cx + (2.0 * u[k] - s - n) * cy;
        }
    }
    return out;
}

namespace {

void put_double(std::ostream& os, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

} // namespace

void write_csv(std::ostream& os, const std::vector<CsvColumn>& columns) {
    if (columns.empty()) return;
    const Grid& grid = columns.front().field->grid();
    for (const auto& c : columns) columns.front().field->require_same_grid(*c.field);

    os << "x";
    if (grid.dimension() == 2) os << ",y";
    for (const auto& c : columns) os << ',' << c.name;
    os << '\n';
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Point p = grid.coordinate(k);
        put_double(os, p[0]);
        if (grid.dimension() == 2) {
            os << ',';
            put_double(os, p[1]);
        }
        for (const auto& c : columns) {
            os << ',';
            put_double(os, (*c.field)[k]);
        }
        os << '\n';
    }
}

void write_field_csv(std::ostream& os, const Field& u, const std::string& name) {
    write_csv(os, {{name, &u}});
}

} // namespace kcsolve
