#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kcsolve/error.hpp"

namespace kcsolve {

/// A point of the closed domain. In 1D only the first coordinate is used.
using Point = std::array<double, 2>;

/// Interval (1D) or axis-aligned rectangle (2D) with a uniform cell count
/// per axis. An axis with n cells carries n - 1 interior nodes.
struct DomainSpec {
    int dimension = 1;
    std::array<double, 2> lower{0.0, 0.0};
    std::array<double, 2> upper{1.0, 1.0};
    std::array<int, 2> cells{4, 4};

    static DomainSpec interval(double a, double b, int n);
    static DomainSpec rectangle(double ax, double bx, double ay, double by, int nx, int ny);

    /// Throws Error(invalid_domain) if the domain is malformed.
    void validate() const;

    friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

/// Uniform Dirichlet grid. Unknowns are the interior nodes, ordered
/// lexicographically with x fastest; boundary values are implicitly zero.
class Grid {
public:
    explicit Grid(const DomainSpec& spec);

    const DomainSpec& spec() const noexcept { return spec_; }
    int dimension() const noexcept { return spec_.dimension; }

    /// Interior node count along `axis`.
    std::size_t interior(int axis) const noexcept { return interior_[axis]; }
    std::size_t size() const noexcept { return size_; }
    double spacing(int axis) const noexcept { return spacing_[axis]; }
    /// Product of the spacings: the quadrature weight of one node.
    double cell_volume() const noexcept { return volume_; }

    std::size_t index(std::size_t i, std::size_t j = 0) const noexcept { return i + j * interior_[0]; }
    Point coordinate(std::size_t node) const noexcept;

    friend bool operator==(const Grid& a, const Grid& b) { return a.spec_ == b.spec_; }

private:
    DomainSpec spec_;
    std::array<std::size_t, 2> interior_{1, 1};
    std::array<double, 2> spacing_{1.0, 1.0};
    std::size_t size_ = 0;
    double volume_ = 1.0;
};

Grid build_grid(const DomainSpec& spec);

/// Grid function sampled at the interior nodes.
class Field {
public:
    explicit Field(const Grid& grid, double fill = 0.0);
    Field(const Grid& grid, std::vector<double> values);

    template <typename F>
    static Field sample(const Grid& grid, F&& f) {
        Field out(grid);
        for (std::size_t k = 0; k < grid.size(); ++k) out.values_[k] = f(grid.coordinate(k));
        return out;
    }

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }

    double operator[](std::size_t k) const noexcept { return values_[k]; }
    double& operator[](std::size_t k) noexcept { return values_[k]; }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    double max() const;
    double min() const;
    double max_abs() const;
    bool all_finite() const;

    Field& operator+=(const Field& other);
    Field& operator-=(const Field& other);
    Field& operator*=(double c);

    /// Throws Error(shape_mismatch) unless `other` lives on the same grid.
    void require_same_grid(const Field& other) const;

private:
    Grid grid_;
    std::vector<double> values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double c, Field a);
Field operator*(Field a, double c);

/// Sup-norm of a - b.
double sup_distance(const Field& a, const Field& b);

/// Negative discrete Laplacian with zero Dirichlet data: the three-point
/// stencil in 1D and the five-point stencil in 2D.
Field apply_laplacian(const Grid& grid, const Field& u);

struct CsvColumn {
    std::string name;
    const Field* field;
};

/// Writes one row per interior node: coordinates then value(s).
/// Doubles are printed with 17 significant digits.
void write_csv(std::ostream& os, const std::vector<CsvColumn>& columns);
void write_field_csv(std::ostream& os, const Field& u, const std::string& name = "value");

} // namespace kcsolve
