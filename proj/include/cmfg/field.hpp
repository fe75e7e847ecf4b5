#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "cmfg/grid.hpp"

namespace cmfg {

// Values of a function of x on one time level.
class SpatialField {
public:
    SpatialField() = default;
    explicit SpatialField(const SpaceTimeGrid& grid, double fill = 0.0);
    SpatialField(const SpaceTimeGrid& grid, std::vector<double> values);

    static SpatialField sample(const SpaceTimeGrid& grid, const std::function<double(double, double)>& f);

    const SpaceTimeGrid& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    double& operator[](std::size_t p) { return values_[p]; }
    double operator[](std::size_t p) const { return values_[p]; }
    double& at(int i, int j = 0) { return values_[grid_.node(i, j)]; }
    double at(int i, int j = 0) const { return values_[grid_.node(i, j)]; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    double max_abs() const;

    SpatialField& operator+=(const SpatialField& o);
    SpatialField& operator-=(const SpatialField& o);
    SpatialField& operator*=(double a);

private:
    SpaceTimeGrid grid_ = SpaceTimeGrid::interval(1.0, 1.0, 3, 3);
    std::vector<double> values_;
};

// Dense samples over all space-time nodes, stored time-level major.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const SpaceTimeGrid& grid, double fill = 0.0);
    ScalarField(const SpaceTimeGrid& grid, std::vector<double> values);

    // f(x, y, t); y is 0 in one dimension.
    static ScalarField sample(const SpaceTimeGrid& grid, const std::function<double(double, double, double)>& f);

    const SpaceTimeGrid& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }

    double& operator()(std::size_t p, int k) { return values_[k * grid_.space_size() + p]; }
    double operator()(std::size_t p, int k) const { return values_[k * grid_.space_size() + p]; }
    double& at(int i, int j, int k) { return (*this)(grid_.node(i, j), k); }
    double at(int i, int j, int k) const { return (*this)(grid_.node(i, j), k); }

    std::span<const double> level(int k) const;
    std::span<double> level(int k);
    SpatialField slice(int k) const;
    void set_slice(int k, const SpatialField& f);

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    bool all_finite() const;
    double max_abs() const;

    ScalarField& operator+=(const ScalarField& o);
    ScalarField& operator-=(const ScalarField& o);
    ScalarField& operator*=(double a);

private:
    SpaceTimeGrid grid_ = SpaceTimeGrid::interval(1.0, 1.0, 3, 3);
    std::vector<double> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double a, ScalarField f);
// Pointwise product.
ScalarField hadamard(const ScalarField& a, const ScalarField& b);
SpatialField operator+(SpatialField a, const SpatialField& b);
SpatialField operator-(SpatialField a, const SpatialField& b);
SpatialField operator*(double a, SpatialField f);

// Throws ContractViolation unless both live on the same grid.
void require_same_grid(const SpaceTimeGrid& a, const SpaceTimeGrid& b, const char* where);

// Restriction of a field on grid.refined() to the coarse nodes of grid.
ScalarField restrict_to(const SpaceTimeGrid& coarse, const ScalarField& fine);

}  // namespace cmfg
