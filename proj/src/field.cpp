#include "cmfg/field.hpp"

#include <algorithm>
#include <cmath>

#include "cmfg/errors.hpp"

namespace cmfg {

void require_same_grid(const SpaceTimeGrid& a, const SpaceTimeGrid& b, const char* where) {
    if (!(a == b)) throw ContractViolation(std::string(where) + ": fields live on different grids");
}

SpatialField::SpatialField(const SpaceTimeGrid& grid, double fill) : grid_(grid), values_(grid.space_size(), fill) {}

SpatialField::SpatialField(const SpaceTimeGrid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.space_size()) throw ContractViolation("spatial field: shape mismatch");
}

SpatialField SpatialField::sample(const SpaceTimeGrid& grid, const std::function<double(double, double)>& f) {
    SpatialField out(grid);
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i)
            out.at(i, j) = f(grid.coord(0, i), grid.dim() == 2 ? grid.coord(1, j) : 0.0);
    return out;
}

double SpatialField::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

SpatialField& SpatialField::operator+=(const SpatialField& o) {
    require_same_grid(grid_, o.grid_, "SpatialField +=");
    for (std::size_t p = 0; p < values_.size(); ++p) values_[p] += o.values_[p];
    return *this;
}

SpatialField& SpatialField::operator-=(const SpatialField& o) {
    require_same_grid(grid_, o.grid_, "SpatialField -=");
    for (std::size_t p = 0; p < values_.size(); ++p) values_[p] -= o.values_[p];
    return *this;
}

SpatialField& SpatialField::operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
}

ScalarField::ScalarField(const SpaceTimeGrid& grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

ScalarField::ScalarField(const SpaceTimeGrid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw ContractViolation("scalar field: shape mismatch");
}

ScalarField ScalarField::sample(const SpaceTimeGrid& grid,
                                const std::function<double(double, double, double)>& f) {
    ScalarField out(grid);
    for (int k = 0; k < grid.nt(); ++k)
        for (int j = 0; j < grid.ny(); ++j)
            for (int i = 0; i < grid.nx(); ++i)
                out.at(i, j, k) = f(grid.coord(0, i), grid.dim() == 2 ? grid.coord(1, j) : 0.0, grid.t(k));
    return out;
}

std::span<const double> ScalarField::level(int k) const {
    return std::span<const double>(values_).subspan(k * grid_.space_size(), grid_.space_size());
}

std::span<double> ScalarField::level(int k) {
    return std::span<double>(values_).subspan(k * grid_.space_size(), grid_.space_size());
}

SpatialField ScalarField::slice(int k) const {
    if (k < 0 || k >= grid_.nt()) throw ContractViolation("slice: time level out of range");
    auto lv = level(k);
    return SpatialField(grid_, std::vector<double>(lv.begin(), lv.end()));
}

void ScalarField::set_slice(int k, const SpatialField& f) {
    require_same_grid(grid_, f.grid(), "set_slice");
    std::copy(f.values().begin(), f.values().end(), level(k).begin());
}

bool ScalarField::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double ScalarField::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
    require_same_grid(grid_, o.grid_, "ScalarField +=");
    for (std::size_t p = 0; p < values_.size(); ++p) values_[p] += o.values_[p];
    return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
    require_same_grid(grid_, o.grid_, "ScalarField -=");
    for (std::size_t p = 0; p < values_.size(); ++p) values_[p] -= o.values_[p];
    return *this;
}

ScalarField& ScalarField::operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double a, ScalarField f) { return f *= a; }
SpatialField operator+(SpatialField a, const SpatialField& b) { return a += b; }
SpatialField operator-(SpatialField a, const SpatialField& b) { return a -= b; }
SpatialField operator*(double a, SpatialField f) { return f *= a; }

ScalarField hadamard(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a.grid(), b.grid(), "hadamard");
    ScalarField out(a.grid());
    auto x = a.values();
    auto y = b.values();
    auto z = out.values();
    for (std::size_t p = 0; p < z.size(); ++p) z[p] = x[p] * y[p];
    return out;
}

ScalarField restrict_to(const SpaceTimeGrid& coarse, const ScalarField& fine) {
    require_same_grid(coarse.refined(), fine.grid(), "restrict_to");
    ScalarField out(coarse);
    const int sj = coarse.dim() == 2 ? 2 : 1;
    for (int k = 0; k < coarse.nt(); ++k)
        for (int j = 0; j < coarse.ny(); ++j)
            for (int i = 0; i < coarse.nx(); ++i) out.at(i, j, k) = fine.at(2 * i, sj * j, 2 * k);
    return out;
}

}  // namespace cmfg
