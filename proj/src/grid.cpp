#include "cmfg/grid.hpp"

#include <cmath>
#include <sstream>

#include "cmfg/errors.hpp"

namespace cmfg {

SpaceTimeGrid::SpaceTimeGrid(int dim, std::array<double, 2> len, double T, std::array<int, 2> n, int nt)
    : dim_(dim), len_(len), T_(T), n_(n), nt_(nt) {
    for (int a = 0; a < dim_; ++a) {
        if (!(len_[a] > 0.0) || !std::isfinite(len_[a]))
            throw ContractViolation("grid: side lengths must be positive");
        if (n_[a] < 3) throw ContractViolation("grid: need at least 3 nodes per spatial axis");
        h_[a] = len_[a] / (n_[a] - 1);
    }
    if (!(T_ > 0.0) || !std::isfinite(T_)) throw ContractViolation("grid: final time must be positive");
    if (nt_ < 3) throw ContractViolation("grid: need at least 3 time levels");
    tau_ = T_ / (nt_ - 1);
}

SpaceTimeGrid SpaceTimeGrid::interval(double length, double final_time, int nx, int nt) {
    return SpaceTimeGrid(1, {length, 1.0}, final_time, {nx, 1}, nt);
}

SpaceTimeGrid SpaceTimeGrid::rectangle(double lx, double ly, double final_time, int nx, int ny, int nt) {
    return SpaceTimeGrid(2, {lx, ly}, final_time, {nx, ny}, nt);
}

int SpaceTimeGrid::level_of(double t) const {
    const double r = t / tau_;
    const long k = std::lround(r);
    if (std::abs(r - static_cast<double>(k)) > 1e-9 || k < 0 || k >= nt_) {
        std::ostringstream os;
        os << "time " << t << " is not a grid level (tau = " << tau_ << ")";
        throw ContractViolation(os.str());
    }
    return static_cast<int>(k);
}

SpaceTimeGrid SpaceTimeGrid::refined() const {
    std::array<int, 2> n = n_;
    for (int a = 0; a < dim_; ++a) n[a] = 2 * n_[a] - 1;
    return SpaceTimeGrid(dim_, len_, T_, n, 2 * nt_ - 1);
}

std::string SpaceTimeGrid::describe() const {
    std::ostringstream os;
    os << dim_ << "D ";
    if (dim_ == 1)
        os << "L=" << len_[0] << " nx=" << n_[0];
    else
        os << "L=" << len_[0] << "x" << len_[1] << " n=" << n_[0] << "x" << n_[1];
    os << " T=" << T_ << " nt=" << nt_;
    return os.str();
}

SubdomainMask::SubdomainMask(const SpaceTimeGrid& grid, std::array<double, 2> lo, std::array<double, 2> hi,
                             bool allow_boundary_contact)
    : grid_(grid), lo_(lo), hi_(hi), allow_boundary_(allow_boundary_contact) {
    for (int a = 0; a < grid.dim(); ++a) {
        const double L = grid.length(a);
        if (!(lo[a] < hi[a])) throw ContractViolation("subdomain: empty box");
        if (allow_boundary_contact) {
            if (lo[a] < 0.0 || hi[a] > L) throw ContractViolation("subdomain: box leaves Omega");
        } else if (!(lo[a] > 0.0 && hi[a] < L)) {
            throw ContractViolation("subdomain: box must lie strictly inside Omega");
        }
        const double h = grid.step(a);
        first_[a] = static_cast<int>(std::ceil(lo[a] / h - 1e-9));
        last_[a] = static_cast<int>(std::floor(hi[a] / h + 1e-9));
        if (last_[a] - first_[a] < 1)
            throw ContractViolation("subdomain: box covers fewer than two nodes along an axis");
    }
    if (grid.dim() == 1) {
        first_[1] = 0;
        last_[1] = 0;
    }
}

bool SubdomainMask::contains(int i, int j) const {
    return i >= first_[0] && i <= last_[0] && j >= first_[1] && j <= last_[1];
}

bool SubdomainMask::contains_point(double x, double y) const {
    if (x < lo_[0] || x > hi_[0]) return false;
    if (grid_.dim() == 2 && (y < lo_[1] || y > hi_[1])) return false;
    return true;
}

std::size_t SubdomainMask::count() const {
    return static_cast<std::size_t>(last_[0] - first_[0] + 1) * (last_[1] - first_[1] + 1);
}

std::vector<bool> SubdomainMask::indicator() const {
    std::vector<bool> ind(grid_.space_size(), false);
    for (int j = 0; j < grid_.ny(); ++j)
        for (int i = 0; i < grid_.nx(); ++i) ind[grid_.node(i, j)] = contains(i, j);
    return ind;
}

SubdomainMask SubdomainMask::on(const SpaceTimeGrid& other) const {
    return SubdomainMask(other, lo_, hi_, allow_boundary_);
}

}  // namespace cmfg
