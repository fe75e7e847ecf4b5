#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cmfg {

// Uniform tensor grid on Omega x [0,T], Omega = (0,Lx) or (0,Lx) x (0,Ly).
// Node counts include the boundary nodes; x_i = i*h, t_k = k*tau.
class SpaceTimeGrid {
public:
    static SpaceTimeGrid interval(double length, double final_time, int nx, int nt);
    static SpaceTimeGrid rectangle(double lx, double ly, double final_time, int nx, int ny, int nt);

    int dim() const { return dim_; }
    int nx() const { return n_[0]; }
    int ny() const { return n_[1]; }
    int nodes(int axis) const { return n_[axis]; }
    int nt() const { return nt_; }
    double length(int axis) const { return len_[axis]; }
    double step(int axis) const { return h_[axis]; }
    double h() const { return h_[0]; }
    double tau() const { return tau_; }
    double final_time() const { return T_; }

    std::size_t space_size() const { return static_cast<std::size_t>(n_[0]) * n_[1]; }
    std::size_t size() const { return space_size() * nt_; }

    std::size_t node(int i, int j = 0) const { return static_cast<std::size_t>(i) + static_cast<std::size_t>(n_[0]) * j; }
    double coord(int axis, int i) const { return i * h_[axis]; }
    double t(int k) const { return k * tau_; }

    // Time level whose coordinate equals t (to 1e-9 tau); throws ContractViolation otherwise.
    int level_of(double t) const;

    // Same geometry with every spatial step and the time step halved.
    SpaceTimeGrid refined() const;

    bool operator==(const SpaceTimeGrid& other) const = default;

    std::string describe() const;

private:
    SpaceTimeGrid(int dim, std::array<double, 2> len, double T, std::array<int, 2> n, int nt);

    int dim_ = 1;
    std::array<double, 2> len_{1.0, 1.0};
    double T_ = 1.0;
    std::array<int, 2> n_{3, 1};
    int nt_ = 3;
    std::array<double, 2> h_{0.5, 1.0};
    double tau_ = 0.5;
};

// Axis-aligned box omega inside Omega. Node membership is the closed box;
// quadrature over omega uses the trapezoid rule on the covered index range.
class SubdomainMask {
public:
    SubdomainMask(const SpaceTimeGrid& grid, std::array<double, 2> lo, std::array<double, 2> hi,
                  bool allow_boundary_contact = false);

    const SpaceTimeGrid& grid() const { return grid_; }
    std::array<double, 2> lo() const { return lo_; }
    std::array<double, 2> hi() const { return hi_; }
    int first(int axis) const { return first_[axis]; }
    int last(int axis) const { return last_[axis]; }

    bool contains(int i, int j = 0) const;
    bool contains_point(double x, double y = 0.0) const;
    std::size_t count() const;
    std::vector<bool> indicator() const;

    // The same box on another grid with identical geometry.
    SubdomainMask on(const SpaceTimeGrid& other) const;

private:
    SpaceTimeGrid grid_;
    std::array<double, 2> lo_;
    std::array<double, 2> hi_;
    std::array<int, 2> first_{0, 0};
    std::array<int, 2> last_{0, 0};
    bool allow_boundary_;
};

}  // namespace cmfg
