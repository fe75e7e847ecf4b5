#include "cmfg/operators.hpp"

#include "cmfg/errors.hpp"

namespace cmfg {
namespace {

struct AxisWalk {
    int n;
    std::size_t stride;
    double h;
};

AxisWalk walk(const SpaceTimeGrid& g, int axis) {
    return {g.nodes(axis), axis == 0 ? std::size_t{1} : static_cast<std::size_t>(g.nx()), g.step(axis)};
}

// Neighbour values along an axis with the ghost node reflected: f(-1) = f(1), f(n) = f(n-2).
inline void neighbours(std::span<const double> f, std::size_t p, int i, const AxisWalk& w, double& left,
                       double& right) {
    left = i > 0 ? f[p - w.stride] : f[p + w.stride];
    right = i < w.n - 1 ? f[p + w.stride] : f[p - w.stride];
}

inline int axis_index(const SpaceTimeGrid& g, std::size_t p, int axis) {
    return axis == 0 ? static_cast<int>(p % g.nx()) : static_cast<int>(p / g.nx());
}

void second_along(std::span<const double> f, const SpaceTimeGrid& g, int axis, std::span<double> out, bool accumulate) {
    const AxisWalk w = walk(g, axis);
    const double inv_h2 = 1.0 / (w.h * w.h);
    for (std::size_t p = 0; p < f.size(); ++p) {
        double l, r;
        neighbours(f, p, axis_index(g, p, axis), w, l, r);
        const double v = (l - 2.0 * f[p] + r) * inv_h2;
        out[p] = accumulate ? out[p] + v : v;
    }
}

void first_along(std::span<const double> f, const SpaceTimeGrid& g, int axis, std::span<double> out) {
    const AxisWalk w = walk(g, axis);
    const double inv_2h = 0.5 / w.h;
    for (std::size_t p = 0; p < f.size(); ++p) {
        double l, r;
        neighbours(f, p, axis_index(g, p, axis), w, l, r);
        out[p] = (r - l) * inv_2h;
    }
}

template <class Level>
void for_each_level(const ScalarField& f, ScalarField& out, Level&& op) {
    for (int k = 0; k < f.grid().nt(); ++k) op(f.level(k), out.level(k));
}

}  // namespace

SpatialField laplacian_neumann(const SpatialField& f) {
    SpatialField out(f.grid());
    for (int a = 0; a < f.grid().dim(); ++a) second_along(f.values(), f.grid(), a, out.values(), a > 0);
    return out;
}

ScalarField laplacian_neumann(const ScalarField& f) {
    ScalarField out(f.grid());
    const auto& g = f.grid();
    for_each_level(f, out, [&](std::span<const double> in, std::span<double> o) {
        for (int a = 0; a < g.dim(); ++a) second_along(in, g, a, o, a > 0);
    });
    return out;
}

std::vector<SpatialField> gradient_neumann(const SpatialField& f) {
    std::vector<SpatialField> out;
    for (int a = 0; a < f.grid().dim(); ++a) {
        SpatialField d(f.grid());
        first_along(f.values(), f.grid(), a, d.values());
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<ScalarField> gradient_neumann(const ScalarField& f) {
    std::vector<ScalarField> out;
    const auto& g = f.grid();
    for (int a = 0; a < g.dim(); ++a) {
        ScalarField d(g);
        for_each_level(f, d, [&](std::span<const double> in, std::span<double> o) { first_along(in, g, a, o); });
        out.push_back(std::move(d));
    }
    return out;
}

SpatialField second_derivative(const SpatialField& f, int a, int b) {
    const auto& g = f.grid();
    if (a < 0 || b < 0 || a >= g.dim() || b >= g.dim()) throw ContractViolation("second_derivative: bad axis");
    SpatialField out(g);
    if (a == b) {
        second_along(f.values(), g, a, out.values(), false);
    } else {
        std::vector<double> tmp(g.space_size());
        first_along(f.values(), g, a, tmp);
        first_along(tmp, g, b, out.values());
    }
    return out;
}

ScalarField second_derivative(const ScalarField& f, int a, int b) {
    const auto& g = f.grid();
    if (a < 0 || b < 0 || a >= g.dim() || b >= g.dim()) throw ContractViolation("second_derivative: bad axis");
    ScalarField out(g);
    std::vector<double> tmp(g.space_size());
    for_each_level(f, out, [&](std::span<const double> in, std::span<double> o) {
        if (a == b) {
            second_along(in, g, a, o, false);
        } else {
            first_along(in, g, a, tmp);
            first_along(tmp, g, b, o);
        }
    });
    return out;
}

ScalarField time_derivative(const ScalarField& f) {
    const auto& g = f.grid();
    ScalarField out(g);
    const int N = g.nt() - 1;
    const double inv_tau = 1.0 / g.tau();
    const double inv_2tau = 0.5 / g.tau();
    for (std::size_t p = 0; p < g.space_size(); ++p) {
        out(p, 0) = (f(p, 1) - f(p, 0)) * inv_tau;
        for (int k = 1; k < N; ++k) out(p, k) = (f(p, k + 1) - f(p, k - 1)) * inv_2tau;
        out(p, N) = (f(p, N) - f(p, N - 1)) * inv_tau;
    }
    return out;
}

ScalarField grad_squared(const ScalarField& f) {
    ScalarField out(f.grid());
    for (const auto& d : gradient_neumann(f)) out += hadamard(d, d);
    return out;
}

SpatialField grad_squared(const SpatialField& f) {
    SpatialField out(f.grid());
    for (const auto& d : gradient_neumann(f))
        for (std::size_t p = 0; p < out.size(); ++p) out[p] += d[p] * d[p];
    return out;
}

ScalarField hessian_squared(const ScalarField& f) {
    const int d = f.grid().dim();
    ScalarField out(f.grid());
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            ScalarField dab = second_derivative(f, a, b);
            ScalarField sq = hadamard(dab, dab);
            if (a != b) sq *= 2.0;
            out += sq;
        }
    return out;
}

}  // namespace cmfg
