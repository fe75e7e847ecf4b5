#include "cmfg/quadrature.hpp"

#include <cmath>

#include "cmfg/errors.hpp"
#include "cmfg/operators.hpp"

namespace cmfg {
namespace {

// Trapezoid weight of node i on the index range [first, last].
inline double trap(int i, int first, int last, double h) {
    if (i < first || i > last) return 0.0;
    return (i == first || i == last) ? 0.5 * h : h;
}

std::vector<double> space_weights(const SpaceTimeGrid& g, const SubdomainMask* mask) {
    std::array<int, 2> first{0, 0};
    std::array<int, 2> last{g.nx() - 1, g.ny() - 1};
    if (mask) {
        require_same_grid(g, mask->grid(), "quadrature mask");
        for (int a = 0; a < g.dim(); ++a) {
            first[a] = mask->first(a);
            last[a] = mask->last(a);
        }
    }
    std::vector<double> w(g.space_size(), 0.0);
    for (int j = 0; j < g.ny(); ++j) {
        const double wy = g.dim() == 2 ? trap(j, first[1], last[1], g.step(1)) : 1.0;
        if (wy == 0.0) continue;
        for (int i = 0; i < g.nx(); ++i) w[g.node(i, j)] = wy * trap(i, first[0], last[0], g.step(0));
    }
    return w;
}

}  // namespace

std::vector<double> time_weights(const SpaceTimeGrid& g, double t_lo, double t_hi) {
    if (!(t_lo < t_hi)) throw ContractViolation("time window is empty");
    const double slack = 1e-9 * g.tau();
    int first = -1, last = -1;
    for (int k = 0; k < g.nt(); ++k) {
        const double t = g.t(k);
        if (t >= t_lo - slack && t <= t_hi + slack) {
            if (first < 0) first = k;
            last = k;
        }
    }
    if (first < 0 || last - first < 1) throw ContractViolation("time window holds fewer than two time levels");
    std::vector<double> w(g.nt(), 0.0);
    for (int k = first; k <= last; ++k) w[k] = trap(k, first, last, g.tau());
    return w;
}

double integrate_space(std::span<const double> level, const SpaceTimeGrid& grid, const SubdomainMask* mask) {
    if (level.size() != grid.space_size()) throw ContractViolation("integrate_space: shape mismatch");
    const auto w = space_weights(grid, mask);
    double s = 0.0;
    for (std::size_t p = 0; p < w.size(); ++p) s += w[p] * level[p];
    return s;
}

double integrate_space(const SpatialField& f, const SubdomainMask* mask) {
    return integrate_space(f.values(), f.grid(), mask);
}

double integrate_Q(const ScalarField& f, double t_lo, double t_hi, const SubdomainMask* mask) {
    const auto& g = f.grid();
    const auto wt = time_weights(g, t_lo, t_hi);
    const auto ws = space_weights(g, mask);
    double total = 0.0;
    for (int k = 0; k < g.nt(); ++k) {
        if (wt[k] == 0.0) continue;
        auto lv = f.level(k);
        double s = 0.0;
        for (std::size_t p = 0; p < ws.size(); ++p) s += ws[p] * lv[p];
        total += wt[k] * s;
    }
    return total;
}

double integrate_Q(const ScalarField& f, const SubdomainMask* mask) {
    return integrate_Q(f, 0.0, f.grid().final_time(), mask);
}

double h21_norm(const ScalarField& u, double t_lo, double t_hi, const SubdomainMask* mask) {
    ScalarField density = hadamard(u, u);
    density += grad_squared(u);
    density += hessian_squared(u);
    const ScalarField ut = time_derivative(u);
    density += hadamard(ut, ut);
    return std::sqrt(integrate_Q(density, t_lo, t_hi, mask));
}

double h21_norm(const ScalarField& u) { return h21_norm(u, 0.0, u.grid().final_time()); }

double l2_norm(const ScalarField& u, double t_lo, double t_hi, const SubdomainMask* mask) {
    return std::sqrt(integrate_Q(hadamard(u, u), t_lo, t_hi, mask));
}

double spatial_norm(const SpatialField& u, SpaceNorm kind) {
    SpatialField density(u.grid());
    for (std::size_t p = 0; p < u.size(); ++p) density[p] = u[p] * u[p];
    if (kind == SpaceNorm::H1) density += grad_squared(u);
    return std::sqrt(integrate_space(density));
}

double spatial_norm_at(const ScalarField& u, double t, SpaceNorm kind) {
    return spatial_norm(u.slice(u.grid().level_of(t)), kind);
}

}  // namespace cmfg
