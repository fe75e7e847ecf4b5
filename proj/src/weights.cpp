#include "cmfg/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cmfg/errors.hpp"

namespace cmfg {

void TimeWeightSpec::validate() const {
    if (!(lambda > 0.0)) throw DomainError("time weight: lambda must be positive");
    if (!(s > 0.0)) throw DomainError("time weight: s must be positive");
    if (!(T > 0.0)) throw DomainError("time weight: T must be positive");
}

double TimeWeightSpec::ref() const {
    if (normalization_ref) return *normalization_ref;
    return direction == TimeDirection::Increasing ? std::exp(lambda * T) : 1.0;
}

double phi_t(const TimeWeightSpec& spec, double t) {
    const double sign = spec.direction == TimeDirection::Increasing ? 1.0 : -1.0;
    return std::exp(sign * spec.lambda * t);
}

double norm_weight(const TimeWeightSpec& spec, double t) { return norm_exp(spec, phi_t(spec, t)); }

double norm_exp(const TimeWeightSpec& spec, double c) { return std::exp(2.0 * spec.s * (c - spec.ref())); }

double mu0(double lambda, double eps) {
    if (!(lambda > 0.0) || !(eps > 0.0)) throw DomainError("mu0: lambda and eps must be positive");
    return std::expm1(lambda * eps);
}

double theta_exponent(double c1, double mu0) {
    if (!(c1 > 0.0) || !(mu0 > 0.0)) throw DomainError("theta: C1 and mu0 must be positive");
    return 2.0 * mu0 / (c1 + 2.0 * mu0);
}

double s_star(double c1, double mu0, double M, double D) {
    if (!(c1 > 0.0) || !(mu0 > 0.0)) throw DomainError("s_star: C1 and mu0 must be positive");
    if (!(D > 0.0) || !(D < M)) throw DomainError("s_star: requires 0 < D < M");
    return 2.0 / (c1 + 2.0 * mu0) * std::log(M / D);
}

double EtaAxis::value(double x) const { return x * (length - x) * std::exp(beta * x); }

double EtaAxis::derivative(double x) const {
    return std::exp(beta * x) * ((length - 2.0 * x) + beta * x * (length - x));
}

double EtaAxis::second_derivative(double x) const {
    const double p = x * (length - x);
    const double dp = length - 2.0 * x;
    return std::exp(beta * x) * (-2.0 + 2.0 * beta * dp + beta * beta * p);
}

EtaFunction::EtaFunction(int dim, std::array<EtaAxis, 2> axes, std::array<double, 2> omega_lo,
                         std::array<double, 2> omega_hi)
    : dim_(dim), axes_(axes), lo_(omega_lo), hi_(omega_hi) {}

double EtaFunction::value(double x, double y) const {
    double v = axes_[0].value(x);
    if (dim_ == 2) v *= axes_[1].value(y);
    return v;
}

std::array<double, 2> EtaFunction::gradient(double x, double y) const {
    if (dim_ == 1) return {axes_[0].derivative(x), 0.0};
    return {axes_[0].derivative(x) * axes_[1].value(y), axes_[0].value(x) * axes_[1].derivative(y)};
}

double EtaFunction::sup_norm() const {
    double v = axes_[0].value(axes_[0].center);
    if (dim_ == 2) v *= axes_[1].value(axes_[1].center);
    return v;
}

EtaFunction build_eta(const SpaceTimeGrid& grid, const SubdomainMask& omega, int oversample) {
    std::array<EtaAxis, 2> axes{};
    for (int a = 0; a < grid.dim(); ++a) {
        const double L = grid.length(a);
        const double lo = omega.lo()[a], hi = omega.hi()[a];
        if (!(lo > 0.0 && hi < L && lo < hi)) throw DomainError("build_eta: omega must lie strictly inside Omega");
        const double c = 0.5 * (lo + hi);
        axes[a] = EtaAxis{L, c, (2.0 * c - L) / (c * (L - c))};
    }
    EtaFunction eta(grid.dim(), axes, omega.lo(), omega.hi());

    const int mx = (grid.nx() - 1) * oversample + 1;
    const int my = grid.dim() == 2 ? (grid.ny() - 1) * oversample + 1 : 1;
    const double hx = grid.length(0) / (mx - 1);
    const double hy = grid.dim() == 2 ? grid.length(1) / (my - 1) : 0.0;
    const double scale = eta.sup_norm() / std::min(grid.length(0), grid.dim() == 2 ? grid.length(1) : grid.length(0));
    const double zero_tol = 1e-14 * std::max(1.0, scale);

    auto fail = [](const std::string& why, double x, double y) -> ConstructionError {
        std::ostringstream os;
        os << "build_eta: " << why << " at (" << x << ", " << y << ")";
        return ConstructionError(os.str(), {x, y});
    };

    for (int j = 0; j < my; ++j) {
        const bool y_edge = grid.dim() == 2 && (j == 0 || j == my - 1);
        const double y = j * hy;
        for (int i = 0; i < mx; ++i) {
            const bool x_edge = i == 0 || i == mx - 1;
            const double x = i * hx;
            const double v = eta.value(x, y);
            const bool on_boundary = x_edge || y_edge;
            if (on_boundary) {
                if (std::abs(v) > zero_tol) throw fail("eta does not vanish on the boundary", x, y);
            } else if (!(v > 0.0)) {
                throw fail("eta is not positive inside Omega", x, y);
            }
            if (x_edge && y_edge) continue;  // rectangle corner
            const bool in_omega = x > eta.omega_lo()[0] && x < eta.omega_hi()[0] &&
                                  (grid.dim() == 1 || (y > eta.omega_lo()[1] && y < eta.omega_hi()[1]));
            if (in_omega) continue;
            const auto g = eta.gradient(x, y);
            if (!(std::hypot(g[0], g[1]) > zero_tol)) throw fail("grad eta vanishes outside omega", x, y);
        }
    }
    return eta;
}

void SpaceTimeWeightSpec::validate() const {
    if (!(s > 0.0)) throw DomainError("space-time weight: s must be positive");
    if (!(lambda > 0.0)) throw DomainError("space-time weight: lambda must be positive");
    if (!(T > 0.0)) throw DomainError("space-time weight: T must be positive");
}

AlphaVarphi alpha_varphi(const SpaceTimeWeightSpec& spec, double x, double y, double t) {
    if (!(t > 0.0 && t < spec.T)) throw DomainError("alpha_varphi: t must lie in (0, T)");
    // t (T - t) is symmetric under t -> T - t only if evaluated symmetrically.
    const double tt = std::min(t, spec.T - t) * std::max(t, spec.T - t);
    const double e = std::exp(spec.lambda * spec.eta.value(x, y));
    const double top = std::exp(2.0 * spec.lambda * spec.eta.sup_norm());
    return {(e - top) / tt, e / tt};
}

double alpha_floor_constant(const SpaceTimeWeightSpec& spec, double eps) {
    if (!(eps > 0.0 && eps < 0.5 * spec.T)) throw DomainError("alpha floor: eps must lie in (0, T/2)");
    return std::expm1(2.0 * spec.lambda * spec.eta.sup_norm()) / (eps * (spec.T - eps));
}

SpaceTimeWeightFields space_time_weight_fields(const SpaceTimeWeightSpec& spec, const SpaceTimeGrid& grid) {
    SpaceTimeWeightFields out{ScalarField(grid), ScalarField(grid)};
    const double ref = spec.normalization_ref.value_or(0.0);
    const int N = grid.nt() - 1;
    for (int k = 1; k < N; ++k) {
        // Mirror levels share the value of t(T-t) exactly.
        const int km = std::min(k, N - k);
        const double t = grid.t(km);
        for (int j = 0; j < grid.ny(); ++j)
            for (int i = 0; i < grid.nx(); ++i) {
                const double y = grid.dim() == 2 ? grid.coord(1, j) : 0.0;
                const auto av = alpha_varphi(spec, grid.coord(0, i), y, t);
                out.varphi.at(i, j, k) = av.varphi;
                out.weight.at(i, j, k) = std::exp(2.0 * spec.s * (av.alpha - ref));
            }
    }
    return out;
}

double alpha_max(const SpaceTimeWeightSpec& spec, const SpaceTimeGrid& grid) {
    // alpha < 0 increases with eta and peaks at t = T/2 in time.
    const int N = grid.nt() - 1;
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 1; k < N; ++k) {
        const double t = grid.t(std::min(k, N - k));
        for (int j = 0; j < grid.ny(); ++j)
            for (int i = 0; i < grid.nx(); ++i) {
                const double y = grid.dim() == 2 ? grid.coord(1, j) : 0.0;
                best = std::max(best, alpha_varphi(spec, grid.coord(0, i), y, t).alpha);
            }
    }
    return best;
}

TimeWeightLevels time_weight_levels(const TimeWeightSpec& spec, const SpaceTimeGrid& grid) {
    TimeWeightLevels out;
    for (int k = 0; k < grid.nt(); ++k) {
        const double phi = phi_t(spec, grid.t(k));
        out.phi.push_back(phi);
        out.weight.push_back(norm_exp(spec, phi));
    }
    return out;
}

}  // namespace cmfg
