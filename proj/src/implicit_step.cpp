#include "cmfg/implicit_step.hpp"

#include <cmath>

#include "cmfg/errors.hpp"

namespace cmfg {

void solve_tridiagonal(std::span<const double> sub, std::span<const double> diag, std::span<const double> sup,
                       std::span<const double> rhs, std::span<double> x) {
    const std::size_t n = diag.size();
    if (sub.size() != n || sup.size() != n || rhs.size() != n || x.size() != n)
        throw ContractViolation("tridiagonal: size mismatch");
    std::vector<double> c(n), d(n);
    double den = diag[0];
    if (den == 0.0) throw ContractViolation("tridiagonal: zero pivot");
    c[0] = sup[0] / den;
    d[0] = rhs[0] / den;
    for (std::size_t i = 1; i < n; ++i) {
        den = diag[i] - sub[i] * c[i - 1];
        if (den == 0.0) throw ContractViolation("tridiagonal: zero pivot");
        c[i] = i + 1 < n ? sup[i] / den : 0.0;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / den;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
}

namespace {

void apply_2d(const SpaceTimeGrid& g, double tau, std::span<const double> shift, std::span<const double> w,
              std::span<double> out) {
    const int nx = g.nx(), ny = g.ny();
    const double cx = tau / (g.step(0) * g.step(0));
    const double cy = tau / (g.step(1) * g.step(1));
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const std::size_t p = g.node(i, j);
            const double l = i > 0 ? w[p - 1] : w[p + 1];
            const double r = i < nx - 1 ? w[p + 1] : w[p - 1];
            const double d = j > 0 ? w[p - nx] : w[p + nx];
            const double u = j < ny - 1 ? w[p + nx] : w[p - nx];
            out[p] = (1.0 + tau * shift[p]) * w[p] - cx * (l - 2.0 * w[p] + r) - cy * (d - 2.0 * w[p] + u);
        }
}

std::vector<double> trapezoid_mass(const SpaceTimeGrid& g) {
    std::vector<double> m(g.space_size());
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
            const double wx = (i == 0 || i == g.nx() - 1) ? 0.5 : 1.0;
            const double wy = (j == 0 || j == g.ny() - 1) ? 0.5 : 1.0;
            m[g.node(i, j)] = wx * wy;
        }
    return m;
}

}  // namespace

int implicit_neumann_step(const SpaceTimeGrid& g, double tau, std::span<const double> shift,
                          std::span<const double> rhs, std::span<double> w, double cg_tol) {
    const std::size_t n = g.space_size();
    if (shift.size() != n || rhs.size() != n || w.size() != n) throw ContractViolation("implicit step: size mismatch");

    if (g.dim() == 1) {
        const double c = tau / (g.h() * g.h());
        std::vector<double> sub(n, -c), diag(n), sup(n, -c);
        for (std::size_t i = 0; i < n; ++i) diag[i] = 1.0 + 2.0 * c + tau * shift[i];
        sup[0] = -2.0 * c;
        sub[n - 1] = -2.0 * c;
        solve_tridiagonal(sub, diag, sup, rhs, w);
        return 0;
    }

    // Conjugate gradient in <a, b> = sum m_p a_p b_p; warm start from w.
    const auto m = trapezoid_mass(g);
    auto dot = [&](std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (std::size_t p = 0; p < n; ++p) s += m[p] * a[p] * b[p];
        return s;
    };
    std::vector<double> r(n), p(n), Ap(n);
    apply_2d(g, tau, shift, w, Ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - Ap[i];
    p = r;
    double rr = dot(r, r);
    const double stop = cg_tol * cg_tol * std::max(dot(rhs, rhs), 1e-300);
    int it = 0;
    const int max_it = 10 * static_cast<int>(n) + 100;
    while (rr > stop && it < max_it) {
        apply_2d(g, tau, shift, p, Ap);
        const double alpha = rr / dot(p, Ap);
        for (std::size_t i = 0; i < n; ++i) {
            w[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        const double rr_new = dot(r, r);
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
        ++it;
    }
    if (rr > stop) throw StagnationError("implicit step: CG did not converge", {std::sqrt(rr)});
    return it;
}

}  // namespace cmfg
