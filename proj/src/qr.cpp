#include "cmfg/qr.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <sstream>

#include "cmfg/errors.hpp"
#include "cmfg/operators.hpp"
#include "cmfg/quadrature.hpp"

namespace cmfg {
namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

struct Entry {
    std::size_t col;
    double val;
};
using Stencil = std::vector<std::vector<Entry>>;  // one row per spatial node

// Same reflected stencils as laplacian_neumann and gradient_neumann.
void neighbours(const SpaceTimeGrid& g, std::size_t p, int axis, std::size_t& left, std::size_t& right) {
    const int n = g.nodes(axis);
    const std::size_t stride = axis == 0 ? 1 : static_cast<std::size_t>(g.nx());
    const int i = axis == 0 ? static_cast<int>(p % g.nx()) : static_cast<int>(p / g.nx());
    left = i > 0 ? p - stride : p + stride;
    right = i < n - 1 ? p + stride : p - stride;
}

Stencil laplacian_stencil(const SpaceTimeGrid& g) {
    Stencil s(g.space_size());
    for (std::size_t p = 0; p < s.size(); ++p)
        for (int a = 0; a < g.dim(); ++a) {
            std::size_t l, r;
            neighbours(g, p, a, l, r);
            const double c = 1.0 / (g.step(a) * g.step(a));
            s[p].push_back({l, c});
            s[p].push_back({p, -2.0 * c});
            s[p].push_back({r, c});
        }
    return s;
}

Stencil gradient_stencil(const SpaceTimeGrid& g, int a) {
    Stencil s(g.space_size());
    for (std::size_t p = 0; p < s.size(); ++p) {
        std::size_t l, r;
        neighbours(g, p, a, l, r);
        if (l == r) continue;  // reflected boundary: the central difference vanishes
        const double c = 0.5 / g.step(a);
        s[p].push_back({l, -c});
        s[p].push_back({r, c});
    }
    return s;
}

std::vector<double> trapezoid_space(const SpaceTimeGrid& g, const SubdomainMask* mask) {
    std::vector<double> w(g.space_size());
    SpatialField unit(g);
    for (std::size_t p = 0; p < w.size(); ++p) {
        // Product trapezoid weights, read back from the quadrature itself.
        unit[p] = 1.0;
        w[p] = integrate_space(unit, mask);
        unit[p] = 0.0;
    }
    return w;
}

SubdomainMask omega_mask(const QRProblem& pb, const SpaceTimeGrid& g) {
    const auto& b = *pb.omega;
    return SubdomainMask(g, {b[0], b[2]}, {b[1], b[3]});
}

// Eta for the space-time weight, centred on omega.
SpaceTimeWeightSpec interior_weight(const QRProblem& pb, const SpaceTimeGrid& g) {
    const auto mask = omega_mask(pb, g);
    SpaceTimeWeightSpec w{build_eta(g, mask), pb.s, pb.lambda, g.final_time(), {}};
    w.normalization_ref = alpha_max(w, g);
    return w;
}

struct Assembly {
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> rhs;
    int rows = 0;

    void row(const std::vector<Entry>& entries, double scale, double value) {
        for (const auto& e : entries) trip.emplace_back(rows, static_cast<int>(e.col), scale * e.val);
        rhs.push_back(scale * value);
        ++rows;
    }
};

}  // namespace

const char* to_string(ObservationKind kind) {
    switch (kind) {
        case ObservationKind::Terminal: return "terminal";
        case ObservationKind::Interior: return "interior";
        case ObservationKind::InteriorUOnly: return "interior_u_only";
    }
    return "?";
}

ObservationKind observation_kind_from_string(const std::string& name) {
    for (auto k : {ObservationKind::Terminal, ObservationKind::Interior, ObservationKind::InteriorUOnly})
        if (name == to_string(k)) return k;
    throw ContractViolation("unknown observation kind '" + name + "'");
}

void QRProblem::validate(const SpaceTimeGrid& grid) const {
    if (!(beta > 0.0)) throw ContractViolation("reconstruction: beta must be positive");
    if (!(s > 0.0) || !(lambda > 0.0)) throw ContractViolation("reconstruction: s and lambda must be positive");
    if (!(tolerance > 0.0) || max_iterations < 1 || proximal_steps < 1) throw ContractViolation("reconstruction: bad solver settings");
    if ((noise_level && !(*noise_level >= 0.0)) || !(discrepancy >= 1.0))
        throw ContractViolation("reconstruction: noise level must be nonnegative and discrepancy >= 1");
    if (kind != ObservationKind::Terminal) {
        if (!omega) throw ContractViolation("reconstruction: interior observation needs an omega box");
        omega_mask(*this, grid);  // throws when the box misses the grid
    }
}

Observation observe(const QRProblem& problem, const SolutionPair& truth) {
    const auto& g = truth.u.grid();
    problem.validate(g);
    Observation obs{ScalarField(g), ScalarField(g)};
    if (problem.kind == ObservationKind::Terminal) {
        const int N = g.nt() - 1;
        obs.u.set_slice(N, truth.u.slice(N));
        obs.v.set_slice(N, truth.v.slice(N));
        return obs;
    }
    const auto mask = omega_mask(problem, g);
    for (int k = 0; k < g.nt(); ++k)
        for (int j = 0; j < g.ny(); ++j)
            for (int i = 0; i < g.nx(); ++i) {
                if (!mask.contains(i, j)) continue;
                obs.u.at(i, j, k) = truth.u.at(i, j, k);
                if (problem.kind == ObservationKind::Interior) obs.v.at(i, j, k) = truth.v.at(i, j, k);
            }
    return obs;
}

double observation_norm(const QRProblem& problem, const Observation& obs) {
    const auto& g = obs.u.grid();
    if (problem.kind == ObservationKind::Terminal) {
        const int N = g.nt() - 1;
        return std::hypot(spatial_norm(obs.u.slice(N), SpaceNorm::L2), spatial_norm(obs.v.slice(N), SpaceNorm::L2));
    }
    const auto mask = omega_mask(problem, g);
    const double nu = l2_norm(obs.u, 0.0, g.final_time(), &mask);
    const double nv = problem.kind == ObservationKind::Interior ? l2_norm(obs.v, 0.0, g.final_time(), &mask) : 0.0;
    return std::hypot(nu, nv);
}

Observation add_noise(const QRProblem& problem, const Observation& clean, double delta, std::uint64_t seed) {
    if (!(delta >= 0.0)) throw ContractViolation("noise level must be nonnegative");
    const auto& g = clean.u.grid();
    Observation noise{ScalarField(g), ScalarField(g)};
    SeededUniform rng(seed);
    const int N = g.nt() - 1;
    std::optional<SubdomainMask> mask;
    if (problem.kind != ObservationKind::Terminal) mask = omega_mask(problem, g);
    const bool with_v = problem.kind != ObservationKind::InteriorUOnly;
    for (int k = 0; k <= N; ++k) {
        if (problem.kind == ObservationKind::Terminal && k != N) continue;
        for (int j = 0; j < g.ny(); ++j)
            for (int i = 0; i < g.nx(); ++i) {
                if (mask && !mask->contains(i, j)) continue;
                noise.u.at(i, j, k) = rng.in(-1.0, 1.0);
                if (with_v) noise.v.at(i, j, k) = rng.in(-1.0, 1.0);
            }
    }
    const double n = observation_norm(problem, noise);
    const double scale = n > 0.0 ? delta / n : 0.0;
    Observation out = clean;
    out.u += scale * noise.u;
    out.v += scale * noise.v;
    return out;
}

QRReport reconstruct_qr(const QRProblem& problem, const CoefficientSet& coeffs, const Observation& obs) {
    const auto& g = coeffs.grid();
    problem.validate(g);
    coeffs.validate();
    require_same_grid(g, obs.u.grid(), "reconstruct_qr observation");
    require_same_grid(g, obs.v.grid(), "reconstruct_qr observation");

    const std::size_t ns = g.space_size();
    const int nt = g.nt(), N = nt - 1;
    const std::size_t NU = ns * static_cast<std::size_t>(nt);
    const double tau = g.tau(), T = g.final_time();
    auto U = [&](int k, std::size_t p) { return static_cast<std::size_t>(k) * ns + p; };
    auto V = [&](int k, std::size_t p) { return NU + static_cast<std::size_t>(k) * ns + p; };

    const auto lap = laplacian_stencil(g);
    std::vector<Stencil> grad;
    for (int a = 0; a < g.dim(); ++a) grad.push_back(gradient_stencil(g, a));
    const auto wsp = trapezoid_space(g, nullptr);
    const auto wt = time_weights(g, 0.0, T);

    // Carleman weight per (p, k).
    std::vector<double> carleman(NU);
    if (problem.kind == ObservationKind::Terminal) {
        const TimeWeightSpec tw{problem.lambda, problem.s, T, {}};
        for (int k = 0; k < nt; ++k) {
            const double w = norm_weight(tw, g.t(k));
            for (std::size_t p = 0; p < ns; ++p) carleman[U(k, p)] = w;
        }
    } else {
        const auto f = space_time_weight_fields(interior_weight(problem, g), g);
        std::copy(f.weight.values().begin(), f.weight.values().end(), carleman.begin());
    }

    Assembly as;
    std::vector<Entry> row;
    auto add_stencil = [&](const std::vector<Entry>& st, std::size_t offset, double c) {
        for (const auto& e : st) row.push_back({offset + e.col, c * e.val});
    };

    // u rows at levels 0..N-1: (u_{k+1} - u_k)/tau + Lap u_k - a0 u_k - a1 . grad u_k - q v_k = F_k.
    for (int k = 0; k < N; ++k)
        for (std::size_t p = 0; p < ns; ++p) {
            const double scale = std::sqrt(tau * wsp[p] * carleman[U(k, p)]);
            if (scale == 0.0) continue;
            row.clear();
            row.push_back({U(k + 1, p), 1.0 / tau});
            row.push_back({U(k, p), -1.0 / tau - coeffs.a0(p, k)});
            add_stencil(lap[p], U(k, 0), 1.0);
            for (int a = 0; a < g.dim(); ++a) add_stencil(grad[a][p], U(k, 0), -coeffs.a1[a](p, k));
            row.push_back({V(k, p), -coeffs.q(p, k)});
            as.row(row, scale, coeffs.F(p, k));
        }
    // v rows at levels 1..N:
    // (v_k - v_{k-1})/tau - Lap v_k - c0 v_k - b0 u_k - b1 . grad u_k - rho0 Lap u_k - c1 . grad v_k = G_k.
    for (int k = 1; k <= N; ++k)
        for (std::size_t p = 0; p < ns; ++p) {
            const double scale = std::sqrt(tau * wsp[p] * carleman[U(k, p)]);
            if (scale == 0.0) continue;
            row.clear();
            row.push_back({V(k, p), 1.0 / tau - coeffs.c0(p, k)});
            row.push_back({V(k - 1, p), -1.0 / tau});
            add_stencil(lap[p], V(k, 0), -1.0);
            for (int a = 0; a < g.dim(); ++a) add_stencil(grad[a][p], V(k, 0), -coeffs.c1[a](p, k));
            row.push_back({U(k, p), -coeffs.b0(p, k)});
            for (int a = 0; a < g.dim(); ++a) add_stencil(grad[a][p], U(k, 0), -coeffs.b1[a](p, k));
            add_stencil(lap[p], U(k, 0), -coeffs.rho0);
            as.row(row, scale, coeffs.G(p, k));
        }

    // Observation rows.
    const int obs_first = as.rows;
    if (problem.kind == ObservationKind::Terminal) {
        for (std::size_t p = 0; p < ns; ++p) {
            const double scale = std::sqrt(wsp[p]);
            as.row({{U(N, p), 1.0}}, scale, obs.u(p, N));
            as.row({{V(N, p), 1.0}}, scale, obs.v(p, N));
        }
    } else {
        const auto mask = omega_mask(problem, g);
        const auto wom = trapezoid_space(g, &mask);
        for (int k = 0; k < nt; ++k)
            for (std::size_t p = 0; p < ns; ++p) {
                if (wom[p] == 0.0) continue;
                const double scale = std::sqrt(wt[k] * wom[p]);
                as.row({{U(k, p), 1.0}}, scale, obs.u(p, k));
                if (problem.kind == ObservationKind::Interior) as.row({{V(k, p), 1.0}}, scale, obs.v(p, k));
            }
    }
    const int obs_count = as.rows - obs_first;
    SpMat A(as.rows, static_cast<Eigen::Index>(2 * NU));
    A.setFromTriplets(as.trip.begin(), as.trip.end());
    const Vec b = Eigen::Map<const Vec>(as.rhs.data(), static_cast<Eigen::Index>(as.rhs.size()));

    // Tikhonov term beta |x - x_prev|^2 in L2(Q), a diagonal of the normal matrix.
    Vec reg(A.cols());
    for (int k = 0; k < nt; ++k)
        for (std::size_t p = 0; p < ns; ++p) reg[U(k, p)] = reg[V(k, p)] = problem.beta * wt[k] * wsp[p];

    // Symmetric Jacobi scaling x = D y.
    Vec d = reg;
    for (Eigen::Index r = 0; r < A.outerSize(); ++r)
        for (SpMat::InnerIterator it(A, r); it; ++it) d[it.col()] += it.value() * it.value();
    d = d.cwiseSqrt().cwiseInverse();
    A = A * d.asDiagonal();
    const Vec reg_s = reg.cwiseProduct(d).cwiseProduct(d);

    const SpMat At = A.transpose();
    Eigen::SparseMatrix<double> diag(A.cols(), A.cols());
    diag.setIdentity();
    diag = diag * reg_s.asDiagonal();
    const Eigen::SparseMatrix<double> normal = Eigen::SparseMatrix<double>(At * A) + diag;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor(normal);
    if (factor.info() != Eigen::Success) throw StagnationError("reconstruction: normal matrix factorization failed", {});

    auto apply_normal = [&](const Vec& y) -> Vec { return At * (A * y) + reg_s.cwiseProduct(y); };

    QRReport rep;
    const Vec atb = At * b;
    Vec y = Vec::Zero(A.cols());
    for (int step = 0; step < problem.proximal_steps; ++step) {
        const Vec c = atb + reg_s.cwiseProduct(y);
        const double c0 = c.norm();
        if (c0 == 0.0) break;
        // Conjugate gradient on the normal equations, preconditioned by the factorization.
        Vec x = factor.solve(c);
        Vec r = c - apply_normal(x);
        Vec z = factor.solve(r);
        Vec p = z;
        double rz = r.dot(z);
        for (int it = 0;; ++it) {
            const double rel = r.norm() / c0;
            rep.trace.push_back(rel);
            rep.gradient_norm = rel;
            if (!std::isfinite(rel)) throw StagnationError("reconstruction: CG breakdown", rep.trace);
            if (rel <= problem.tolerance) break;
            if (it >= problem.max_iterations) {
                std::ostringstream os;
                os << "reconstruction: CG stalled at relative gradient " << rel << " after " << it << " iterations";
                throw StagnationError(os.str(), rep.trace);
            }
            const Vec q = apply_normal(p);
            const double alpha = rz / p.dot(q);
            x += alpha * p;
            r = c - apply_normal(x);
            z = factor.solve(r);
            const double rz_new = r.dot(z);
            p = z + (rz_new / rz) * p;
            rz = rz_new;
            ++rep.iterations;
        }
        const double change = (x - y).norm();
        const double size = x.norm();
        y = x;
        ++rep.proximal_steps;
        rep.misfit = (A * y - b).segment(obs_first, obs_count).norm();
        if (problem.noise_level && rep.misfit <= problem.discrepancy * *problem.noise_level) break;
        if (change <= problem.tolerance * size) break;
    }
    const Vec x = d.asDiagonal() * y;
    rep.pair = {ScalarField(g, std::vector<double>(x.data(), x.data() + NU)),
                ScalarField(g, std::vector<double>(x.data() + NU, x.data() + 2 * NU))};
    measure_residuals(rep.pair, coeffs);
    return rep;
}

SchemeResiduals scheme_residuals(const SolutionPair& pair, const CoefficientSet& c) {
    const auto& g = c.grid();
    require_same_grid(g, pair.u.grid(), "scheme_residuals");
    require_same_grid(g, pair.v.grid(), "scheme_residuals");
    const auto lu = laplacian_neumann(pair.u), lv = laplacian_neumann(pair.v);
    const auto gu = gradient_neumann(pair.u), gv = gradient_neumann(pair.v);
    const int N = g.nt() - 1;
    const double tau = g.tau();
    SchemeResiduals out{ScalarField(g), ScalarField(g)};
    for (int k = 0; k <= N; ++k)
        for (std::size_t p = 0; p < g.space_size(); ++p) {
            if (k < N) {
                double r = (pair.u(p, k + 1) - pair.u(p, k)) / tau + lu(p, k) - c.a0(p, k) * pair.u(p, k) -
                           c.q(p, k) * pair.v(p, k) - c.F(p, k);
                for (int a = 0; a < g.dim(); ++a) r -= c.a1[a](p, k) * gu[a](p, k);
                out.u(p, k) = r;
            }
            if (k > 0) {
                double r = (pair.v(p, k) - pair.v(p, k - 1)) / tau - lv(p, k) - c.c0(p, k) * pair.v(p, k) -
                           c.b0(p, k) * pair.u(p, k) - c.rho0 * lu(p, k) - c.G(p, k);
                for (int a = 0; a < g.dim(); ++a) r -= c.b1[a](p, k) * gu[a](p, k) + c.c1[a](p, k) * gv[a](p, k);
                out.v(p, k) = r;
            }
        }
    return out;
}

void match_scheme_sources(const SolutionPair& pair, CoefficientSet& coeffs) {
    const auto r = scheme_residuals(pair, coeffs);
    coeffs.F += r.u;
    coeffs.G += r.v;
}

double reconstruction_error(const SolutionPair& rec, const SolutionPair& truth, double t_lo, double t_hi,
                            bool v_only) {
    const double dv = h21_norm(rec.v - truth.v, t_lo, t_hi);
    const double nv = h21_norm(truth.v, t_lo, t_hi);
    if (v_only) return nv > 0.0 ? dv / nv : dv;
    const double du = h21_norm(rec.u - truth.u, t_lo, t_hi);
    const double nu = h21_norm(truth.u, t_lo, t_hi);
    const double n = nu + nv;
    return n > 0.0 ? (du + dv) / n : du + dv;
}

}  // namespace cmfg
