#include "cmfg/mfg_system.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "cmfg/errors.hpp"
#include "cmfg/implicit_step.hpp"
#include "cmfg/operators.hpp"
#include "cmfg/quadrature.hpp"

namespace cmfg {

SeededUniform::SeededUniform(std::uint64_t seed) : engine_(seed) {}

double SeededUniform::next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

int SeededUniform::integer(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(engine_() % span);
}

CoefficientSet CoefficientSet::zero(const SpaceTimeGrid& grid) {
    CoefficientSet c;
    c.a0 = ScalarField(grid);
    c.b0 = ScalarField(grid);
    c.c0 = ScalarField(grid);
    c.q = ScalarField(grid);
    c.F = ScalarField(grid);
    c.G = ScalarField(grid);
    for (int a = 0; a < grid.dim(); ++a) {
        c.a1.emplace_back(grid);
        c.b1.emplace_back(grid);
        c.c1.emplace_back(grid);
    }
    return c;
}

double CoefficientSet::max_coefficient() const {
    double m = std::max({a0.max_abs(), b0.max_abs(), c0.max_abs(), q.max_abs()});
    for (const auto* group : {&a1, &b1, &c1})
        for (const auto& f : *group) m = std::max(m, f.max_abs());
    return m;
}

void CoefficientSet::validate() const {
    const auto& g = grid();
    const int d = g.dim();
    if (static_cast<int>(a1.size()) != d || static_cast<int>(b1.size()) != d || static_cast<int>(c1.size()) != d)
        throw ContractViolation("coefficients: first-order coefficient count must equal the dimension");
    for (const ScalarField* f : {&b0, &c0, &q, &F, &G}) require_same_grid(g, f->grid(), "coefficients");
    for (const auto* group : {&a1, &b1, &c1})
        for (const auto& f : *group) {
            require_same_grid(g, f.grid(), "coefficients");
            if (!f.all_finite()) throw ContractViolation("coefficients: non-finite value");
        }
    for (const ScalarField* f : {&a0, &b0, &c0, &q, &F, &G})
        if (!f->all_finite()) throw ContractViolation("coefficients: non-finite value");
    if (!std::isfinite(rho0)) throw ContractViolation("coefficients: rho0 must be finite");
    if (max_coefficient() > bound * (1.0 + 1e-12))
        throw ContractViolation("coefficients: a field exceeds the declared bound C");
}

bool CoefficientSet::is_decoupled() const {
    if (q.max_abs() != 0.0 || b0.max_abs() != 0.0 || rho0 != 0.0) return false;
    for (const auto& f : b1)
        if (f.max_abs() != 0.0) return false;
    return true;
}

namespace {

ScalarField dot_gradient(const std::vector<ScalarField>& coef, const std::vector<ScalarField>& grad) {
    ScalarField out(grad.front().grid());
    for (std::size_t a = 0; a < grad.size(); ++a) out += hadamard(coef[a], grad[a]);
    return out;
}

void zero_endpoints(ScalarField& f) {
    auto first = f.level(0);
    auto last = f.level(f.grid().nt() - 1);
    std::fill(first.begin(), first.end(), 0.0);
    std::fill(last.begin(), last.end(), 0.0);
}

// Parts of the two equations that do not involve the sources.
ScalarField u_operator(const ScalarField& u, const ScalarField& v, const CoefficientSet& c) {
    ScalarField r = time_derivative(u);
    r += laplacian_neumann(u);
    r -= apply_q1(c, u);
    r -= apply_s(c, v);
    return r;
}

ScalarField v_operator(const ScalarField& u, const ScalarField& v, const CoefficientSet& c) {
    ScalarField r = time_derivative(v);
    r -= laplacian_neumann(v);
    r -= apply_q2(c, u, v);
    r -= c.rho0 * laplacian_neumann(u);
    return r;
}

}  // namespace

ScalarField apply_q1(const CoefficientSet& c, const ScalarField& u) {
    ScalarField out = hadamard(c.a0, u);
    out += dot_gradient(c.a1, gradient_neumann(u));
    return out;
}

ScalarField apply_q2(const CoefficientSet& c, const ScalarField& u, const ScalarField& v) {
    ScalarField out = hadamard(c.b0, u);
    out += dot_gradient(c.b1, gradient_neumann(u));
    out += hadamard(c.c0, v);
    out += dot_gradient(c.c1, gradient_neumann(v));
    return out;
}

ScalarField apply_s(const CoefficientSet& c, const ScalarField& v) { return hadamard(c.q, v); }

ScalarField residual_u(const SolutionPair& pair, const CoefficientSet& coeffs) {
    require_same_grid(pair.u.grid(), coeffs.grid(), "residual_u");
    require_same_grid(pair.v.grid(), coeffs.grid(), "residual_u");
    ScalarField r = u_operator(pair.u, pair.v, coeffs);
    r -= coeffs.F;
    zero_endpoints(r);
    return r;
}

ScalarField residual_v(const SolutionPair& pair, const CoefficientSet& coeffs) {
    require_same_grid(pair.u.grid(), coeffs.grid(), "residual_v");
    require_same_grid(pair.v.grid(), coeffs.grid(), "residual_v");
    ScalarField r = v_operator(pair.u, pair.v, coeffs);
    r -= coeffs.G;
    zero_endpoints(r);
    return r;
}

void measure_residuals(SolutionPair& pair, const CoefficientSet& coeffs) {
    const double T = pair.u.grid().final_time();
    pair.r_u = l2_norm(residual_u(pair, coeffs), 0.0, T);
    pair.r_v = l2_norm(residual_v(pair, coeffs), 0.0, T);
}

SolveReport solve_coupled(const CoefficientSet& coeffs, const SpatialField& u_T, const SpatialField& v_0, double tol,
                          int max_iter) {
    coeffs.validate();
    const auto& g = coeffs.grid();
    require_same_grid(g, u_T.grid(), "solve_coupled u_T");
    require_same_grid(g, v_0.grid(), "solve_coupled v_0");
    if (!(tol > 0.0)) throw ContractViolation("solve_coupled: tol must be positive");
    if (max_iter < 1) throw ContractViolation("solve_coupled: max_iter must be positive");

    const int N = g.nt() - 1;
    const double tau = g.tau();
    const std::size_t ns = g.space_size();
    ScalarField u(g), v(g);
    SolveReport report;
    std::vector<double> rhs(ns), shift(ns);

    for (int it = 1; it <= max_iter; ++it) {
        // Lagged pieces: S v and a1 . grad u from the previous iterate.
        const ScalarField u_lag_src = dot_gradient(coeffs.a1, gradient_neumann(u)) + apply_s(coeffs, v);
        ScalarField u_new(g);
        u_new.set_slice(N, u_T);
        for (int k = N - 1; k >= 0; --k) {
            auto prev = u_new.level(k + 1);
            auto lag = u_lag_src.level(k);
            auto f = coeffs.F.level(k);
            auto a0 = coeffs.a0.level(k);
            for (std::size_t p = 0; p < ns; ++p) {
                rhs[p] = prev[p] - tau * (lag[p] + f[p]);
                shift[p] = a0[p];
            }
            auto out = u_new.level(k);
            std::copy(prev.begin(), prev.end(), out.begin());
            implicit_neumann_step(g, tau, shift, rhs, out);
        }

        const ScalarField lap_u = laplacian_neumann(u_new);
        const auto grad_u = gradient_neumann(u_new);
        ScalarField v_src = hadamard(coeffs.b0, u_new);
        v_src += dot_gradient(coeffs.b1, grad_u);
        v_src += coeffs.rho0 * lap_u;
        v_src += dot_gradient(coeffs.c1, gradient_neumann(v));
        v_src += coeffs.G;
        ScalarField v_new(g);
        v_new.set_slice(0, v_0);
        for (int k = 1; k <= N; ++k) {
            auto prev = v_new.level(k - 1);
            auto src = v_src.level(k);
            auto c0 = coeffs.c0.level(k);
            for (std::size_t p = 0; p < ns; ++p) {
                rhs[p] = prev[p] + tau * src[p];
                shift[p] = -c0[p];
            }
            auto out = v_new.level(k);
            std::copy(prev.begin(), prev.end(), out.begin());
            implicit_neumann_step(g, tau, shift, rhs, out);
        }

        const double du = h21_norm(u_new - u);
        const double dv = h21_norm(v_new - v);
        const double change = std::hypot(du, dv);
        const double size = std::hypot(h21_norm(u_new), h21_norm(v_new));
        u = std::move(u_new);
        v = std::move(v_new);
        report.change_history.push_back(change);
        report.iterations = it;

        if (!std::isfinite(change) || (report.change_history.size() > 2 && change > 1e8 * report.change_history[1])) {
            throw DivergenceError("solve_coupled: Picard iteration diverged", report.change_history);
        }
        if (change == 0.0 || change <= tol * size) {
            report.pair.u = std::move(u);
            report.pair.v = std::move(v);
            measure_residuals(report.pair, coeffs);
            return report;
        }
    }
    std::ostringstream os;
    os << "solve_coupled: no convergence in " << max_iter << " iterations (last change "
       << report.change_history.back() << ")";
    throw DivergenceError(os.str(), report.change_history);
}

ScalarField time_reverse(const ScalarField& f) {
    const auto& g = f.grid();
    ScalarField out(g);
    const int N = g.nt() - 1;
    for (int k = 0; k <= N; ++k) {
        auto src = f.level(N - k);
        std::copy(src.begin(), src.end(), out.level(k).begin());
    }
    return out;
}

double CosineMode::value(const SpaceTimeGrid& g, double x, double y, double t) const {
    using std::numbers::pi;
    double v = amplitude * std::cos(wave[0] * pi * x / g.length(0));
    if (g.dim() == 2) v *= std::cos(wave[1] * pi * y / g.length(1));
    switch (profile) {
        case TimeProfile::Exponential:
            return v * std::exp(rate * t);
        case TimeProfile::Oscillating:
            return v * (1.0 + 0.5 * std::sin(rate * t + phase));
    }
    return v;
}

ScalarField sample_modes(const SpaceTimeGrid& grid, const std::vector<CosineMode>& modes) {
    return ScalarField::sample(grid, [&](double x, double y, double t) {
        double s = 0.0;
        for (const auto& m : modes) s += m.value(grid, x, y, t);
        return s;
    });
}

namespace {

double wave_number_squared(const SpaceTimeGrid& g, std::array<int, 2> wave) {
    using std::numbers::pi;
    double k2 = std::pow(wave[0] * pi / g.length(0), 2);
    if (g.dim() == 2) k2 += std::pow(wave[1] * pi / g.length(1), 2);
    return k2;
}

}  // namespace

CosineMode backward_heat_mode(const SpaceTimeGrid& grid, std::array<int, 2> wave, double amplitude) {
    const double k2 = wave_number_squared(grid, wave);
    return CosineMode{amplitude * std::exp(-k2 * grid.final_time()), wave, TimeProfile::Exponential, k2, 0.0};
}

CosineMode forward_heat_mode(const SpaceTimeGrid& grid, std::array<int, 2> wave, double amplitude) {
    const double k2 = wave_number_squared(grid, wave);
    return CosineMode{amplitude, wave, TimeProfile::Exponential, -k2, 0.0};
}

namespace {

// bound * (r1 cos(.) cos(.) cos(.) + r2 cos(.) cos(.) cos(.)), |r1| + |r2| <= 1.
ScalarField random_smooth(const SpaceTimeGrid& g, double bound, SeededUniform& rng) {
    using std::numbers::pi;
    struct Term {
        double r, mx, px, my, py, w, pt;
    };
    std::array<Term, 2> terms{};
    for (auto& t : terms)
        t = Term{rng.in(-0.5, 0.5), static_cast<double>(rng.integer(0, 2)), rng.in(0, 2 * pi),
                 static_cast<double>(rng.integer(0, 2)), rng.in(0, 2 * pi), rng.in(0, 3), rng.in(0, 2 * pi)};
    return ScalarField::sample(g, [&](double x, double y, double t) {
        double s = 0.0;
        for (const auto& tm : terms) {
            double v = tm.r * std::cos(tm.mx * pi * x / g.length(0) + tm.px) * std::cos(tm.w * t + tm.pt);
            if (g.dim() == 2) v *= std::cos(tm.my * pi * y / g.length(1) + tm.py);
            s += v;
        }
        return bound * s;
    });
}

}  // namespace

CoefficientSet random_coefficients(const SpaceTimeGrid& grid, const CoefficientSpec& spec) {
    if (!(spec.bound >= 0.0)) throw ContractViolation("coefficients: bound must be nonnegative");
    CoefficientSet c = CoefficientSet::zero(grid);
    c.bound = spec.bound;
    if (spec.zero) {
        c.rho0 = spec.rho0;
        return c;
    }
    SeededUniform rng(spec.seed * 0x9E3779B97F4A7C15ULL + 17);
    c.a0 = random_smooth(grid, spec.bound, rng);
    for (auto& f : c.a1) f = random_smooth(grid, spec.bound, rng);
    c.b0 = random_smooth(grid, spec.bound, rng);
    for (auto& f : c.b1) f = random_smooth(grid, spec.bound, rng);
    c.c0 = random_smooth(grid, spec.bound, rng);
    for (auto& f : c.c1) f = random_smooth(grid, spec.bound, rng);
    if (spec.q_support) {
        const auto box = *spec.q_support;
        if (std::abs(spec.q_value) > spec.bound * (1.0 + 1e-12))
            throw ContractViolation("coefficients: q_value exceeds the declared bound");
        c.q = ScalarField::sample(grid, [&](double x, double y, double) {
            const double tol = 1e-12;
            const bool inside = x >= box[0] - tol && x <= box[1] + tol &&
                                (grid.dim() == 1 || (y >= box[2] - tol && y <= box[3] + tol));
            return inside ? spec.q_value : 0.0;
        });
    } else {
        c.q = random_smooth(grid, spec.bound, rng);
    }
    c.rho0 = spec.rho0;
    return c;
}

ManufacturedSpec random_manufactured_spec(const SpaceTimeGrid& grid, int modes, double amplitude,
                                          const CoefficientSpec& coefficients) {
    using std::numbers::pi;
    ManufacturedSpec spec;
    spec.coefficients = coefficients;
    SeededUniform rng(coefficients.seed * 0xD1B54A32D192ED03ULL + 5);
    auto draw = [&](std::vector<CosineMode>& out) {
        for (int m = 0; m < modes; ++m) {
            CosineMode mode;
            const double sign = rng.next() < 0.5 ? -1.0 : 1.0;
            mode.amplitude = sign * amplitude * rng.in(0.3, 1.0);
            mode.wave = {rng.integer(0, 3), grid.dim() == 2 ? rng.integer(0, 3) : 0};
            mode.profile = rng.next() < 0.5 ? TimeProfile::Exponential : TimeProfile::Oscillating;
            mode.rate = rng.in(-2.0, 2.0);
            mode.phase = rng.in(0.0, 2 * pi);
            out.push_back(mode);
        }
    };
    draw(spec.u_modes);
    draw(spec.v_modes);
    return spec;
}

ManufacturedSystem manufactured_pair(const SpaceTimeGrid& grid, const ManufacturedSpec& spec) {
    ManufacturedSystem sys;
    sys.coeffs = random_coefficients(grid, spec.coefficients);
    sys.pair.u = sample_modes(grid, spec.u_modes);
    sys.pair.v = sample_modes(grid, spec.v_modes);
    sys.coeffs.F = u_operator(sys.pair.u, sys.pair.v, sys.coeffs);
    sys.coeffs.G = v_operator(sys.pair.u, sys.pair.v, sys.coeffs);
    measure_residuals(sys.pair, sys.coeffs);
    return sys;
}

std::vector<ManufacturedSpec> manufactured_suite(const SpaceTimeGrid& grid, int count, std::uint64_t base_seed,
                                                 double bound, double rho0, int modes) {
    std::vector<ManufacturedSpec> suite;
    for (int i = 0; i < count; ++i) {
        CoefficientSpec cs;
        cs.bound = bound;
        cs.rho0 = rho0;
        cs.seed = base_seed + static_cast<std::uint64_t>(i);
        suite.push_back(random_manufactured_spec(grid, modes, 1.0, cs));
    }
    return suite;
}

}  // namespace cmfg
