#include <cmath>
#include <cstring>
#include <numbers>

#include "cmfg/errors.hpp"
#include "cmfg/mfg_system.hpp"
#include "cmfg/operators.hpp"
#include "cmfg/quadrature.hpp"
#include "doctest.h"

using namespace cmfg;
using std::numbers::pi;

namespace {

double max_diff(const ScalarField& a, const ScalarField& b) { return (a - b).max_abs(); }

double interior_max(const ScalarField& f) {
    double m = 0.0;
    for (int k = 1; k < f.grid().nt() - 1; ++k)
        for (double v : f.level(k)) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace

TEST_CASE("residuals of the zero pair vanish") {
    const auto g = SpaceTimeGrid::interval(1.0, 1.0, 11, 11);
    auto c = random_coefficients(g, CoefficientSpec{});
    SolutionPair zero{ScalarField(g), ScalarField(g)};
    CHECK(residual_u(zero, c).max_abs() == 0.0);
    CHECK(residual_v(zero, c).max_abs() == 0.0);
}

TEST_CASE("heat modes have discretization-size residuals") {
    auto defects = [](int nx, int nt) {
        const auto g = SpaceTimeGrid::interval(1.0, 1.0, nx, nt);
        const auto c = CoefficientSet::zero(g);
        SolutionPair p{sample_modes(g, {backward_heat_mode(g, {1, 0})}), sample_modes(g, {forward_heat_mode(g, {1, 0})})};
        return std::pair{interior_max(residual_u(p, c)), interior_max(residual_v(p, c))};
    };
    const auto [ru1, rv1] = defects(21, 41);
    const auto [ru2, rv2] = defects(41, 81);
    CHECK(ru1 < 5 * (0.05 * 0.05 + 0.025 * 0.025) * pi * pi * pi * pi);
    CHECK(ru1 / ru2 == doctest::Approx(4.0).epsilon(0.1));
    CHECK(rv1 / rv2 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("solver reproduces decoupled heat modes") {
    for (int n : {21, 41}) {
        const auto g = SpaceTimeGrid::interval(1.0, 1.0, n, 2 * n - 1);
        const auto c = CoefficientSet::zero(g);
        const auto mode = SpatialField::sample(g, [](double x, double) { return std::cos(pi * x); });
        const auto sol = solve_coupled(c, mode, mode);
        const auto u_exact = sample_modes(g, {backward_heat_mode(g, {1, 0})});
        const auto v_exact = sample_modes(g, {forward_heat_mode(g, {1, 0})});
        const double bound = 5 * (g.h() * g.h() + g.tau());
        CHECK(max_diff(sol.pair.u, u_exact) <= bound);
        CHECK(max_diff(sol.pair.v, v_exact) <= bound);
        CHECK(sol.iterations <= 2);
    }
}

TEST_CASE("solver: zero data and constants are fixed points") {
    const auto g = SpaceTimeGrid::interval(1.0, 1.0, 17, 21);
    auto c = random_coefficients(g, CoefficientSpec{0.4, 0.3});
    const auto zero = solve_coupled(c, SpatialField(g), SpatialField(g));
    CHECK(zero.pair.u.max_abs() == 0.0);
    CHECK(zero.pair.v.max_abs() == 0.0);

    const auto z = CoefficientSet::zero(g);
    const auto cst = solve_coupled(z, SpatialField(g, 2.5), SpatialField(g, -1.25));
    for (double v : cst.pair.u.values()) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
    for (double v : cst.pair.v.values()) CHECK(v == doctest::Approx(-1.25).epsilon(1e-12));
}

TEST_CASE("pure Neumann heat solve conserves mass") {
    for (const auto& g : {SpaceTimeGrid::interval(1.0, 1.0, 33, 41), SpaceTimeGrid::rectangle(1.0, 1.0, 0.5, 13, 9, 21)}) {
        const auto c = CoefficientSet::zero(g);
        const auto v0 = SpatialField::sample(g, [](double x, double y) { return std::exp(-20 * ((x - 0.3) * (x - 0.3) + y * y)); });
        const auto sol = solve_coupled(c, SpatialField(g), v0);
        const double m0 = integrate_space(sol.pair.v.slice(0));
        for (int k = 1; k < g.nt(); ++k)
            CHECK(std::abs(integrate_space(sol.pair.v.slice(k)) - m0) <= 1e-10 * std::abs(m0));
    }
}

TEST_CASE("Picard iterate change decreases on the seeded coefficient suite") {
    const auto g = SpaceTimeGrid::interval(1.0, 1.0, 33, 65);
    const auto u_T = SpatialField::sample(g, [](double x, double) { return std::cos(pi * x) + 0.5 * std::cos(2 * pi * x); });
    const auto v_0 = SpatialField::sample(g, [](double x, double) { return 1.0 + 0.5 * std::cos(pi * x); });
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        CoefficientSpec spec{0.5, 0.5};
        spec.seed = seed;
        const auto c = random_coefficients(g, spec);
        const auto sol = solve_coupled(c, u_T, v_0, 1e-11);
        const auto& h = sol.change_history;
        REQUIRE(h.size() >= 3);
        for (std::size_t i = 2; i < h.size(); ++i) CHECK(h[i] < h[i - 1]);
        // Backward Euler: residuals are first order in tau.
        CHECK(sol.pair.r_u < 0.5);
        CHECK(sol.pair.r_v < 0.5);
    }
}

TEST_CASE("solver residual is first order in tau") {
    CoefficientSpec spec{0.5, 0.5};
    spec.seed = 3;
    auto run = [&](int nx, int nt) {
        const auto g = SpaceTimeGrid::interval(1.0, 1.0, nx, nt);
        const auto c = random_coefficients(g, spec);
        const auto u_T = SpatialField::sample(g, [](double x, double) { return std::cos(pi * x); });
        return solve_coupled(c, u_T, u_T).pair;
    };
    const auto a = run(33, 65), b = run(33, 129);
    CHECK(a.r_u / b.r_u == doctest::Approx(2.0).epsilon(0.15));
    CHECK(a.r_v / b.r_v == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("solver in 2D") {
    const auto g = SpaceTimeGrid::rectangle(1.0, 1.0, 1.0, 17, 17, 33);
    const auto c = CoefficientSet::zero(g);
    const auto mode = SpatialField::sample(g, [](double x, double y) { return std::cos(pi * x) * std::cos(pi * y); });
    const auto sol = solve_coupled(c, mode, mode);
    auto exact_u = ScalarField::sample(g, [](double x, double y, double t) {
        return std::exp(-2 * pi * pi * (1 - t)) * std::cos(pi * x) * std::cos(pi * y);
    });
    CHECK(max_diff(sol.pair.u, exact_u) <= 5 * (g.h() * g.h() + g.tau()));

    CoefficientSpec spec{0.4, 0.4};
    const auto rc = random_coefficients(g, spec);
    const auto coupled = solve_coupled(rc, mode, mode, 1e-10);
    CHECK(coupled.pair.r_u < 1.0);
    CHECK(coupled.pair.v.all_finite());
}

TEST_CASE("solver reports divergence") {
    const auto g = SpaceTimeGrid::interval(1.0, 1.0, 17, 17);
    CoefficientSpec spec{0.5, 0.5};
    const auto c = random_coefficients(g, spec);
    const auto mode = SpatialField::sample(g, [](double x, double) { return std::cos(pi * x); });
    try {
        solve_coupled(c, mode, mode, 1e-14, 2);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.history().size() == 2);
    }
    CoefficientSet bad = c;
    bad.bound = 0.1;
    CHECK_THROWS_AS(solve_coupled(bad, mode, mode), ContractViolation);
}

TEST_CASE("manufactured pairs satisfy the discrete system exactly") {
    const auto g = SpaceTimeGrid::interval(1.0, 1.0, 21, 31);
    const auto suite = manufactured_suite(g, 4, 11, 0.5, 0.5);
    for (const auto& spec : suite) {
        const auto sys = manufactured_pair(g, spec);
        CHECK(residual_u(sys.pair, sys.coeffs).max_abs() <= 1e-13);
        CHECK(residual_v(sys.pair, sys.coeffs).max_abs() <= 1e-13);
        CHECK(sys.coeffs.max_coefficient() <= 0.5);
        CHECK_NOTHROW(sys.coeffs.validate());
    }
    // Zero coefficients with heat modes: sources are the discretization defect only.
    auto defect = [](int nx, int nt) {
        const auto gg = SpaceTimeGrid::interval(1.0, 1.0, nx, nt);
        ManufacturedSpec heat;
        heat.u_modes = {backward_heat_mode(gg, {1, 0})};
        heat.v_modes = {forward_heat_mode(gg, {1, 0})};
        heat.coefficients.zero = true;
        heat.coefficients.rho0 = 0.0;
        const auto sys = manufactured_pair(gg, heat);
        return std::pair{interior_max(sys.coeffs.F), interior_max(sys.coeffs.G)};
    };
    const auto [f1, g1] = defect(21, 31);
    const auto [f2, g2] = defect(41, 61);
    CHECK(f1 < 0.5);
    CHECK(f1 / f2 == doctest::Approx(4.0).epsilon(0.15));
    CHECK(g1 / g2 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("manufactured pairs are reproducible bit for bit") {
    const auto g = SpaceTimeGrid::rectangle(1.0, 1.0, 1.0, 7, 9, 11);
    const auto a = manufactured_pair(g, manufactured_suite(g, 1, 42, 0.5, 0.5)[0]);
    const auto b = manufactured_pair(g, manufactured_suite(g, 1, 42, 0.5, 0.5)[0]);
    const auto c = manufactured_pair(g, manufactured_suite(g, 1, 43, 0.5, 0.5)[0]);
    auto same = [](const ScalarField& x, const ScalarField& y) {
        return std::memcmp(x.values().data(), y.values().data(), x.size() * sizeof(double)) == 0;
    };
    CHECK(same(a.pair.u, b.pair.u));
    CHECK(same(a.coeffs.F, b.coeffs.F));
    CHECK(same(a.coeffs.q, b.coeffs.q));
    CHECK_FALSE(same(a.pair.u, c.pair.u));
}

TEST_CASE("time reversal") {
    const auto g = SpaceTimeGrid::interval(1.0, 2.0, 9, 17);
    const auto t = ScalarField::sample(g, [](double, double, double tt) { return tt; });
    const auto r = time_reverse(t);
    for (int k = 0; k < g.nt(); ++k) CHECK(r(3, k) == doctest::Approx(2.0 - g.t(k)).epsilon(1e-15));

    const auto sys = manufactured_pair(g, manufactured_suite(g, 1, 5, 0.5, 0.5)[0]);
    const auto& f = sys.pair.u;
    const auto rr = time_reverse(time_reverse(f));
    CHECK(std::memcmp(rr.values().data(), f.values().data(), f.size() * sizeof(double)) == 0);

    // D_t (reverse f) = -reverse(D_t f), exactly, at every level.
    const auto lhs = time_derivative(time_reverse(f));
    const auto rhs = time_reverse(time_derivative(f));
    for (std::size_t p = 0; p < lhs.size(); ++p) CHECK(lhs.values()[p] == -rhs.values()[p]);
}

TEST_CASE("time-reversal lemma, discrete form") {
    // r = d_t u + Lap u - F;  w = reverse(u):  d_t w - Lap w + reverse(F) = -reverse(r).
    const auto g = SpaceTimeGrid::interval(1.0, 1.0, 13, 21);
    const auto sys = manufactured_pair(g, manufactured_suite(g, 1, 9, 0.5, 0.5)[0]);
    const auto& u = sys.pair.u;
    const auto F = ScalarField::sample(g, [](double x, double, double t) { return std::sin(3 * x + t); });
    const auto r = time_derivative(u) + laplacian_neumann(u) - F;
    const auto w = time_reverse(u);
    const auto lhs = time_derivative(w) - laplacian_neumann(w) + time_reverse(F);
    const auto rev = time_reverse(r);
    double worst = 0.0;
    for (int k = 1; k < g.nt() - 1; ++k)
        for (std::size_t p = 0; p < g.space_size(); ++p) worst = std::max(worst, std::abs(lhs(p, k) + rev(p, k)));
    CHECK(worst <= 1e-12);
}
