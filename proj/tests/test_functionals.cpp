#include <cmath>
#include <limits>
#include <numbers>

#include "cmfg/errors.hpp"
#include "cmfg/functionals.hpp"
#include "cmfg/operators.hpp"
#include "cmfg/quadrature.hpp"
#include "doctest.h"

using namespace cmfg;
using std::numbers::pi;

namespace {

SolutionPair heat_pair(const SpaceTimeGrid& g) {
    return {sample_modes(g, {backward_heat_mode(g, {1, 0})}), sample_modes(g, {forward_heat_mode(g, {1, 0})})};
}

SpaceTimeWeightSpec st_weight(const SpaceTimeGrid& g, double s, double lambda = 1.0) {
    const SubdomainMask omega(g, {0.3, 0.3}, {0.6, 0.6});
    return {build_eta(g, omega), s, lambda, g.final_time()};
}

void check_totals(const EstimateReport& r) {
    double l = 0, q = 0;
    for (const auto& t : r.lhs_terms) {
        CHECK(t.value >= 0.0);
        l += t.value;
    }
    for (const auto& t : r.rhs_terms) {
        CHECK(t.value >= 0.0);
        q += t.value;
    }
    CHECK(r.lhs_total == doctest::Approx(l).epsilon(1e-12));
    CHECK(r.rhs_total == doctest::Approx(q).epsilon(1e-12));
}

ScalarField scaled(double a, const ScalarField& f) { return a * f; }

}  // namespace

TEST_CASE("zero fields give zero reports") {
    const auto g = SpaceTimeGrid::interval(1.0, 1.0, 21, 41);
    const SolutionPair zero{ScalarField(g), ScalarField(g)};
    const auto c = CoefficientSet::zero(g);
    const TimeWeightSpec tw{1.0, 2.0, 1.0};
    const auto sw = st_weight(g, 2.0);
    for (const auto& r : {eval_thm21(zero, tw), eval_est21(zero, tw), eval_lem31(zero.u, sw, 1), eval_lem32(zero.u, sw, -1),
                          eval_thm32(zero, c, sw), eval_est42(zero.v, zero.v, tw), eval_est44(zero.u, zero.u, tw)}) {
        CHECK(r.lhs_total == 0.0);
        CHECK(r.rhs_total == 0.0);
        CHECK_FALSE(r.ratio.has_value());
        CHECK_FALSE(r.violation_candidate);
    }
}

TEST_CASE("double-exponential estimate itemizes every term") {
    const auto g = SpaceTimeGrid::interval(1.0, 1.0, 41, 81);
    const auto r = eval_thm21(heat_pair(g), TimeWeightSpec{2.0, 1.0, 1.0});
    CHECK(r.lhs_terms.size() == 12);
    CHECK(r.rhs_terms.size() == 4);
    check_totals(r);
    REQUIRE(r.ratio);
    CHECK(std::isfinite(*r.ratio));
    CHECK(r.log_normalization == doctest::Approx(2.0 * std::exp(2.0)));
}

TEST_CASE("heat-mode ratio is mesh stable") {
    const TimeWeightSpec w{2.0, 5.0, 1.0};
    const auto coarse = eval_thm21(heat_pair(SpaceTimeGrid::interval(1.0, 1.0, 101, 201)), w);
    const auto fine = eval_thm21(heat_pair(SpaceTimeGrid::interval(1.0, 1.0, 201, 401)), w);
    // Recorded value on the fine mesh.
    CHECK(*fine.ratio == doctest::Approx(0.02626).epsilon(0.01));
    CHECK(*coarse.ratio == doctest::Approx(*fine.ratio).epsilon(0.2));
}

TEST_CASE("ratios are invariant under rescaling and renormalization") {
    const auto g = SpaceTimeGrid::interval(1.0, 1.0, 21, 81);
    const auto sys = manufactured_pair(g, manufactured_suite(g, 1, 3, 0.5, 0.5)[0]);
    const auto F10 = scaled(10, sys.coeffs.F), G10 = scaled(10, sys.coeffs.G);
    const SolutionPair p10{scaled(10, sys.pair.u), scaled(10, sys.pair.v)};
    TimeWeightSpec w{1.0, 1.5, 1.0};

    const auto a = eval_thm21(sys.pair, w, {&sys.coeffs.F, &sys.coeffs.G});
    const auto b = eval_thm21(p10, w, {&F10, &G10});
    for (std::size_t i = 0; i < a.lhs_terms.size(); ++i)
        CHECK(b.lhs_terms[i].value == doctest::Approx(100 * a.lhs_terms[i].value).epsilon(1e-12));
    CHECK(*b.ratio == doctest::Approx(*a.ratio).epsilon(1e-10));

    const auto sw = st_weight(g, 2.0);
    auto c10 = sys.coeffs;
    c10.F = F10;
    c10.G = G10;
    CHECK(*eval_thm32(p10, c10, sw).ratio == doctest::Approx(*eval_thm32(sys.pair, sys.coeffs, sw).ratio).epsilon(1e-10));
    CHECK(*eval_lem31(p10.v, sw, -1).ratio == doctest::Approx(*eval_lem31(sys.pair.v, sw, -1).ratio).epsilon(1e-10));

    for (auto id : {EstimateId::THM21, EstimateId::EST21}) {
        auto eval = [&](const TimeWeightSpec& ws) {
            return id == EstimateId::THM21 ? eval_thm21(sys.pair, ws, {&sys.coeffs.F, &sys.coeffs.G})
                                           : eval_est21(sys.pair, ws, {&sys.coeffs.F, &sys.coeffs.G});
        };
        TimeWeightSpec half = w;
        half.normalization_ref = 0.5 * std::exp(1.0);
        const auto x = eval(w), y = eval(half);
        CHECK(std::abs(*x.ratio - *y.ratio) <= 1e-12 * *x.ratio);
        CHECK(y.log_normalization == doctest::Approx(2 * 1.5 * 0.5 * std::exp(1.0)));
    }
}

TEST_CASE("fixed-lambda reduction with vanishing data") {
    // u(T) = v(T) = 0 and v(0) = 0: every data term is zero, so a nonzero LHS is flagged.
    const auto g = SpaceTimeGrid::interval(1.0, 1.0, 21, 41);
    SolutionPair p{ScalarField::sample(g, [](double x, double, double t) { return (1 - t) * std::cos(pi * x); }),
                   ScalarField::sample(g, [](double x, double, double t) { return t * (1 - t) * std::cos(pi * x); })};
    const auto r = eval_est21(p, TimeWeightSpec{1.0, 1.0, 1.0});
    CHECK(r.rhs_total <= 1e-28);
    CHECK(r.lhs_total > 0.0);
    CHECK(r.violation_candidate);
    check_totals(r);
}

TEST_CASE("C1 fit and the balanced s*") {
    const double T = 1.0, eps = 0.1, M = 2.0, D = 0.05, lambda = 1.0;
    const double m0 = mu0(lambda, eps);
    std::vector<EstimateReport> reports;
    for (double s : {1.0, 2.0, 3.0, 4.0}) {
        EstimateReport r;
        r.id = EstimateId::EST21;
        r.s = s;
        r.lambda = lambda;
        r.log_normalization = 2.0 * s * std::exp(lambda * T);
        const double terminal = 0.7 * std::exp(3.0 * s) * D * D * std::exp(2 * s * (m0 + 1)) / std::exp(r.log_normalization);
        r.rhs_terms = {{"v_T", 0.25 * terminal}, {"u_T", 0.25 * terminal}, {"grad_u_T", 0.5 * terminal}, {"grad_v_0", 1.0}};
        r.lhs_terms = {{"u", 1.0}};
        finalize(r);
        reports.push_back(r);
    }
    const auto b = eval_est22_bound(reports, T, eps, M, D, 0.3);
    CHECK(b.c1 == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(b.theta == doctest::Approx(2 * m0 / (3.0 + 2 * m0)).epsilon(1e-12));
    REQUIRE(b.s_star);
    CHECK(*b.s_star == doctest::Approx(2.0 / (3.0 + 2 * m0) * std::log(M / D)).epsilon(1e-12));
    REQUIRE(b.branch_balance);
    CHECK(*b.branch_balance <= 0.05);
    CHECK(b.holds);

    // Shrinking branch: the fitted exponent is clamped at zero.
    for (auto& r : reports) {
        for (auto& t : r.rhs_terms)
            if (t.name != "grad_v_0") t.value *= std::exp(-6.0 * r.s);
        finalize(r);
    }
    const auto c = eval_est22_bound(reports, T, eps, M, D, 0.3);
    CHECK(c.c1_raw_slope < 0.0);
    CHECK(c.c1 == 0.0);
    CHECK_THROWS_AS(eval_est22_bound({reports[0]}, T, eps, M, D, 0.3), ContractViolation);
}

TEST_CASE("C1 fit on a solved system is nonnegative") {
    const auto g = SpaceTimeGrid::interval(1.0, 1.0, 41, 201);
    const auto pair = heat_pair(g);
    std::vector<EstimateReport> reports;
    for (double s : {0.5, 1.0, 1.5, 2.0}) reports.push_back(eval_est21(pair, TimeWeightSpec{1.0, s, 1.0}));
    const auto uT = pair.u.slice(g.nt() - 1);
    const double D = spatial_norm(uT, SpaceNorm::H1) + spatial_norm(pair.v.slice(g.nt() - 1), SpaceNorm::L2);
    const auto b = eval_est22_bound(reports, 1.0, 0.1, 2.0, D, 1.0);
    CHECK(b.c1 >= 0.0);
    CHECK(b.theta > 0.0);
    CHECK(b.theta < 1.0);
}

TEST_CASE("interior-data lemma: reversal symmetry and boundedness") {
    const auto g = SpaceTimeGrid::interval(1.0, 1.0, 41, 81);
    const auto f = sample_modes(g, {forward_heat_mode(g, {1, 0})});
    for (double s : {0.5, 2.0, 8.0}) {
        const auto w = st_weight(g, s);
        CHECK(lem31_reversal_defect(f, w).defect <= 1e-12);
        const auto a = eval_lem32(f, w, 1);
        const auto b = eval_lem32(time_reverse(f), w, -1);
        for (std::size_t i = 0; i < a.lhs_terms.size(); ++i)
            CHECK(a.lhs_terms[i].value == doctest::Approx(b.lhs_terms[i].value).epsilon(1e-12));
        CHECK(*a.ratio == doctest::Approx(*b.ratio).epsilon(1e-12));
    }
    // Endpoint levels carry no weight.
    auto spiked = f;
    for (double& x : spiked.level(0)) x += 1e6;
    for (double& x : spiked.level(g.nt() - 1)) x += 1e6;
    const auto w = st_weight(g, 2.0);
    CHECK(eval_lem31(spiked, w, -1).lhs("mass") == doctest::Approx(eval_lem31(f, w, -1).lhs("mass")).epsilon(1e-12));
}

TEST_CASE("interior-data lemmas on a heat mode: bounded and mesh stable") {
    auto ratios = [](int nx, int nt, EstimateId id) {
        const auto g = SpaceTimeGrid::interval(1.0, 1.0, nx, nt);
        const auto f = sample_modes(g, {forward_heat_mode(g, {1, 0})});
        std::vector<double> out;
        for (double s : {2.0, 4.0, 6.0, 8.0}) {
            const auto w = st_weight(g, s);
            out.push_back(*(id == EstimateId::LEM31 ? eval_lem31(f, w, -1) : eval_lem32(f, w, -1)).ratio);
        }
        return out;
    };
    for (auto id : {EstimateId::LEM31, EstimateId::LEM32}) {
        const auto coarse = ratios(41, 81, id), fine = ratios(81, 161, id);
        for (std::size_t i = 0; i < fine.size(); ++i) {
            CHECK(std::isfinite(fine[i]));
            CHECK(coarse[i] == doctest::Approx(fine[i]).epsilon(0.2));
            CHECK(fine[i] <= 1.1 * fine[0]);
        }
    }
}

TEST_CASE("coupled interior estimate: sub-bounds and absorption") {
    const auto g = SpaceTimeGrid::interval(1.0, 1.0, 41, 81);
    const auto suite = manufactured_suite(g, 4, 1, 0.5, 0.5);
    for (const auto& spec : suite) {
        const auto sys = manufactured_pair(g, spec);
        double prev = std::numeric_limits<double>::infinity();
        for (double s : {1.0, 2.0, 4.0, 8.0, 16.0}) {
            const auto r = eval_thm32(sys.pair, sys.coeffs, st_weight(g, s));
            check_totals(r);
            REQUIRE(r.sub_reports.size() == 3);
            CHECK(r.sub_reports[0].first == "u_bound");
            CHECK(r.sub_reports[1].first == "v_bound");
            CHECK(r.sub_reports[2].first == "v_bound_absorbed");
            CHECK(r.sub_reports[1].second.lhs_total == doctest::Approx(r.sub_reports[2].second.lhs_total));
            CHECK(r.lhs_total == doctest::Approx(r.sub_reports[0].second.lhs_total + r.sub_reports[1].second.lhs_total));
            REQUIRE(r.absorbed_share);
            if (s >= 4.0) CHECK(*r.absorbed_share < prev);
            prev = *r.absorbed_share;
        }
    }
}

TEST_CASE("coupled interior estimate is mesh stable") {
    auto ratio = [](int nx, int nt) {
        const auto g = SpaceTimeGrid::interval(1.0, 1.0, nx, nt);
        const auto sys = manufactured_pair(g, manufactured_suite(g, 1, 1, 0.5, 0.5)[0]);
        return *eval_thm32(sys.pair, sys.coeffs, st_weight(g, 4.0)).ratio;
    };
    CHECK(ratio(41, 81) == doctest::Approx(ratio(81, 161)).epsilon(0.2));
}

TEST_CASE("single-equation estimates on heat modes") {
    const auto g = SpaceTimeGrid::interval(1.0, 1.0, 41, 201);
    const auto p = heat_pair(g);
    const auto Gt = time_derivative(p.v) - laplacian_neumann(p.v);
    const auto Ft = time_derivative(p.u) + laplacian_neumann(p.u);
    double first42 = 0, first44 = 0;
    for (double s : {1.0, 2.0, 3.0, 4.0}) {
        const TimeWeightSpec w{1.0, s, 1.0};
        const auto a = eval_est42(p.v, Gt, w);
        const auto b = eval_est44(p.u, Ft, w);
        check_totals(a);
        check_totals(b);
        if (s == 1.0) {
            first42 = *a.ratio;
            first44 = *b.ratio;
        }
        CHECK(*a.ratio <= 1.1 * first42);
        CHECK(*b.ratio <= 1.1 * first44);
    }
}

TEST_CASE("w1 identities: constant-in-time field") {
    const auto g = SpaceTimeGrid::interval(1.0, 1.0, 21, 41);
    const auto u = ScalarField::sample(g, [](double x, double, double) { return std::cos(pi * x); });
    // With s -> 0 the conjugating factor is flat and w1 = u up to a constant.
    TimeWeightSpec w{1.0, 1e-300, 1.0};
    const auto F = time_derivative(u) + laplacian_neumann(u);
    const auto ids = check_w1_identities(u, F, w);
    CHECK(ids[0].name == "I1");
    CHECK(std::abs(ids[0].lhs) <= 1e-12);
    CHECK(std::abs(ids[0].rhs) <= 1e-12);
    CHECK(ids[0].defect <= 1e-12);
}

TEST_CASE("w1 identities converge at second order") {
    auto run = [](int n) {
        const auto g = SpaceTimeGrid::interval(1.0, 1.0, n, 2 * n - 1);
        const auto u = ScalarField::sample(g, [](double x, double, double t) { return std::cos(pi * x) * std::exp(-t); });
        const auto F = ScalarField::sample(g, [](double x, double, double t) { return -(1 + pi * pi) * std::cos(pi * x) * std::exp(-t); });
        return check_w1_identities(u, F, TimeWeightSpec{1.0, 1.0, 1.0});
    };
    const auto a = run(41), b = run(81);
    REQUIRE(a.size() == 5);
    for (std::size_t i = 0; i < a.size(); ++i) {
        INFO(a[i].name);
        CHECK(a[i].defect <= 1e-3);
        CHECK(a[i].defect / b[i].defect >= 3.0);
        CHECK(a[i].defect / b[i].defect <= 5.0);
    }
}

TEST_CASE("conjugated operator: definition and expansion agree pointwise") {
    // u = cos(pi x) e^{-t}; both sides use phi and its closed-form derivative.
    const TimeWeightSpec w{1.3, 0.7, 1.0};
    for (double t : {0.0, 0.25, 0.6, 1.0})
        for (double x : {0.0, 0.3, 0.8}) {
            const double u = std::cos(pi * x) * std::exp(-t);
            const double ut = -u, lap = -pi * pi * u;
            const double e = std::sqrt(norm_weight(w, t));  // normalized exp(s phi)
            const double phi = phi_t(w, t);
            const double definition = e * (ut + lap);
            const double w1 = e * u;
            const double w1t = w.s * w.lambda * phi * w1 + e * ut;
            const double expanded = w1t - w.s * w.lambda * phi * w1 + e * lap;
            CHECK(std::abs(definition - expanded) <= 1e-10 * (std::abs(definition) + 1e-300));
        }
}

TEST_CASE("sweep assembly") {
    const auto g = SpaceTimeGrid::interval(1.0, 1.0, 21, 81);
    const auto pair = heat_pair(g);
    Evaluator eval = [&](double s, double l) { return eval_thm21(pair, TimeWeightSpec{l, s, 1.0}); };

    const auto one = sweep(EstimateId::THM21, eval, {2.0}, {1.0});
    REQUIRE(one.reports.size() == 1);
    CHECK(*one.reports[0].ratio == *eval(2.0, 1.0).ratio);

    const auto many = sweep(EstimateId::THM21, eval, {4.0, 1.0, 2.0}, {2.0, 1.0}, 4);
    REQUIRE(many.reports.size() == 6);
    for (std::size_t i = 1; i < many.reports.size(); ++i) {
        const auto& a = many.reports[i - 1];
        const auto& b = many.reports[i];
        CHECK((a.lambda < b.lambda || (a.lambda == b.lambda && a.s < b.s)));
    }
    for (const auto& r : many.reports) CHECK(std::isfinite(*r.ratio));
    const auto serial = sweep(EstimateId::THM21, eval, {4.0, 1.0, 2.0}, {2.0, 1.0}, 1);
    for (std::size_t i = 0; i < 6; ++i) CHECK(serial.reports[i].lhs_total == many.reports[i].lhs_total);
    CHECK(many.max_ratio >= *many.reports[0].ratio);
    CHECK_THROWS_AS(sweep(EstimateId::EST21, eval, {1.0}, {1.0}), ContractViolation);
    CHECK_THROWS_AS(sweep(EstimateId::THM21, eval, {1.0, 1.0}, {1.0}), ContractViolation);
}

TEST_CASE("sweep C1 on exact exponential growth") {
    Evaluator eval = [](double s, double l) {
        EstimateReport r;
        r.s = s;
        r.lambda = l;
        r.log_normalization = 0.5 * s;
        r.rhs_terms = {{"data", 1.7 * std::exp(3.0 * s - 0.5 * s)}};
        r.lhs_terms = {{"x", 1.0}};
        finalize(r);
        return r;
    };
    const auto res = sweep(EstimateId::THM21, eval, {1, 2, 3, 5, 8}, {1.0});
    CHECK(res.c1 == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(fit_log_linear({0, 1, 2}, {1, 3, 5}).first == doctest::Approx(2.0));
}

TEST_CASE("s0 calibration") {
    using Member = std::function<std::optional<double>(double)>;
    const std::vector<double> cands{0.5, 1, 2, 4, 8};
    CHECK(*calibrate_s0({Member([](double s) { return 1.0 / s; })}, cands) == 0.5);
    // Bump peaking at s = 2: ratios only fall from the peak on.
    Member bump = [](double s) { return 1.0 + 5.0 * std::exp(-(s - 2) * (s - 2)); };
    CHECK(*calibrate_s0({bump}, cands) == 2.0);
    CHECK_FALSE(calibrate_s0({Member([](double s) { return s; })}, cands).has_value());
    // A member without a ratio never qualifies.
    CHECK_FALSE(calibrate_s0({Member([](double) { return std::nullopt; })}, cands).has_value());
    CHECK(*calibrate_s0({bump, Member([](double s) { return 1.0 / s; })}, cands, {2, 3, 4}, 1.1, 3) == 2.0);
}

TEST_CASE("estimate ids round-trip") {
    for (auto id : {EstimateId::THM21, EstimateId::EST21, EstimateId::LEM31, EstimateId::LEM32, EstimateId::THM32,
                    EstimateId::EST42, EstimateId::EST44})
        CHECK(estimate_id_from_string(to_string(id)) == id);
    CHECK_THROWS_AS(estimate_id_from_string("THM99"), ContractViolation);
}
