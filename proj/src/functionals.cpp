#include "cmfg/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cmfg/errors.hpp"
#include "cmfg/operators.hpp"
#include "cmfg/parallel.hpp"
#include "cmfg/quadrature.hpp"

namespace cmfg {
namespace {

ScalarField sq(const ScalarField& f) { return hadamard(f, f); }

double sq_space(const SpatialField& f) {
    SpatialField p = f;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = f[i] * f[i];
    return integrate_space(p);
}

double grad_sq_space(const SpatialField& f) { return integrate_space(grad_squared(f)); }

// f(p, k) * c[k] integrated over Q.
double integrate_levels(const ScalarField& f, const std::vector<double>& c) {
    ScalarField g = f;
    for (int k = 0; k < g.grid().nt(); ++k)
        for (double& x : g.level(k)) x *= c[k];
    return integrate_Q(g);
}

// Time-weight bookkeeping shared by the double-exponential estimates.
struct TimeWeight {
    const TimeWeightSpec& spec;
    TimeWeightLevels lv;
    double e0;    // normalized exp(2 s phi(0))
    double eT;    // normalized exp(2 s phi(T))
    double phiT;

    TimeWeight(const TimeWeightSpec& w, const SpaceTimeGrid& g)
        : spec(w), lv(time_weight_levels(w, g)) {
        w.validate();
        if (std::abs(g.final_time() - w.T) > 1e-12 * w.T)
            throw ContractViolation("time weight horizon differs from the grid");
        e0 = norm_exp(w, phi_t(w, 0.0));
        eT = norm_exp(w, phi_t(w, w.T));
        phiT = phi_t(w, w.T);
    }

    // Integral of f * coef(phi) * weight.
    template <class Fn>
    double q(const ScalarField& f, Fn coef) const {
        std::vector<double> c(lv.phi.size());
        for (std::size_t k = 0; k < c.size(); ++k) c[k] = coef(lv.phi[k]) * lv.weight[k];
        return integrate_levels(f, c);
    }
};

void init(EstimateReport& r, EstimateId id, double s, double lambda, double log_norm) {
    r.id = id;
    r.s = s;
    r.lambda = lambda;
    r.log_normalization = log_norm;
}

// Space-time weight bookkeeping shared by the interior-data estimates.
struct SpaceTimeWeight {
    SpaceTimeWeightSpec spec;
    SpaceTimeWeightFields fields;
    SubdomainMask omega;

    SpaceTimeWeight(const SpaceTimeWeightSpec& w, const SpaceTimeGrid& g)
        : spec(normalized(w, g)), fields(space_time_weight_fields(spec, g)),
          omega(g, w.eta.omega_lo(), w.eta.omega_hi()) {
        if (std::abs(g.final_time() - w.T) > 1e-12 * w.T)
            throw ContractViolation("space-time weight horizon differs from the grid");
    }

    static SpaceTimeWeightSpec normalized(SpaceTimeWeightSpec w, const SpaceTimeGrid& g) {
        w.validate();
        if (w.eta.dim() != g.dim()) throw ContractViolation("eta dimension differs from the grid");
        if (!w.normalization_ref) w.normalization_ref = alpha_max(w, g);
        return w;
    }

    double log_norm() const { return 2.0 * spec.s * *spec.normalization_ref; }

    // (s varphi)^p * weight; zero where the weight vanishes.
    ScalarField coef(int p) const {
        ScalarField c(fields.weight.grid());
        auto out = c.values();
        const auto phi = fields.varphi.values();
        const auto w = fields.weight.values();
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = w[i] == 0.0 ? 0.0 : std::pow(spec.s * phi[i], p) * w[i];
        return c;
    }

    double q(const ScalarField& f, int p, bool on_omega = false) const {
        return integrate_Q(hadamard(f, coef(p)), on_omega ? &omega : nullptr);
    }
};

ScalarField heat_operator(const ScalarField& f, int sign) {
    if (sign != 1 && sign != -1) throw ContractViolation("sign must be +1 or -1");
    auto lap = laplacian_neumann(f);
    lap *= static_cast<double>(sign);
    return time_derivative(f) + lap;
}

double ratio_defect(double a, double b, double floor) { return std::abs(a - b) / (std::abs(a) + std::abs(b) + floor); }

// Time derivative of phi divided by phi.
double phi_rate(const TimeWeightSpec& w) {
    return w.direction == TimeDirection::Increasing ? w.lambda : -w.lambda;
}

}  // namespace

const char* to_string(EstimateId id) {
    switch (id) {
        case EstimateId::THM21: return "THM21";
        case EstimateId::EST21: return "EST21";
        case EstimateId::LEM31: return "LEM31";
        case EstimateId::LEM32: return "LEM32";
        case EstimateId::THM32: return "THM32";
        case EstimateId::EST42: return "EST42";
        case EstimateId::EST44: return "EST44";
    }
    return "?";
}

EstimateId estimate_id_from_string(const std::string& name) {
    for (auto id : {EstimateId::THM21, EstimateId::EST21, EstimateId::LEM31, EstimateId::LEM32, EstimateId::THM32,
                    EstimateId::EST42, EstimateId::EST44})
        if (name == to_string(id)) return id;
    throw ContractViolation("unknown estimate id '" + name + "'");
}

double EstimateReport::lhs(const std::string& name) const {
    for (const auto& t : lhs_terms)
        if (t.name == name) return t.value;
    throw ContractViolation("no lhs term '" + name + "'");
}

double EstimateReport::rhs(const std::string& name) const {
    for (const auto& t : rhs_terms)
        if (t.name == name) return t.value;
    throw ContractViolation("no rhs term '" + name + "'");
}

void finalize(EstimateReport& r) {
    r.lhs_total = 0.0;
    r.rhs_total = 0.0;
    for (auto& t : r.lhs_terms) {
        if (t.value < 0.0) t.value = 0.0;  // quadrature of a nonnegative integrand; only -0.0 lands here
        r.lhs_total += t.value;
    }
    for (auto& t : r.rhs_terms) {
        if (t.value < 0.0) t.value = 0.0;
        r.rhs_total += t.value;
    }
    r.ratio.reset();
    if (r.rhs_total > 0.0) r.ratio = r.lhs_total / r.rhs_total;
    r.violation_candidate = r.rhs_total == 0.0 && r.lhs_total > 0.0;
}

EstimateReport eval_thm21(const SolutionPair& pair, const TimeWeightSpec& w, Sources src) {
    const auto& g = pair.u.grid();
    require_same_grid(g, pair.v.grid(), "eval_thm21");
    const TimeWeight tw(w, g);
    const double s = w.s, l = w.lambda;
    const auto& u = pair.u;
    const auto& v = pair.v;
    const auto u0 = u.slice(0), uT = u.slice(g.nt() - 1);
    const auto v0 = v.slice(0), vT = v.slice(g.nt() - 1);

    EstimateReport r;
    init(r, EstimateId::THM21, s, l, 2.0 * s * w.ref());
    r.lhs_terms = {
        {"dt_u", tw.q(sq(time_derivative(u)), [](double) { return 1.0; })},
        {"lap_u", tw.q(sq(laplacian_neumann(u)), [](double) { return 1.0; })},
        {"grad_u", tw.q(grad_squared(u), [&](double p) { return s * l * p; })},
        {"u", tw.q(sq(u), [&](double p) { return s * s * l * l * p * p; })},
        {"dt_v", tw.q(sq(time_derivative(v)), [&](double p) { return 1.0 / (s * p); })},
        {"lap_v", tw.q(sq(laplacian_neumann(v)), [&](double p) { return 1.0 / (s * p); })},
        {"grad_v", tw.q(grad_squared(v), [&](double) { return l; })},
        {"v", tw.q(sq(v), [&](double p) { return s * l * l * p; })},
        {"u_0", s * s * l * sq_space(u0) * tw.e0},
        {"grad_u_0", s * grad_sq_space(u0) * tw.e0},
        {"v_0", s * l * sq_space(v0) * tw.e0},
        {"grad_v_T", grad_sq_space(vT) * tw.eT},
    };
    r.rhs_terms = {
        {"v_T", s * l * tw.phiT * sq_space(vT) * tw.eT},
        {"grad_v_0", grad_sq_space(v0) * tw.e0},
        {"u_T", s * l * l * tw.phiT * tw.phiT * sq_space(uT) * tw.eT},
        {"grad_u_T", s * tw.phiT * grad_sq_space(uT) * tw.eT},
    };
    if (src.F) r.rhs_terms.push_back({"F", tw.q(sq(*src.F), [&](double p) { return s * p; })});
    if (src.G) r.rhs_terms.push_back({"G", tw.q(sq(*src.G), [](double) { return 1.0; })});
    finalize(r);
    return r;
}

EstimateReport eval_est21(const SolutionPair& pair, const TimeWeightSpec& w, Sources src) {
    const auto& g = pair.u.grid();
    require_same_grid(g, pair.v.grid(), "eval_est21");
    const TimeWeight tw(w, g);
    const double s = w.s;
    const auto& u = pair.u;
    const auto& v = pair.v;
    const auto uT = u.slice(g.nt() - 1);
    const auto v0 = v.slice(0), vT = v.slice(g.nt() - 1);
    auto one = [](double) { return 1.0; };

    EstimateReport r;
    init(r, EstimateId::EST21, s, w.lambda, 2.0 * s * w.ref());
    r.lhs_terms = {
        {"lap_u", tw.q(sq(laplacian_neumann(u)), one)},
        {"lap_v", tw.q(sq(laplacian_neumann(v)), [&](double) { return 1.0 / s; })},
        {"dt_u", tw.q(sq(time_derivative(u)), one)},
        {"dt_v", tw.q(sq(time_derivative(v)), [&](double) { return 1.0 / s; })},
        {"grad_u", tw.q(grad_squared(u), [&](double) { return s; })},
        {"grad_v", tw.q(grad_squared(v), one)},
        {"u", tw.q(sq(u), [&](double) { return s * s; })},
        {"v", tw.q(sq(v), [&](double) { return s; })},
    };
    r.rhs_terms = {
        {"v_T", s * sq_space(vT) * tw.eT},
        {"u_T", s * sq_space(uT) * tw.eT},
        {"grad_u_T", grad_sq_space(uT) * tw.eT},
        {"grad_v_0", grad_sq_space(v0) * tw.e0},
    };
    if (src.F) r.rhs_terms.push_back({"F", tw.q(sq(*src.F), [&](double) { return s; })});
    if (src.G) r.rhs_terms.push_back({"G", tw.q(sq(*src.G), one)});
    finalize(r);
    return r;
}

Est22Bound eval_est22_bound(const std::vector<EstimateReport>& sweep, double T, double eps, double M, double D,
                            double lhs_eps) {
    if (sweep.size() < 2) throw ContractViolation("C1 fit needs at least two sweep points");
    if (!(M > 0.0) || !(D >= 0.0)) throw DomainError("need M > 0 and D >= 0");
    if (!(eps > 0.0 && eps < T)) throw DomainError("eps must lie in (0, T)");
    const double lambda = sweep.front().lambda;
    Est22Bound b;
    b.mu0 = mu0(lambda, eps);
    b.lhs_eps = lhs_eps;

    std::vector<double> xs, ys;
    for (const auto& r : sweep) {
        if (r.id != EstimateId::EST21) throw ContractViolation("C1 fit expects EST21 reports");
        if (r.lambda != lambda) throw ContractViolation("C1 fit expects a single lambda");
        const double terminal = r.rhs("v_T") + r.rhs("u_T") + r.rhs("grad_u_T");
        if (!(terminal > 0.0) || !(D > 0.0)) continue;
        xs.push_back(r.s);
        // log of the terminal branch divided by D^2 exp(2 s (mu0 + 1)).
        ys.push_back(std::log(terminal) + r.log_normalization - 2.0 * std::log(D) - 2.0 * r.s * (b.mu0 + 1.0));
    }
    if (xs.size() >= 2) b.c1_raw_slope = fit_log_linear(xs, ys).first;
    b.c1 = std::max(0.0, b.c1_raw_slope);
    // C1 = 0 is the Lipschitz limit theta = 1 of the same formulas.
    b.theta = b.c1 > 0.0 ? theta_exponent(b.c1, b.mu0) : 1.0;

    double least = std::numeric_limits<double>::infinity();
    for (const auto& r : sweep)
        least = std::min(least, std::exp(b.c1 * r.s) * D * D + M * M * std::exp(-2.0 * r.s * b.mu0));
    if (D > 0.0 && D < M) {
        b.s_star = b.c1 > 0.0 ? s_star(b.c1, b.mu0, M, D) : std::log(M / D) / b.mu0;
        least = std::min(least, std::exp(b.c1 * *b.s_star) * D * D + M * M * std::exp(-2.0 * *b.s_star * b.mu0));
        const double left = std::exp(b.c1 * *b.s_star) * D * D;
        const double right = M * M * std::exp(-2.0 * *b.s_star * b.mu0);
        b.branch_balance = std::abs(left - right) / std::max(left, right);
    }
    b.c_fit = least > 0.0 ? lhs_eps / least : 0.0;
    b.holds = true;
    for (const auto& r : sweep) {
        const double bound = std::exp(b.c1 * r.s) * D * D + M * M * std::exp(-2.0 * r.s * b.mu0);
        if (lhs_eps > b.c_fit * bound * (1.0 + 1e-12)) b.holds = false;
    }
    return b;
}

EstimateReport eval_lem31(const ScalarField& f, const SpaceTimeWeightSpec& w, int sign) {
    const SpaceTimeWeight sw(w, f.grid());
    EstimateReport r;
    init(r, EstimateId::LEM31, w.s, w.lambda, sw.log_norm());
    r.lhs_terms = {
        {"dt", sw.q(sq(time_derivative(f)), -1)},
        {"hess", sw.q(hessian_squared(f), -1)},
        {"grad", sw.q(grad_squared(f), 1)},
        {"mass", sw.q(sq(f), 3)},
    };
    r.rhs_terms = {
        {"operator", sw.q(sq(heat_operator(f, sign)), 0)},
        {"omega", sw.q(sq(f), 3, true)},
    };
    finalize(r);
    return r;
}

EstimateReport eval_lem32(const ScalarField& f, const SpaceTimeWeightSpec& w, int sign) {
    const SpaceTimeWeight sw(w, f.grid());
    EstimateReport r;
    init(r, EstimateId::LEM32, w.s, w.lambda, sw.log_norm());
    r.lhs_terms = {
        {"dt", sw.q(sq(time_derivative(f)), 0)},
        {"hess", sw.q(hessian_squared(f), 0)},
        {"grad", sw.q(grad_squared(f), 2)},
        {"mass", sw.q(sq(f), 4)},
    };
    r.rhs_terms = {
        {"operator", sw.q(sq(heat_operator(f, sign)), 1)},
        {"omega", sw.q(sq(f), 4, true)},
    };
    finalize(r);
    return r;
}

EstimateReport eval_thm32(const SolutionPair& pair, const CoefficientSet& coeffs, const SpaceTimeWeightSpec& w) {
    const auto& g = pair.u.grid();
    require_same_grid(g, pair.v.grid(), "eval_thm32");
    require_same_grid(g, coeffs.grid(), "eval_thm32");
    const SpaceTimeWeight sw(w, g);
    const auto& u = pair.u;
    const auto& v = pair.v;
    const auto u2 = sq(u), v2 = sq(v), gu2 = grad_squared(u), gv2 = grad_squared(v);

    const std::vector<Term> u_terms = {
        {"dt_u", sw.q(sq(time_derivative(u)), 0)},
        {"hess_u", sw.q(hessian_squared(u), 0)},
        {"grad_u", sw.q(gu2, 2)},
        {"u", sw.q(u2, 4)},
    };
    const std::vector<Term> v_terms = {
        {"dt_v", sw.q(sq(time_derivative(v)), -1)},
        {"hess_v", sw.q(hessian_squared(v), -1)},
        {"grad_v", sw.q(gv2, 1)},
        {"v", sw.q(v2, 3)},
    };
    const double F = sw.q(sq(coeffs.F), 1);
    const double G = sw.q(sq(coeffs.G), 0);
    const double om_u = sw.q(u2, 4, true);
    const double om_v = sw.q(v2, 3, true);
    const double lower_u = sw.q(gu2 + u2 + v2, 1);
    const double lower_v = sw.q(u2 + gu2 + v2 + gv2, 0);

    auto sub = [&](std::vector<Term> lhs, std::vector<Term> rhs) {
        EstimateReport s;
        init(s, EstimateId::THM32, w.s, w.lambda, sw.log_norm());
        s.lhs_terms = std::move(lhs);
        s.rhs_terms = std::move(rhs);
        finalize(s);
        return s;
    };

    EstimateReport r;
    init(r, EstimateId::THM32, w.s, w.lambda, sw.log_norm());
    r.lhs_terms = u_terms;
    r.lhs_terms.insert(r.lhs_terms.end(), v_terms.begin(), v_terms.end());
    r.rhs_terms = {{"F", F}, {"G", G}, {"omega_u", om_u}, {"omega_v", om_v}};
    finalize(r);

    r.sub_reports.emplace_back("u_bound", sub(u_terms, {{"F", F}, {"lower", lower_u}, {"omega_u", om_u}}));
    r.sub_reports.emplace_back(
        "v_bound", sub(v_terms, {{"G", G}, {"lower", lower_v}, {"lap_u", sw.q(sq(laplacian_neumann(u)), 0)}, {"omega_v", om_v}}));
    r.sub_reports.emplace_back(
        "v_bound_absorbed",
        sub(v_terms, {{"F", F}, {"G", G}, {"lower", sw.q(u2 + gu2, 1)}, {"omega_u", om_u}, {"omega_v", om_v}}));
    if (r.lhs_total > 0.0) r.absorbed_share = (lower_u + lower_v) / r.lhs_total;
    return r;
}

EstimateReport eval_est42(const ScalarField& v, const ScalarField& G, const TimeWeightSpec& w) {
    const auto& g = v.grid();
    require_same_grid(g, G.grid(), "eval_est42");
    const TimeWeight tw(w, g);
    const double s = w.s, l = w.lambda;
    const auto v0 = v.slice(0), vT = v.slice(g.nt() - 1);
    EstimateReport r;
    init(r, EstimateId::EST42, s, l, 2.0 * s * w.ref());
    r.lhs_terms = {
        {"dt_v", tw.q(sq(time_derivative(v)), [&](double p) { return 1.0 / (s * p); })},
        {"lap_v", tw.q(sq(laplacian_neumann(v)), [&](double p) { return 1.0 / (s * p); })},
        {"grad_v", tw.q(grad_squared(v), [&](double) { return l; })},
        {"v", tw.q(sq(v), [&](double p) { return s * l * l * p; })},
        {"v_0", s * l * sq_space(v0) * tw.e0},
        {"grad_v_T", grad_sq_space(vT) * tw.eT},
    };
    r.rhs_terms = {
        {"G", tw.q(sq(G), [](double) { return 1.0; })},
        {"v_T", s * l * tw.phiT * sq_space(vT) * tw.eT},
        {"grad_v_0", grad_sq_space(v0) * tw.e0},
    };
    finalize(r);
    return r;
}

EstimateReport eval_est44(const ScalarField& u, const ScalarField& F, const TimeWeightSpec& w) {
    const auto& g = u.grid();
    require_same_grid(g, F.grid(), "eval_est44");
    const TimeWeight tw(w, g);
    const double s = w.s, l = w.lambda;
    const auto u0 = u.slice(0), uT = u.slice(g.nt() - 1);
    EstimateReport r;
    init(r, EstimateId::EST44, s, l, 2.0 * s * w.ref());
    r.lhs_terms = {
        {"dt_u", tw.q(sq(time_derivative(u)), [&](double p) { return 1.0 / (s * p); })},
        {"lap_u", tw.q(sq(laplacian_neumann(u)), [&](double p) { return 1.0 / (s * p); })},
        {"grad_u", tw.q(grad_squared(u), [&](double) { return l; })},
        {"u", tw.q(sq(u), [&](double p) { return s * l * l * p; })},
        {"u_0", s * l * sq_space(u0) * tw.e0},
        {"grad_u_0", grad_sq_space(u0) * tw.e0},
    };
    r.rhs_terms = {
        {"F", tw.q(sq(F), [](double) { return 1.0; })},
        {"u_T", s * l * tw.phiT * sq_space(uT) * tw.eT},
        {"grad_u_T", grad_sq_space(uT) * tw.eT},
    };
    finalize(r);
    return r;
}

std::vector<IdentityDefect> check_w1_identities(const ScalarField& u, const ScalarField& F, const TimeWeightSpec& w,
                                                double floor) {
    const auto& g = u.grid();
    require_same_grid(g, F.grid(), "check_w1_identities");
    w.validate();
    const int nt = g.nt();
    const double s = w.s, rate = phi_rate(w), ref = w.ref();
    const double T = g.final_time(), tau = g.tau();

    std::vector<double> phi(nt), e(nt);
    for (int k = 0; k < nt; ++k) {
        phi[k] = phi_t(w, g.t(k));
        e[k] = std::exp(s * (phi[k] - ref));
    }
    auto per_level = [&](const ScalarField& f, auto fn) {
        ScalarField out = f;
        for (int k = 0; k < nt; ++k)
            for (double& x : out.level(k)) x *= fn(k);
        return out;
    };
    const auto w1 = per_level(u, [&](int k) { return e[k]; });
    const auto dtw = time_derivative(w1);
    const auto lapw = laplacian_neumann(w1);
    std::vector<IdentityDefect> out;

    {
        const double lap_form = 2.0 * integrate_Q(hadamard(dtw, lapw));
        const auto gd = gradient_neumann(dtw);
        const auto gw = gradient_neumann(w1);
        ScalarField dot(g);
        for (std::size_t a = 0; a < gd.size(); ++a) dot += hadamard(gd[a], gw[a]);
        const double grad_form = -2.0 * integrate_Q(dot);
        const double boundary = grad_sq_space(w1.slice(0)) - grad_sq_space(w1.slice(nt - 1));
        out.push_back({"I1", lap_form, boundary, ratio_defect(lap_form, boundary, floor)});
        out.push_back({"I1_green", lap_form, grad_form, ratio_defect(lap_form, grad_form, floor)});
    }
    {
        const double lhs = -integrate_Q(per_level(hadamard(w1, dtw), [&](int k) { return 2.0 * s * w.lambda * phi[k]; }));
        const auto w2 = sq(w1);
        const double bracket = s * w.lambda * (phi[0] * integrate_space(w2.slice(0)) - phi[nt - 1] * integrate_space(w2.slice(nt - 1)));
        const double rhs = bracket + integrate_Q(per_level(w2, [&](int k) { return s * w.lambda * rate * phi[k]; }));
        out.push_back({"I2", lhs, rhs, ratio_defect(lhs, rhs, floor)});
    }
    // Vector identities are compared in L2 over the interior levels.
    auto vec_defect = [&](const char* name, const ScalarField& a, const ScalarField& b) {
        const double na = l2_norm(a, tau, T - tau), nb = l2_norm(b, tau, T - tau);
        return IdentityDefect{name, na, nb, l2_norm(a - b, tau, T - tau) / (na + nb + floor)};
    };
    {
        const auto back = per_level(w1, [&](int k) { return 1.0 / e[k]; });
        const auto definition = per_level(time_derivative(back) + laplacian_neumann(back), [&](int k) { return e[k]; });
        const auto expanded = dtw - per_level(w1, [&](int k) { return s * rate * phi[k]; }) + lapw;
        out.push_back(vec_defect("conjugation", definition, expanded));
    }
    {
        const auto u1 = per_level(u, [&](int k) { return std::sqrt(phi[k]); });
        const auto lhs = time_derivative(u1) + laplacian_neumann(u1);
        const auto rhs = per_level(F, [&](int k) { return std::sqrt(phi[k]); }) +
                         per_level(u, [&](int k) { return 0.5 * rate * std::sqrt(phi[k]); });
        out.push_back(vec_defect("substitution", lhs, rhs));
    }
    return out;
}

IdentityDefect lem31_reversal_defect(const ScalarField& f, const SpaceTimeWeightSpec& w, double floor) {
    const auto a = eval_lem31(f, w, +1);
    const auto b = eval_lem31(time_reverse(f), w, -1);
    IdentityDefect d{"lem31_reversal", a.lhs_total + a.rhs_total, b.lhs_total + b.rhs_total, 0.0};
    for (std::size_t i = 0; i < a.lhs_terms.size(); ++i)
        d.defect = std::max(d.defect, ratio_defect(a.lhs_terms[i].value, b.lhs_terms[i].value, floor));
    for (std::size_t i = 0; i < a.rhs_terms.size(); ++i)
        d.defect = std::max(d.defect, ratio_defect(a.rhs_terms[i].value, b.rhs_terms[i].value, floor));
    return d;
}

std::pair<double, double> fit_log_linear(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ContractViolation("linear fit needs two or more points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw ContractViolation("linear fit needs distinct abscissae");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

SweepResult sweep(EstimateId id, const Evaluator& eval, std::vector<double> s_list, std::vector<double> lambda_list,
                  int threads) {
    if (s_list.empty() || lambda_list.empty()) throw ContractViolation("sweep needs at least one s and one lambda");
    std::sort(s_list.begin(), s_list.end());
    std::sort(lambda_list.begin(), lambda_list.end());
    if (std::adjacent_find(s_list.begin(), s_list.end()) != s_list.end() ||
        std::adjacent_find(lambda_list.begin(), lambda_list.end()) != lambda_list.end())
        throw ContractViolation("sweep values must be distinct");

    SweepResult out;
    out.id = id;
    out.reports.resize(s_list.size() * lambda_list.size());
    parallel_for(out.reports.size(), threads, [&](std::size_t i) {
        const double l = lambda_list[i / s_list.size()];
        const double s = s_list[i % s_list.size()];
        out.reports[i] = eval(s, l);
        if (out.reports[i].id != id) throw ContractViolation("evaluator returned a different estimate");
    });

    for (std::size_t row = 0; row < lambda_list.size(); ++row) {
        std::vector<double> xs, ys;
        for (std::size_t c = 0; c < s_list.size(); ++c) {
            const auto& r = out.reports[row * s_list.size() + c];
            if (r.rhs_total > 0.0) {
                xs.push_back(r.s);
                ys.push_back(std::log(r.rhs_total) + r.log_normalization);
            }
        }
        const double c1 = xs.size() >= 2 ? std::max(0.0, fit_log_linear(xs, ys).first) : 0.0;
        out.c1_by_lambda.emplace_back(lambda_list[row], c1);
        out.c1 = std::max(out.c1, c1);
    }
    for (const auto& r : out.reports)
        if (r.ratio) out.max_ratio = std::max(out.max_ratio, *r.ratio);
    return out;
}

std::optional<double> calibrate_s0(const std::vector<std::function<std::optional<double>(double)>>& members,
                                   const std::vector<double>& candidates, const std::vector<double>& multiples,
                                   double tolerance, int threads) {
    if (members.empty() || candidates.empty()) throw ContractViolation("calibration needs members and candidates");
    std::vector<double> points;
    for (double c : candidates) {
        points.push_back(c);
        for (double k : multiples) points.push_back(k * c);
    }
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());

    std::vector<std::optional<double>> ratios(members.size() * points.size());
    parallel_for(ratios.size(), threads, [&](std::size_t i) {
        ratios[i] = members[i / points.size()](points[i % points.size()]);
    });
    auto ratio_at = [&](std::size_t m, double s) {
        const auto it = std::lower_bound(points.begin(), points.end(), s);
        return ratios[m * points.size() + static_cast<std::size_t>(it - points.begin())];
    };

    auto sorted = candidates;
    std::sort(sorted.begin(), sorted.end());
    for (double c : sorted) {
        bool ok = true;
        for (std::size_t m = 0; m < members.size() && ok; ++m) {
            const auto base = ratio_at(m, c);
            if (!base || !std::isfinite(*base)) {
                ok = false;
                break;
            }
            for (double k : multiples) {
                const auto r = ratio_at(m, k * c);
                if (!r || !std::isfinite(*r) || *r > tolerance * *base) {
                    ok = false;
                    break;
                }
            }
        }
        if (ok) return c;
    }
    return std::nullopt;
}

}  // namespace cmfg
