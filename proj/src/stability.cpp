#include "cmfg/stability.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "cmfg/errors.hpp"
#include "cmfg/functionals.hpp"
#include "cmfg/operators.hpp"
#include "cmfg/parallel.hpp"
#include "cmfg/quadrature.hpp"

namespace cmfg {
namespace {

double grad_norm(const SpatialField& f) { return std::sqrt(integrate_space(grad_squared(f))); }

double terminal_size(const SolutionPair& pair) {
    const double T = pair.u.grid().final_time();
    return spatial_norm_at(pair.u, T, SpaceNorm::H1) + spatial_norm_at(pair.v, T, SpaceNorm::L2);
}

SpatialField heat_slice(const SpaceTimeGrid& g, std::array<int, 2> wave, double amplitude) {
    CosineMode m;
    m.amplitude = amplitude;
    m.wave = wave;
    return sample_modes(g, {m}).slice(0);
}

bool strictly_decreasing_in_D(const std::vector<StabilitySample>& s) {
    for (std::size_t i = 1; i < s.size(); ++i)
        if (!(s[i].D < s[i - 1].D)) return false;
    return true;
}

void sort_by_D(std::vector<StabilitySample>& s) {
    std::stable_sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.D > b.D; });
}

PowerLawFit fit_samples(const std::vector<StabilitySample>& s) {
    std::vector<std::pair<double, double>> pairs;
    for (const auto& x : s) pairs.emplace_back(x.D, x.E);
    return fit_power_law(pairs);
}

void validate_box(const SpaceTimeGrid& g, const std::array<double, 4>& box) {
    SubdomainMask(g, {box[0], box[2]}, {box[1], box[3]});
}

SubdomainMask box_mask(const SpaceTimeGrid& g, const std::array<double, 4>& box) {
    return SubdomainMask(g, {box[0], box[2]}, {box[1], box[3]});
}

// Suite member i: random modes from seed + i on the fixed coefficient spec.
ManufacturedSystem suite_member(const SpaceTimeGrid& g, const LipschitzConfig& cfg, std::size_t i) {
    const double amp = cfg.amplitudes[i / static_cast<std::size_t>(cfg.members_per_amplitude)];
    CoefficientSpec modes_seed = cfg.coefficients;
    modes_seed.seed = cfg.seed + i;
    auto spec = random_manufactured_spec(g, cfg.modes, amp, modes_seed);
    spec.coefficients = cfg.coefficients;
    return manufactured_pair(g, spec);
}

void validate_suite(const LipschitzConfig& cfg) {
    if (cfg.amplitudes.empty() || cfg.members_per_amplitude < 1) throw ContractViolation("empty suite");
    for (double a : cfg.amplitudes)
        if (!(a > 0.0)) throw ContractViolation("suite amplitudes must be positive");
    if (cfg.modes < 1) throw ContractViolation("suite needs at least one mode");
}

void check_eps(const SpaceTimeGrid& g, double eps, bool two_sided) {
    const double T = g.final_time();
    if (!(eps > 0.0) || !(two_sided ? 2.0 * eps < T : eps < T))
        throw DomainError("eps must lie in (0, T/2) for interior windows and (0, T) otherwise");
}

}  // namespace

PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& pairs) {
    std::vector<double> x, y;
    for (const auto& [d, e] : pairs) {
        if (!(d > 0.0) || !(e > 0.0)) throw DomainError("power-law fit needs positive D and E");
        x.push_back(std::log(d));
        y.push_back(std::log(e));
    }
    if (x.size() < 2) throw ContractViolation("power-law fit needs two points");
    const auto [p, b] = fit_log_linear(x, y);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        ss_res += std::pow(y[i] - (b + p * x[i]), 2);
        ss_tot += std::pow(y[i] - mean, 2);
    }
    return {p, std::exp(b), ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0};
}

const char* to_string(ExperimentId id) {
    switch (id) {
        case ExperimentId::HOLDER_T11: return "HOLDER_T11";
        case ExperimentId::LIPSCHITZ_T31: return "LIPSCHITZ_T31";
        case ExperimentId::CONDITIONAL_COR: return "CONDITIONAL_COR";
    }
    return "?";
}

ExperimentId experiment_id_from_string(const std::string& name) {
    for (auto id : {ExperimentId::HOLDER_T11, ExperimentId::LIPSCHITZ_T31, ExperimentId::CONDITIONAL_COR})
        if (name == to_string(id)) return id;
    throw ContractViolation("unknown experiment '" + name + "'");
}

StabilityRun holder_experiment(const CoefficientSet& coeffs, const HolderConfig& cfg) {
    coeffs.validate();
    const auto& g = coeffs.grid();
    const double T = g.final_time();
    check_eps(g, cfg.eps, false);
    if (!(cfg.M > 0.0)) throw DomainError("M must be positive");
    if (cfg.D_list.size() < 2) throw ContractViolation("Hoelder run needs at least two D values");
    for (double D : cfg.D_list)
        if (!(D > 0.0 && D < cfg.M)) throw DomainError("D values must lie in (0, M)");
    if (coeffs.F.max_abs() != 0.0 || coeffs.G.max_abs() != 0.0)
        throw ContractViolation("Hoelder run needs zero sources F = G = 0");

    StabilityRun run;
    run.id = ExperimentId::HOLDER_T11;
    run.eps = cfg.eps;
    run.M = cfg.M;
    run.seed = cfg.seed;

    // Base pair, and the additive v(0) mode near the grid cutoff.
    const SpatialField psi_u = heat_slice(g, cfg.u_wave, 1.0);
    const SpatialField psi_v = heat_slice(g, cfg.v_wave, cfg.v_amplitude);
    const SpatialField zero(g);
    std::array<int, 2> high{std::max(1, g.nx() - 2), 0};
    SpatialField v_add = heat_slice(g, high, 1.0);
    v_add = (0.5 * cfg.M / grad_norm(v_add)) * v_add;

    const auto base = solve_coupled(coeffs, psi_u, psi_v, cfg.picard_tol).pair;
    const auto extra = solve_coupled(coeffs, zero, v_add, cfg.picard_tol).pair;
    const int N = g.nt() - 1;
    const SpatialField au = base.u.slice(N), av = base.v.slice(N), bu = extra.u.slice(N), bv = extra.v.slice(N);
    auto data_size = [&](double sigma) {
        return spatial_norm(sigma * au + bu, SpaceNorm::H1) + spatial_norm(sigma * av + bv, SpaceNorm::L2);
    };

    // D(sigma) is convex; bisect on [0, hi].
    std::vector<double> sigmas;
    for (double D : cfg.D_list) {
        if (data_size(0.0) >= D) throw PreconditionError("additive mode alone exceeds the requested data size");
        double lo = 0.0, hi = 1.0;
        while (data_size(hi) < D) hi *= 2.0;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (data_size(mid) < D ? lo : hi) = mid;
        }
        const double sigma = 0.5 * (lo + hi);
        if (sigma * grad_norm(psi_v) > 0.5 * cfg.M)
            throw PreconditionError("scaled base data violates |grad v(0)| <= M");
        sigmas.push_back(sigma);
    }

    std::vector<std::optional<StabilitySample>> out(sigmas.size());
    std::vector<std::string> failures(sigmas.size());
    double grad_max = 0.0;
    std::vector<double> grads(sigmas.size());
    parallel_for(sigmas.size(), cfg.threads, [&](std::size_t i) {
        const SpatialField v0 = sigmas[i] * psi_v + v_add;
        grads[i] = grad_norm(v0);
        try {
            const auto pair = solve_coupled(coeffs, sigmas[i] * psi_u, v0, cfg.picard_tol).pair;
            StabilitySample s;
            s.D = terminal_size(pair);
            s.E = h21_norm(pair.u, cfg.eps, T) + h21_norm(pair.v, cfg.eps, T);
            s.seed = cfg.seed;
            out[i] = s;
        } catch (const DivergenceError& e) {
            failures[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i]) run.samples.push_back(*out[i]);
        else if (!run.aborted) run.aborted = "D = " + std::to_string(cfg.D_list[i]) + ": " + failures[i];
        grad_max = std::max(grad_max, grads[i]);
    }
    run.grad_v0_max = grad_max;
    sort_by_D(run.samples);
    if (run.aborted || run.samples.size() < 2) return run;
    if (!strictly_decreasing_in_D(run.samples)) throw ContractViolation("D values must be distinct");
    run.fit = fit_samples(run.samples);

    // C1 from the EST21 sweep of the base pair, then theta.
    std::vector<EstimateReport> reports;
    for (double s : cfg.s_list) {
        TimeWeightSpec w;
        w.lambda = cfg.lambda;
        w.s = s;
        w.T = T;
        reports.push_back(eval_est21(base, w));
    }
    const double lhs_eps = std::pow(h21_norm(base.u, cfg.eps, T), 2) + std::pow(h21_norm(base.v, cfg.eps, T), 2);
    const auto bound = eval_est22_bound(reports, T, cfg.eps, cfg.M, run.samples.front().D, lhs_eps);
    run.c1 = bound.c1;
    run.mu0 = bound.mu0;
    run.theta_pred = bound.theta;

    const auto& top = run.samples.front();
    run.c_bound = top.E / std::pow(top.D, bound.theta);
    double margin = 0.0;
    for (const auto& s : run.samples) margin = std::max(margin, s.E / (*run.c_bound * std::pow(s.D, bound.theta)));
    run.bound_margin = margin;
    run.bound_holds = margin <= 1.0 + cfg.bound_tolerance;
    return run;
}

StabilityRun lipschitz_experiment(const SpaceTimeGrid& g, const LipschitzConfig& cfg) {
    validate_suite(cfg);
    check_eps(g, cfg.eps, true);
    validate_box(g, cfg.omega);
    const double T = g.final_time();
    const auto mask = box_mask(g, cfg.omega);
    const int k_lo = static_cast<int>(std::ceil(cfg.eps / g.tau() - 1e-9));
    const int k_hi = static_cast<int>(std::floor((T - cfg.eps) / g.tau() + 1e-9));

    const std::size_t n = cfg.amplitudes.size() * static_cast<std::size_t>(cfg.members_per_amplitude);
    std::vector<StabilitySample> samples(n);
    std::vector<double> slice(n);
    parallel_for(n, cfg.threads, [&](std::size_t i) {
        const auto sys = suite_member(g, cfg, i);
        const auto& u = sys.pair.u;
        const auto& v = sys.pair.v;
        const double D = l2_norm(sys.coeffs.F, 0.0, T) + l2_norm(sys.coeffs.G, 0.0, T) + l2_norm(u, 0.0, T, &mask) +
                         l2_norm(v, 0.0, T, &mask);
        samples[i] = {D, h21_norm(u, cfg.eps, T - cfg.eps) + h21_norm(v, cfg.eps, T - cfg.eps), cfg.seed + i};
        double worst = 0.0;
        for (int k = k_lo; k <= k_hi; ++k)
            worst = std::max(worst, (spatial_norm(u.slice(k), SpaceNorm::L2) + spatial_norm(v.slice(k), SpaceNorm::L2)) / D);
        slice[i] = worst;
    });

    StabilityRun run;
    run.id = ExperimentId::LIPSCHITZ_T31;
    run.eps = cfg.eps;
    run.seed = cfg.seed;
    // One constant for the whole suite: the largest slice ratio over members and levels.
    run.slice_constant = *std::max_element(slice.begin(), slice.end());
    run.slice_levels = k_hi - k_lo + 1;
    run.samples = samples;
    sort_by_D(run.samples);
    run.fit = fit_samples(run.samples);

    // Exact scaling family: member 0 with all of (F, G, u, v) multiplied.
    if (cfg.scaling.size() >= 2) {
        std::vector<std::pair<double, double>> pairs;
        for (double f : cfg.scaling) pairs.emplace_back(f * samples[0].D, f * samples[0].E);
        run.scaling_fit = fit_power_law(pairs);
    }
    return run;
}

void check_q_support(const CoefficientSet& coeffs, const std::array<double, 4>& omega) {
    const auto& g = coeffs.grid();
    const auto mask = box_mask(g, omega);
    const int need = 3;
    const int jmax = g.dim() == 2 ? g.ny() - need : 0;
    // Look for a 3-node box (3 per spatial axis, 3 time levels) inside omega where q != 0.
    for (int k = 0; k + need <= g.nt(); ++k)
        for (int j = 0; j <= jmax; ++j)
            for (int i = 0; i + need <= g.nx(); ++i) {
                bool ok = true;
                for (int dk = 0; dk < need && ok; ++dk)
                    for (int dj = 0; dj < (g.dim() == 2 ? need : 1) && ok; ++dj)
                        for (int di = 0; di < need && ok; ++di) {
                            const int ii = i + di, jj = j + dj;
                            ok = mask.contains(ii, jj) && coeffs.q(g.node(ii, jj), k + dk) != 0.0;
                        }
                if (ok) return;
            }
    throw PreconditionError("supp q inside omega contains no box of 3 nodes per axis");
}

StabilityRun conditional_corollary_experiment(const SpaceTimeGrid& g, const CorollaryConfig& cfg) {
    const auto& suite = cfg.suite;
    validate_suite(suite);
    check_eps(g, suite.eps, true);
    validate_box(g, suite.omega);
    const double T = g.final_time();
    {
        const auto first = suite_member(g, suite, 0);
        check_q_support(first.coeffs, suite.omega);
    }

    const std::size_t n = suite.amplitudes.size() * static_cast<std::size_t>(suite.members_per_amplitude);
    std::vector<ManufacturedSystem> members(n);
    parallel_for(n, suite.threads, [&](std::size_t i) { members[i] = suite_member(g, suite, i); });

    auto measure = [&](const ManufacturedSystem& sys, const SubdomainMask& mask) {
        const double D = l2_norm(sys.coeffs.F, 0.0, T) + l2_norm(sys.coeffs.G, 0.0, T) + h21_norm(sys.pair.u, 0.0, T, &mask);
        const double E = h21_norm(sys.pair.u, suite.eps, T - suite.eps) + h21_norm(sys.pair.v, suite.eps, T - suite.eps);
        return std::pair{D, E};
    };

    StabilityRun run;
    run.id = ExperimentId::CONDITIONAL_COR;
    run.eps = suite.eps;
    run.seed = suite.seed;
    const auto mask = box_mask(g, suite.omega);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [D, E] = measure(members[i], mask);
        run.samples.push_back({D, E, suite.seed + i});
    }
    sort_by_D(run.samples);
    run.fit = fit_samples(run.samples);

    for (const auto& box : cfg.nested_omegas) {
        validate_box(g, box);
        check_q_support(members[0].coeffs, box);
        const auto m = box_mask(g, box);
        double c = 0.0;
        for (const auto& sys : members) {
            const auto [D, E] = measure(sys, m);
            c = std::max(c, E / D);
        }
        run.omega_trend.push_back({box, c});
    }

    if (!cfg.deltas.empty()) {
        // Member 0 with sources matched to the implicit scheme, so the noiseless
        // data are exactly consistent with the reconstruction model.
        auto sys = members[0];
        match_scheme_sources(sys.pair, sys.coeffs);
        QRProblem pb = cfg.qr;
        pb.kind = ObservationKind::InteriorUOnly;
        pb.omega = suite.omega;
        run.reconstruction = noise_sweep(pb, sys.coeffs, sys.pair, cfg.deltas, suite.eps, suite.seed, false, suite.threads);
    }
    return run;
}

NoiseSweep noise_sweep(const QRProblem& problem, const CoefficientSet& coeffs, const SolutionPair& truth,
                       std::vector<double> deltas, double eps, std::uint64_t seed, bool discrepancy, int threads) {
    const auto& g = coeffs.grid();
    problem.validate(g);
    const bool terminal = problem.kind == ObservationKind::Terminal;
    check_eps(g, eps, !terminal);
    for (double d : deltas)
        if (!(d > 0.0)) throw ContractViolation("noise levels must be positive");
    std::sort(deltas.begin(), deltas.end(), std::greater<>());
    const double T = g.final_time();
    const double t_hi = terminal ? T : T - eps;
    const auto clean = observe(problem, truth);

    NoiseSweep out;
    out.kind = problem.kind;
    out.points.resize(deltas.size());
    parallel_for(deltas.size(), threads, [&](std::size_t i) {
        QRProblem pb = problem;
        if (discrepancy) pb.noise_level = deltas[i];
        const auto obs = add_noise(pb, clean, deltas[i], seed + i);
        const auto rep = reconstruct_qr(pb, coeffs, obs);
        out.points[i] = {deltas[i], reconstruction_error(rep.pair, truth, eps, t_hi, pb.kind == ObservationKind::InteriorUOnly),
                         rep.proximal_steps, rep.misfit};
    });
    out.strictly_decreasing = true;
    for (std::size_t i = 1; i < out.points.size(); ++i)
        if (!(out.points[i].error < out.points[i - 1].error)) out.strictly_decreasing = false;
    if (out.points.size() >= 2) {
        std::vector<std::pair<double, double>> pairs;
        for (const auto& p : out.points) pairs.emplace_back(p.delta, std::max(p.error, 1e-300));
        out.fit = fit_power_law(pairs);
    }
    return out;
}

}  // namespace cmfg
