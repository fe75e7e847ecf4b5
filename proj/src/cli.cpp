#include "cmfg/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <numbers>

#include "cmfg/config.hpp"
#include "cmfg/errors.hpp"
#include "cmfg/functionals.hpp"
#include "cmfg/operators.hpp"
#include "cmfg/parallel.hpp"
#include "cmfg/quadrature.hpp"
#include "cmfg/stability.hpp"

namespace cmfg {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Output.
// ---------------------------------------------------------------------------
struct Report {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    Json body = Json::object();
    int exit_code = kExitOk;
};

Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

template <class T>
Json opt(const std::optional<T>& x) {
    if (!x) return nullptr;
    if constexpr (std::is_same_v<T, double>) return num(*x);
    else return Json(*x);
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << content;
    out.close();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string header_line(const std::string& sub, std::uint64_t seed, const std::string& hash) {
    return "# schema_version=" + std::to_string(kSchemaVersion) + " subcommand=" + sub +
           " seed=" + std::to_string(seed) + " config_hash=" + hash + "\n";
}

void write_outputs(const fs::path& dir, const std::string& sub, std::uint64_t seed, const std::string& resolved,
                   const Report& rep) {
    const std::string hash = fnv1a_hex(resolved);
    const std::string head = header_line(sub, seed, hash);
    write_file(dir / "resolved_config.txt", head + resolved);

    std::string csv = head;
    for (std::size_t i = 0; i < rep.columns.size(); ++i) csv += (i ? "," : "") + rep.columns[i];
    csv += "\n";
    for (const auto& row : rep.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) csv += (i ? "," : "") + row[i];
        csv += "\n";
    }
    write_file(dir / "report.csv", csv);

    Json h;
    h["schema_version"] = kSchemaVersion;
    h["subcommand"] = sub;
    h["seed"] = seed;
    h["config_hash"] = hash;
    // The header sits on the first line so every output starts with it.
    const std::string json = "{\"header\": " + h.dump() + ",\n\"report\": " + rep.body.dump(2) + "\n}\n";
    write_file(dir / "report.json", json);
}

// ---------------------------------------------------------------------------
// Config readers.
// ---------------------------------------------------------------------------
SpaceTimeGrid read_grid(const Config& c) {
    c.require_block("grid");
    const int dim = c.integer("grid", "dim", 1);
    if (dim != 1 && dim != 2) throw ConfigError("grid.dim: must be 1 or 2");
    const double lx = c.number("grid", "lx", 1.0);
    const double T = c.number("grid", "T", 1.0);
    const int nx = c.integer("grid", "nx");
    const int nt = c.integer("grid", "nt");
    if (dim == 1) return SpaceTimeGrid::interval(lx, T, nx, nt);
    const double ly = c.number("grid", "ly", 1.0);
    const int ny = c.integer("grid", "ny");
    return SpaceTimeGrid::rectangle(lx, ly, T, nx, ny, nt);
}

CoefficientSpec read_coefficient_spec(const Config& c, int dim) {
    CoefficientSpec s;
    const std::string kind = c.text("coefficients", "kind", "random");
    if (kind != "random" && kind != "zero") throw ConfigError("coefficients.kind: expected random or zero");
    s.zero = kind == "zero";
    s.bound = c.number("coefficients", "bound", 0.5);
    s.rho0 = c.number("coefficients", "rho0", 0.5);
    s.seed = c.unsigned_integer("coefficients", "seed", 1);
    s.q_support = c.box("coefficients", "q_support", dim);
    if (s.q_support) s.q_value = c.number("coefficients", "q_value", s.bound);
    if (!(s.bound >= 0.0)) throw ConfigError("coefficients.bound: must be nonnegative");
    return s;
}

std::array<double, 4> read_omega(const Config& c, const std::string& block, int dim) {
    const auto b = c.box(block, "omega", dim);
    if (b) return *b;
    const std::vector<double> def = dim == 1 ? std::vector<double>{0.3, 0.6} : std::vector<double>{0.3, 0.6, 0.3, 0.6};
    const auto v = c.numbers(block, "omega", def);
    return {v[0], v[1], dim == 2 ? v[2] : 0.0, dim == 2 ? v[3] : 0.0};
}

struct WeightReader {
    const Config& c;
    const SpaceTimeGrid& g;
    TimeDirection direction = TimeDirection::Increasing;
    bool normalized = true;
    std::array<double, 4> omega{};

    WeightReader(const Config& cfg, const SpaceTimeGrid& grid) : c(cfg), g(grid) {
        const auto d = c.text("weights", "direction", "increasing");
        if (d != "increasing" && d != "decreasing") throw ConfigError("weights.direction: expected increasing or decreasing");
        direction = d == "increasing" ? TimeDirection::Increasing : TimeDirection::Decreasing;
        const auto n = c.text("weights", "normalization", "max");
        if (n != "max" && n != "none") throw ConfigError("weights.normalization: expected max or none");
        normalized = n == "max";
        omega = read_omega(c, "weights", g.dim());
    }

    TimeWeightSpec time(double s, double lambda) const {
        TimeWeightSpec w;
        w.lambda = lambda;
        w.s = s;
        w.T = g.final_time();
        w.direction = direction;
        if (!normalized) w.normalization_ref = 0.0;
        w.validate();
        return w;
    }

    SpaceTimeWeightSpec space_time(double s, double lambda) const {
        const SubdomainMask mask(g, {omega[0], omega[2]}, {omega[1], omega[3]});
        SpaceTimeWeightSpec w{build_eta(g, mask), s, lambda, g.final_time(), {}};
        if (normalized) w.normalization_ref = alpha_max(w, g);
        w.validate();
        return w;
    }
};

ManufacturedSystem read_manufactured(const Config& c, const SpaceTimeGrid& g) {
    const auto coeffs = read_coefficient_spec(c, g.dim());
    CoefficientSpec modes_seed = coeffs;
    modes_seed.seed = c.unsigned_integer("pair", "seed", 1);
    const int modes = c.integer("pair", "modes", 3);
    const double amplitude = c.number("pair", "amplitude", 1.0);
    if (modes < 1 || !(amplitude > 0.0)) throw ConfigError("pair: modes >= 1 and amplitude > 0 required");
    auto spec = random_manufactured_spec(g, modes, amplitude, modes_seed);
    spec.coefficients = coeffs;
    return manufactured_pair(g, spec);
}

std::array<int, 2> read_wave(const Config& c, const std::string& key, int dim) {
    const auto v = c.numbers("experiment", key, dim == 1 ? std::vector<double>{1} : std::vector<double>{1, 0});
    if (static_cast<int>(v.size()) != dim) throw ConfigError("experiment." + key + ": expected one wave number per axis");
    std::array<int, 2> w{0, 0};
    for (int a = 0; a < dim; ++a) {
        if (v[a] < 0 || v[a] != std::floor(v[a])) throw ConfigError("experiment." + key + ": wave numbers are nonnegative integers");
        w[a] = static_cast<int>(v[a]);
    }
    return w;
}

std::vector<double> positive_list(const Config& c, const std::string& block, const std::string& key,
                                  const std::vector<double>& def) {
    const auto v = c.numbers(block, key, def);
    if (v.empty()) throw ConfigError(block + "." + key + ": empty list");
    for (double x : v)
        if (!(x > 0.0)) throw ConfigError(block + "." + key + ": values must be positive");
    return v;
}

// ---------------------------------------------------------------------------
// Serialization of results.
// ---------------------------------------------------------------------------
Json report_json(const EstimateReport& r) {
    Json j;
    j["estimate"] = to_string(r.id);
    j["s"] = num(r.s);
    j["lambda"] = num(r.lambda);
    j["log_normalization"] = num(r.log_normalization);
    Json lhs = Json::object(), rhs = Json::object();
    for (const auto& t : r.lhs_terms) lhs[t.name] = num(t.value);
    for (const auto& t : r.rhs_terms) rhs[t.name] = num(t.value);
    j["lhs"] = lhs;
    j["rhs"] = rhs;
    j["lhs_total"] = num(r.lhs_total);
    j["rhs_total"] = num(r.rhs_total);
    j["ratio"] = opt(r.ratio);
    j["violation_candidate"] = r.violation_candidate;
    j["absorbed_share"] = opt(r.absorbed_share);
    if (!r.sub_reports.empty()) {
        Json subs = Json::object();
        for (const auto& [name, sub] : r.sub_reports) subs[name] = report_json(sub);
        j["sub_reports"] = subs;
    }
    return j;
}

void report_rows(const EstimateReport& r, Report& out) {
    auto row = [&](const std::string& side, const std::string& term, double v) {
        out.rows.push_back({to_string(r.id), format_sci(r.lambda), format_sci(r.s), side, term, format_sci(v)});
    };
    for (const auto& t : r.lhs_terms) row("lhs", t.name, t.value);
    for (const auto& t : r.rhs_terms) row("rhs", t.name, t.value);
    row("total", "lhs", r.lhs_total);
    row("total", "rhs", r.rhs_total);
    row("total", "ratio", r.ratio ? *r.ratio : std::nan(""));
}

const std::vector<std::string> kReportColumns{"estimate", "lambda", "s", "side", "term", "value"};

Json fit_json(const PowerLawFit& f) { return {{"p", num(f.p)}, {"c", num(f.c)}, {"r2", num(f.r2)}}; }

Json noise_json(const NoiseSweep& n) {
    Json pts = Json::array();
    for (const auto& p : n.points)
        pts.push_back({{"delta", num(p.delta)}, {"error", num(p.error)}, {"proximal_steps", p.proximal_steps},
                       {"misfit", num(p.misfit)}});
    return {{"kind", to_string(n.kind)}, {"points", pts}, {"fit", fit_json(n.fit)},
            {"strictly_decreasing", n.strictly_decreasing}};
}

Json box_json(const std::array<double, 4>& b) { return Json::array({num(b[0]), num(b[1]), num(b[2]), num(b[3])}); }

Report run_report(const StabilityRun& run) {
    Report rep;
    rep.columns = {"experiment", "D", "E", "member_seed"};
    for (const auto& s : run.samples)
        rep.rows.push_back({to_string(run.id), format_sci(s.D), format_sci(s.E), std::to_string(s.seed)});
    Json j;
    j["experiment"] = to_string(run.id);
    j["eps"] = num(run.eps);
    j["M"] = opt(run.M);
    j["seed"] = run.seed;
    Json samples = Json::array();
    for (const auto& s : run.samples) samples.push_back({{"D", num(s.D)}, {"E", num(s.E)}, {"member_seed", s.seed}});
    j["samples"] = samples;
    j["fit"] = run.samples.size() >= 2 ? fit_json(run.fit) : Json(nullptr);
    j["aborted"] = opt(run.aborted);
    if (run.id == ExperimentId::HOLDER_T11) {
        j["theta_pred"] = opt(run.theta_pred);
        j["c1"] = opt(run.c1);
        j["mu0"] = opt(run.mu0);
        j["c_bound"] = opt(run.c_bound);
        j["bound_margin"] = opt(run.bound_margin);
        j["bound_holds"] = opt(run.bound_holds);
        j["grad_v0_max"] = opt(run.grad_v0_max);
    }
    if (run.id == ExperimentId::LIPSCHITZ_T31) {
        j["slice_constant"] = opt(run.slice_constant);
        j["slice_levels"] = run.slice_levels;
        j["scaling_fit"] = run.scaling_fit ? fit_json(*run.scaling_fit) : Json(nullptr);
    }
    if (run.id == ExperimentId::CONDITIONAL_COR) {
        Json trend = Json::array();
        for (const auto& t : run.omega_trend) trend.push_back({{"omega", box_json(t.omega)}, {"c", num(t.c)}});
        j["omega_trend"] = trend;
        j["reconstruction"] = run.reconstruction ? noise_json(*run.reconstruction) : Json(nullptr);
    }
    rep.body = j;
    if (run.aborted) rep.exit_code = kExitNumerical;
    return rep;
}

// ---------------------------------------------------------------------------
// Subcommands.
// ---------------------------------------------------------------------------
struct Context {
    const Config& c;
    int threads;
    std::uint64_t seed;
};

using Evaluate = std::function<EstimateReport(double, double)>;

Evaluate make_evaluator(EstimateId id, const ManufacturedSystem& sys, const WeightReader& w) {
    const auto* pair = &sys.pair;
    const auto* coeffs = &sys.coeffs;
    switch (id) {
        case EstimateId::THM21:
            return [=, &w](double s, double l) { return eval_thm21(*pair, w.time(s, l), {&coeffs->F, &coeffs->G}); };
        case EstimateId::EST21:
            return [=, &w](double s, double l) { return eval_est21(*pair, w.time(s, l), {&coeffs->F, &coeffs->G}); };
        case EstimateId::LEM31:
            return [=, &w](double s, double l) { return eval_lem31(pair->v, w.space_time(s, l), -1); };
        case EstimateId::LEM32:
            return [=, &w](double s, double l) { return eval_lem32(pair->u, w.space_time(s, l), 1); };
        case EstimateId::THM32:
            return [=, &w](double s, double l) { return eval_thm32(*pair, *coeffs, w.space_time(s, l)); };
        case EstimateId::EST42:
            return [=, &w](double s, double l) { return eval_est42(pair->v, coeffs->G, w.time(s, l)); };
        case EstimateId::EST44:
            return [=, &w](double s, double l) { return eval_est44(pair->u, coeffs->F, w.time(s, l)); };
    }
    throw ContractViolation("unknown estimate");
}

Report cmd_estimate(const Context& ctx) {
    const auto& c = ctx.c;
    const auto g = read_grid(c);
    const auto id = estimate_id_from_string(c.text("experiment", "estimate"));
    const double s = c.number("weights", "s");
    const double lambda = c.number("weights", "lambda", 1.0);
    const WeightReader w(c, g);
    const auto sys = read_manufactured(c, g);
    c.check_consumed();
    const auto r = make_evaluator(id, sys, w)(s, lambda);
    Report rep;
    rep.columns = kReportColumns;
    report_rows(r, rep);
    rep.body = report_json(r);
    return rep;
}

Report cmd_sweep(const Context& ctx) {
    const auto& c = ctx.c;
    const auto g = read_grid(c);
    const auto id = estimate_id_from_string(c.text("experiment", "estimate"));
    const auto s_list = positive_list(c, "weights", "s_list", {1.0, 2.0, 4.0, 8.0});
    const auto lambda_list = positive_list(c, "weights", "lambda_list", {1.0});
    const auto multiples = positive_list(c, "experiment", "multiples", {2.0, 3.0, 4.0});
    const double tol = c.number("experiment", "ratio_tolerance", 1.1);
    const WeightReader w(c, g);
    const auto sys = read_manufactured(c, g);
    c.check_consumed();

    const auto eval = make_evaluator(id, sys, w);
    auto res = sweep(id, eval, s_list, lambda_list, ctx.threads);
    // Calibrated start of the non-increasing range at the first lambda.
    const double l0 = *std::min_element(lambda_list.begin(), lambda_list.end());
    std::function<std::optional<double>(double)> member = [&](double s) { return eval(s, l0).ratio; };
    res.s0 = calibrate_s0({member}, s_list, multiples, tol, ctx.threads);

    Report rep;
    rep.columns = kReportColumns;
    Json reports = Json::array();
    for (const auto& r : res.reports) {
        report_rows(r, rep);
        reports.push_back(report_json(r));
    }
    Json c1 = Json::array();
    for (const auto& [l, v] : res.c1_by_lambda) c1.push_back({{"lambda", num(l)}, {"c1", num(v)}});
    rep.body = {{"estimate", to_string(id)}, {"c1", num(res.c1)}, {"c1_by_lambda", c1},
                {"max_ratio", num(res.max_ratio)}, {"s0", opt(res.s0)}, {"reports", reports}};
    return rep;
}

Report cmd_verify(const Context& ctx) {
    const auto& c = ctx.c;
    const auto g = read_grid(c);
    const double identity_threshold = c.number("experiment", "identity_threshold", 1e-3);
    const double refinement_factor = c.number("experiment", "refinement_factor", 3.0);
    const double exact_threshold = c.number("experiment", "exact_threshold", 1e-12);
    const double rounding_floor = c.number("experiment", "rounding_floor", 1e-12);
    const double s = c.number("weights", "s", 1.0);
    const double lambda = c.number("weights", "lambda", 1.0);
    const WeightReader w(c, g);
    c.check_consumed();

    using std::numbers::pi;
    const int d = g.dim();
    auto mode = [&](const SpaceTimeGrid& grid) {
        return ScalarField::sample(grid, [&](double x, double y, double t) {
            return std::cos(pi * x / grid.length(0)) * (d == 2 ? std::cos(pi * y / grid.length(1)) : 1.0) * std::exp(-t);
        });
    };
    auto k2 = [&](const SpaceTimeGrid& grid) {
        double k = std::pow(pi / grid.length(0), 2);
        if (d == 2) k += std::pow(pi / grid.length(1), 2);
        return k;
    };

    Report rep;
    rep.columns = {"check", "value", "refined", "threshold", "pass"};
    Json checks = Json::array();
    bool all = true;
    auto add = [&](const std::string& name, double value, std::optional<double> refined, double threshold, bool pass) {
        rep.rows.push_back({name, format_sci(value), refined ? format_sci(*refined) : "", format_sci(threshold),
                            pass ? "true" : "false"});
        checks.push_back({{"check", name}, {"value", num(value)}, {"refined", opt(refined)},
                          {"threshold", num(threshold)}, {"pass", pass}});
        all = all && pass;
    };

    // Neumann Laplacian annihilates constants.
    {
        const auto one = ScalarField::sample(g, [](double, double, double) { return 1.0; });
        add("laplacian_null_space", laplacian_neumann(one).max_abs(), std::nullopt, exact_threshold,
            laplacian_neumann(one).max_abs() <= exact_threshold);
    }
    // Eigenmode error ratio under mesh halving.
    {
        auto err = [&](const SpaceTimeGrid& grid) {
            const auto f = mode(grid);
            return (laplacian_neumann(f) + k2(grid) * f).max_abs();
        };
        const double a = err(g), b = err(g.refined());
        add("laplacian_eigenmode_ratio", a / b, b, 4.6, a / b >= 3.4 && a / b <= 4.6);
    }
    // Identities for w1 = exp(s phi) u.
    {
        const TimeWeightSpec tw = w.time(s, lambda);
        auto ids = [&](const SpaceTimeGrid& grid) {
            const auto u = mode(grid);
            const auto F = (-1.0 - k2(grid)) * u;
            TimeWeightSpec t = tw;
            return check_w1_identities(u, F, t);
        };
        const auto base = ids(g), fine = ids(g.refined());
        for (std::size_t i = 0; i < base.size(); ++i) {
            const double a = base[i].defect, b = fine[i].defect;
            const bool converged = b <= rounding_floor || a >= refinement_factor * b;
            add("identity_" + base[i].name, a, b, identity_threshold, a <= identity_threshold && converged);
        }
    }
    // Time reversal.
    {
        const auto f = mode(g);
        const auto back = time_reverse(time_reverse(f));
        add("time_reverse_involution", (back - f).max_abs(), std::nullopt, exact_threshold,
            (back - f).max_abs() <= exact_threshold);
        const auto defect = lem31_reversal_defect(f, w.space_time(s, lambda));
        add("lem31_reversal", defect.defect, std::nullopt, exact_threshold, defect.defect <= exact_threshold);
    }
    rep.body = {{"checks", checks}, {"all_pass", all}};
    if (!all) rep.exit_code = kExitNumerical;
    return rep;
}

Report cmd_holder(const Context& ctx) {
    const auto& c = ctx.c;
    const auto g = read_grid(c);
    HolderConfig h;
    h.M = c.number("experiment", "M", 1.0);
    h.eps = c.number("experiment", "eps", 0.1 * g.final_time());
    h.D_list = positive_list(c, "experiment", "D_list", {1e-1, 1e-2, 1e-3, 1e-4});
    h.u_wave = read_wave(c, "u_wave", g.dim());
    h.v_wave = read_wave(c, "v_wave", g.dim());
    h.v_amplitude = c.number("experiment", "v_amplitude", 0.5);
    h.bound_tolerance = c.number("experiment", "bound_tolerance", 0.2);
    h.lambda = c.number("weights", "lambda", 1.0);
    h.s_list = positive_list(c, "weights", "s_list", {1.0, 2.0, 3.0, 4.0});
    h.seed = ctx.seed;
    h.threads = ctx.threads;
    const auto spec = read_coefficient_spec(c, g.dim());
    c.check_consumed();
    return run_report(holder_experiment(random_coefficients(g, spec), h));
}

LipschitzConfig read_suite(const Context& ctx, const SpaceTimeGrid& g) {
    const auto& c = ctx.c;
    LipschitzConfig l;
    l.eps = c.number("experiment", "eps", 0.1 * g.final_time());
    l.amplitudes = positive_list(c, "experiment", "amplitudes", {1.0, 1e-1, 1e-2, 1e-3});
    l.members_per_amplitude = c.integer("experiment", "members_per_amplitude", 3);
    l.modes = c.integer("pair", "modes", 3);
    l.omega = read_omega(c, "experiment", g.dim());
    l.scaling = positive_list(c, "experiment", "scaling", {1.0, 10.0, 100.0, 1000.0});
    l.coefficients = read_coefficient_spec(c, g.dim());
    l.seed = ctx.seed;
    l.threads = ctx.threads;
    return l;
}

QRProblem read_qr(const Config& c, const SpaceTimeGrid& g, ObservationKind kind) {
    QRProblem pb;
    pb.kind = kind;
    pb.beta = c.number("experiment", "beta", 1e-6);
    pb.s = c.number("weights", "s", 1.0);
    pb.lambda = c.number("weights", "lambda", 1.0);
    pb.tolerance = c.number("experiment", "tolerance", 1e-8);
    pb.max_iterations = c.integer("experiment", "max_iterations", 200);
    pb.proximal_steps = c.integer("experiment", "proximal_steps", 1);
    pb.discrepancy = c.number("experiment", "discrepancy", 1.1);
    if (kind != ObservationKind::Terminal) pb.omega = read_omega(c, "experiment", g.dim());
    pb.validate(g);
    return pb;
}

Report cmd_lipschitz(const Context& ctx) {
    const auto g = read_grid(ctx.c);
    const auto l = read_suite(ctx, g);
    ctx.c.check_consumed();
    return run_report(lipschitz_experiment(g, l));
}

Report cmd_corollary(const Context& ctx) {
    const auto& c = ctx.c;
    const auto g = read_grid(c);
    CorollaryConfig cc;
    cc.suite = read_suite(ctx, g);
    for (const auto& b : c.groups("experiment", "nested_omegas", {})) {
        if (static_cast<int>(b.size()) != 2 * g.dim()) throw ConfigError("experiment.nested_omegas: bad box");
        cc.nested_omegas.push_back({b[0], b[1], g.dim() == 2 ? b[2] : 0.0, g.dim() == 2 ? b[3] : 0.0});
    }
    cc.deltas = c.numbers("experiment", "deltas", {1e-1, 1e-2, 1e-3, 1e-4});
    cc.qr = read_qr(c, g, ObservationKind::InteriorUOnly);
    c.check_consumed();
    return run_report(conditional_corollary_experiment(g, cc));
}

Report cmd_reconstruct(const Context& ctx) {
    const auto& c = ctx.c;
    const auto g = read_grid(c);
    const auto kind = observation_kind_from_string(c.text("experiment", "kind", "terminal"));
    auto pb = read_qr(c, g, kind);
    const auto deltas = c.numbers("experiment", "deltas", {});
    const bool discrepancy = c.flag("experiment", "discrepancy_principle", true);
    const bool terminal = kind == ObservationKind::Terminal;
    const double eps = c.number("experiment", "eps", 0.1 * g.final_time());
    const auto u_wave = read_wave(c, "u_wave", g.dim());
    const auto v_wave = read_wave(c, "v_wave", g.dim());
    const double v_amplitude = c.number("experiment", "v_amplitude", 0.5);
    const double v_offset = c.number("experiment", "v_offset", 1.0);
    auto coeffs = random_coefficients(g, read_coefficient_spec(c, g.dim()));
    c.check_consumed();

    auto slice = [&](std::array<int, 2> wave, double amp, double offset) {
        CosineMode m;
        m.amplitude = amp;
        m.wave = wave;
        auto f = sample_modes(g, {m}).slice(0);
        for (std::size_t p = 0; p < g.space_size(); ++p) f[p] += offset;
        return f;
    };
    const auto truth = solve_coupled(coeffs, slice(u_wave, 1.0, 0.0), slice(v_wave, v_amplitude, v_offset)).pair;
    match_scheme_sources(truth, coeffs);
    const double t_hi = terminal ? g.final_time() : g.final_time() - eps;
    const bool v_only = kind == ObservationKind::InteriorUOnly;

    Report rep;
    rep.columns = {"kind", "delta", "error", "proximal_steps", "misfit"};
    Json j;
    j["kind"] = to_string(kind);
    j["beta"] = num(pb.beta);
    j["tolerance"] = num(pb.tolerance);
    if (deltas.empty()) {
        const auto r = reconstruct_qr(pb, coeffs, observe(pb, truth));
        const double err = reconstruction_error(r.pair, truth, eps, t_hi, v_only);
        rep.rows.push_back({to_string(kind), format_sci(0.0), format_sci(err), std::to_string(r.proximal_steps),
                            format_sci(r.misfit)});
        j["error"] = num(err);
        j["cg_iterations"] = r.iterations;
        j["proximal_steps"] = r.proximal_steps;
        j["gradient_norm"] = num(r.gradient_norm);
        j["within_10x_tolerance"] = err <= 10.0 * pb.tolerance;
    } else {
        const auto n = noise_sweep(pb, coeffs, truth, deltas, eps, ctx.seed, discrepancy, ctx.threads);
        for (const auto& p : n.points)
            rep.rows.push_back({to_string(kind), format_sci(p.delta), format_sci(p.error), std::to_string(p.proximal_steps),
                                format_sci(p.misfit)});
        j["noise_sweep"] = noise_json(n);
    }
    rep.body = j;
    return rep;
}

const std::vector<std::pair<std::string, std::function<Report(const Context&)>>>& table() {
    static const std::vector<std::pair<std::string, std::function<Report(const Context&)>>> t{
        {"verify", cmd_verify},       {"estimate", cmd_estimate},   {"sweep", cmd_sweep},
        {"holder", cmd_holder},       {"lipschitz", cmd_lipschitz}, {"corollary", cmd_corollary},
        {"reconstruct", cmd_reconstruct},
    };
    return t;
}

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& [name, fn] : table()) n.push_back(name);
        return n;
    }();
    return names;
}

int run_subcommand(const std::string& subcommand, const std::string& config_path, const std::string& out_dir,
                   std::optional<int> threads) {
    const std::function<Report(const Context&)>* fn = nullptr;
    for (const auto& [name, f] : table())
        if (name == subcommand) fn = &f;
    if (!fn) {
        std::cerr << "error: unknown subcommand '" << subcommand << "'\n";
        return kExitValidation;
    }

    std::optional<Config> cfg;
    int nthreads = 1;
    std::uint64_t seed = 1;
    try {
        cfg = Config::load(config_path);
        nthreads = resolve_threads(threads);
        seed = cfg->unsigned_integer("experiment", "seed", 1);
        fs::create_directories(out_dir);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    Report rep;
    try {
        rep = (*fn)(Context{*cfg, nthreads, seed});
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ContractViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const PreconditionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ConstructionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const DivergenceError& e) {
        rep.body = {{"status", "failed"}, {"error", e.what()}, {"history", e.history()}};
        rep.exit_code = kExitNumerical;
    } catch (const StagnationError& e) {
        rep.body = {{"status", "failed"}, {"error", e.what()}, {"trace", e.trace()}};
        rep.exit_code = kExitNumerical;
    }
    if (rep.exit_code == kExitNumerical) std::cerr << "numerical failure: see report.json\n";

    try {
        write_outputs(out_dir, subcommand, seed, cfg->resolved(), rep);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return rep.exit_code;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Carleman-estimate experiments for the linearized mean-field-game system"};
    app.require_subcommand(1, 1);
    std::string config, out;
    std::optional<int> threads;
    for (const auto& name : subcommands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "config file")->required();
        sub->add_option("--out", out, "output directory")->required();
        sub->add_option("--threads", threads, "worker threads (falls back to CARLEMAN_MFG_THREADS)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }
    return run_subcommand(app.get_subcommands().front()->get_name(), config, out, threads);
}

}  // namespace cmfg
