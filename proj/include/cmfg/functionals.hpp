#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cmfg/mfg_system.hpp"
#include "cmfg/weights.hpp"

namespace cmfg {

enum class EstimateId { THM21, EST21, LEM31, LEM32, THM32, EST42, EST44 };

const char* to_string(EstimateId id);
EstimateId estimate_id_from_string(const std::string& name);  // throws ContractViolation

struct Term {
    std::string name;
    double value = 0.0;
};

// Both sides of one weighted estimate, itemized. Values carry the weight
// normalization: the true integrals are value * exp(log_normalization).
struct EstimateReport {
    EstimateId id = EstimateId::THM21;
    double s = 0.0;
    double lambda = 0.0;
    std::vector<Term> lhs_terms;
    std::vector<Term> rhs_terms;
    double lhs_total = 0.0;
    double rhs_total = 0.0;
    std::optional<double> ratio;       // lhs_total / rhs_total when rhs_total > 0
    bool violation_candidate = false;  // rhs_total == 0 < lhs_total
    double log_normalization = 0.0;
    // Intermediate bounds of the coupled estimate and the share of LHS taken by
    // the lower-power terms the proof absorbs.
    std::vector<std::pair<std::string, EstimateReport>> sub_reports;
    std::optional<double> absorbed_share;

    double lhs(const std::string& name) const;
    double rhs(const std::string& name) const;
};

// Fills totals, ratio and the violation flag from the term tables.
void finalize(EstimateReport& r);

// Sources entering the right-hand sides (F of the u-equation, G of the v-equation).
struct Sources {
    const ScalarField* F = nullptr;
    const ScalarField* G = nullptr;
};

// Double-exponential time weight. The source terms s phi |F|^2 + |G|^2 appear
// on the right whenever the pair carries nonzero sources.
EstimateReport eval_thm21(const SolutionPair& pair, const TimeWeightSpec& w, Sources src = {});
// Fixed-lambda reduction: terminal data weighted by exp(2 s phi(T)).
EstimateReport eval_est21(const SolutionPair& pair, const TimeWeightSpec& w, Sources src = {});

struct Est22Bound {
    double c1 = 0.0;         // max(0, slope) of the terminal-data branch growth
    double c1_raw_slope = 0.0;
    double mu0 = 0.0;
    double theta = 0.0;
    std::optional<double> s_star;  // when 0 < D < M
    double lhs_eps = 0.0;     // |u|^2 + |v|^2 in H^{2,1}(Omega x (eps, T))
    double c_fit = 0.0;       // smallest C with lhs_eps <= C (exp(c1 s) D^2 + M^2 exp(-2 s mu0)) on the sweep
    std::optional<double> branch_balance;  // relative gap of the two branches at s_star
    bool holds = false;
};

// `sweep` holds EST21 reports at one lambda over increasing s.
Est22Bound eval_est22_bound(const std::vector<EstimateReport>& sweep, double T, double eps, double M, double D,
                            double lhs_eps);

// Space-time weight exp(2 s alpha); endpoint levels carry no weight.
// sign = +1 tests (d_t + Lap), sign = -1 tests (d_t - Lap).
EstimateReport eval_lem31(const ScalarField& f, const SpaceTimeWeightSpec& w, int sign);
EstimateReport eval_lem32(const ScalarField& f, const SpaceTimeWeightSpec& w, int sign);
EstimateReport eval_thm32(const SolutionPair& pair, const CoefficientSet& coeffs, const SpaceTimeWeightSpec& w);

// Single-equation estimates for d_t v - Lap v = G and d_t u + Lap u = F.
EstimateReport eval_est42(const ScalarField& v, const ScalarField& G, const TimeWeightSpec& w);
EstimateReport eval_est44(const ScalarField& u, const ScalarField& F, const TimeWeightSpec& w);

struct IdentityDefect {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double defect = 0.0;  // |lhs - rhs| / (|lhs| + |rhs| + floor)
};

// Identities behind the single-equation estimate for w1 = exp(s phi) u, each
// side computed independently: I1 in its Laplacian, gradient and boundary
// forms, I2, the conjugated operator, and the sqrt(phi) substitution.
std::vector<IdentityDefect> check_w1_identities(const ScalarField& u, const ScalarField& F, const TimeWeightSpec& w,
                                                double floor = 1e-14);

// Time-reversal consistency of the interior-data estimate: the report for
// (d_t + Lap) on f against the report for (d_t - Lap) on the reversed field.
IdentityDefect lem31_reversal_defect(const ScalarField& f, const SpaceTimeWeightSpec& w, double floor = 1e-14);

struct SweepResult {
    EstimateId id = EstimateId::THM21;
    std::vector<EstimateReport> reports;  // sorted by (lambda, s)
    std::vector<std::pair<double, double>> c1_by_lambda;
    double c1 = 0.0;
    double max_ratio = 0.0;
    std::optional<double> s0;  // calibrated start of the non-increasing range
};

using Evaluator = std::function<EstimateReport(double s, double lambda)>;

// Evaluates every (s, lambda) point, concurrently when threads > 1.
SweepResult sweep(EstimateId id, const Evaluator& eval, std::vector<double> s_list, std::vector<double> lambda_list,
                  int threads = 1);

// Least-squares slope and intercept of y against x.
std::pair<double, double> fit_log_linear(const std::vector<double>& x, const std::vector<double>& y);

// Smallest candidate c with ratio(k c) <= tolerance * ratio(c) for every k in
// multiples and every member. Empty when no candidate qualifies.
std::optional<double> calibrate_s0(const std::vector<std::function<std::optional<double>(double)>>& members,
                                   const std::vector<double>& candidates, const std::vector<double>& multiples = {2, 3, 4},
                                   double tolerance = 1.1, int threads = 1);

}  // namespace cmfg
