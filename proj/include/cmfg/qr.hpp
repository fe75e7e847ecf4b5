#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cmfg/mfg_system.hpp"
#include "cmfg/weights.hpp"

namespace cmfg {

enum class ObservationKind {
    Terminal,      // u(T), v(T) on Omega
    Interior,      // u, v on omega x [0, T]
    InteriorUOnly  // u on omega x [0, T]
};

const char* to_string(ObservationKind kind);
ObservationKind observation_kind_from_string(const std::string& name);

struct QRProblem {
    ObservationKind kind = ObservationKind::Terminal;
    double beta = 1e-6;
    // Carleman weight on the residual rows: the time weight exp(2 s phi) for
    // terminal data, the space-time weight exp(2 s alpha) for interior data.
    double s = 1.0;
    double lambda = 1.0;
    std::optional<std::array<double, 4>> omega;  // xlo, xhi, ylo, yhi; required for interior kinds
    double tolerance = 1e-8;  // relative gradient norm of the normal equations; relative change between proximal steps
    int max_iterations = 200;  // CG iterations per proximal step
    // Iterated Tikhonov: step j penalizes beta |x - x_{j-1}|^2 with x_0 = 0. One step is plain Tikhonov.
    int proximal_steps = 1;
    // Known noise level: proximal steps stop once the misfit is below discrepancy * noise_level.
    std::optional<double> noise_level;
    double discrepancy = 1.1;

    void validate(const SpaceTimeGrid& grid) const;
};

// Observed values: for Terminal only the final level of each field is read;
// for the interior kinds only the omega nodes. Unobserved entries are ignored.
struct Observation {
    ScalarField u;
    ScalarField v;
};

Observation observe(const QRProblem& problem, const SolutionPair& truth);

// Adds per-node uniform noise, rescaled so the noise has norm delta in the
// observation norm. Seeded and deterministic.
Observation add_noise(const QRProblem& problem, const Observation& clean, double delta, std::uint64_t seed);

// Norm of the observed part in the observation norm (L2 over Omega at T, or
// L2 over omega x (0,T)).
double observation_norm(const QRProblem& problem, const Observation& obs);

struct QRReport {
    SolutionPair pair;
    int iterations = 0;      // CG iterations over all proximal steps
    int proximal_steps = 0;
    double misfit = 0.0;  // observation misfit in the observation norm
    double gradient_norm = 0.0;  // relative to |A^T b|
    std::vector<double> trace;   // relative gradient norm per iteration
};

// Minimizes |r_u|_w^2 + |r_v|_w^2 + |misfit|^2 + beta |(u,v)|^2_{L2(Q)} where
// r_u, r_v are the residuals of the implicit scheme used by solve_coupled.
// Preconditioned conjugate gradient on the normal equations; throws StagnationError.
QRReport reconstruct_qr(const QRProblem& problem, const CoefficientSet& coeffs, const Observation& obs);

// Residuals of the implicit scheme that solve_coupled integrates and
// reconstruct_qr penalizes: u rows on levels 0..N-1, v rows on 1..N, zero elsewhere.
struct SchemeResiduals {
    ScalarField u;
    ScalarField v;
};
SchemeResiduals scheme_residuals(const SolutionPair& pair, const CoefficientSet& coeffs);
// Adds the scheme residuals to F and G so the pair satisfies the scheme exactly.
void match_scheme_sources(const SolutionPair& pair, CoefficientSet& coeffs);

// Relative error of a reconstruction: H^{2,1} over Omega x (t_lo, t_hi) of both
// fields (v only when v_only is set), divided by the truth's norm.
double reconstruction_error(const SolutionPair& rec, const SolutionPair& truth, double t_lo, double t_hi,
                            bool v_only = false);

}  // namespace cmfg
