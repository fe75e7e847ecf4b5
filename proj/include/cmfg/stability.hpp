#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cmfg/mfg_system.hpp"
#include "cmfg/qr.hpp"

namespace cmfg {

struct PowerLawFit {
    double p = 0.0;
    double c = 0.0;
    double r2 = 0.0;
};

// Least squares of log E = log c + p log D. Needs two distinct positive D and positive E.
PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& pairs);

enum class ExperimentId { HOLDER_T11, LIPSCHITZ_T31, CONDITIONAL_COR };

const char* to_string(ExperimentId id);
ExperimentId experiment_id_from_string(const std::string& name);

struct StabilitySample {
    double D = 0.0;
    double E = 0.0;
    std::uint64_t seed = 0;  // member seed (Lipschitz and corollary suites)
};

// Quasi-reversibility error against noise level.
struct NoisePoint {
    double delta = 0.0;
    double error = 0.0;
    int proximal_steps = 0;
    double misfit = 0.0;
};

struct NoiseSweep {
    ObservationKind kind = ObservationKind::Terminal;
    std::vector<NoisePoint> points;  // delta descending
    PowerLawFit fit;
    bool strictly_decreasing = false;
};

struct OmegaTrendPoint {
    std::array<double, 4> omega{};
    double c = 0.0;  // max E / D over the suite
};

struct StabilityRun {
    ExperimentId id = ExperimentId::HOLDER_T11;
    std::vector<StabilitySample> samples;  // D strictly decreasing
    PowerLawFit fit;
    double eps = 0.0;
    std::optional<double> M;
    std::uint64_t seed = 0;
    std::optional<std::string> aborted;  // solver failure; samples hold what finished

    // Hoelder run: predicted exponent and the bound E <= c D^theta calibrated at the largest D.
    std::optional<double> theta_pred;
    std::optional<double> c1;
    std::optional<double> mu0;
    std::optional<double> c_bound;
    std::optional<double> bound_margin;  // max E / (c D^theta)
    std::optional<bool> bound_holds;     // bound_margin <= 1 + bound_tolerance
    std::optional<double> grad_v0_max;   // largest |grad v(0)| over the members

    // Lipschitz run: per-slice constant over [eps, T - eps] and the pure scaling family.
    std::optional<double> slice_constant;
    int slice_levels = 0;  // time levels checked in [eps, T - eps]
    std::optional<PowerLawFit> scaling_fit;

    // Corollary run: nested omega trend and v recovered from u-only data.
    std::vector<OmegaTrendPoint> omega_trend;
    std::optional<NoiseSweep> reconstruction;
};

// ---------------------------------------------------------------------------
// Hoelder stability from terminal data.
// ---------------------------------------------------------------------------
struct HolderConfig {
    double M = 1.0;
    double eps = 0.1;
    std::vector<double> D_list{1e-1, 1e-2, 1e-3, 1e-4};
    std::uint64_t seed = 1;
    // Base terminal/initial data: heat modes cos(k pi x) with these waves.
    std::array<int, 2> u_wave{1, 0};
    std::array<int, 2> v_wave{1, 0};
    double v_amplitude = 0.5;
    // Weight parameters of the EST21 sweep that fixes C1.
    double lambda = 1.0;
    std::vector<double> s_list{1.0, 2.0, 3.0, 4.0};
    double bound_tolerance = 0.2;
    double picard_tol = 1e-10;
    int threads = 1;
};

// Members are sigma (psi_u, psi_v) plus an additive high-frequency v(0) mode with
// |grad v_add(0)| = M/2, sigma chosen so D = |u(T)|_{H1} + |v(T)|_{L2} is exact.
// E = |u|_{H21(Omega x (eps,T))} + |v|_{H21(Omega x (eps,T))}.
StabilityRun holder_experiment(const CoefficientSet& coeffs, const HolderConfig& cfg);

// ---------------------------------------------------------------------------
// Lipschitz stability from interior data.
// ---------------------------------------------------------------------------
struct LipschitzConfig {
    double eps = 0.1;
    std::vector<double> amplitudes{1.0, 1e-1, 1e-2, 1e-3};
    int members_per_amplitude = 3;
    std::uint64_t seed = 1;
    int modes = 3;
    CoefficientSpec coefficients;
    std::array<double, 4> omega{0.3, 0.6, 0.0, 0.0};
    std::vector<double> scaling{1.0, 10.0, 100.0, 1000.0};
    int threads = 1;
};

// D = |F|_{L2(Q)} + |G|_{L2(Q)} + |u|_{L2(omega x (0,T))} + |v|_{L2(omega x (0,T))},
// E = |u|_{H21(Omega x (eps,T-eps))} + |v|_{H21(Omega x (eps,T-eps))}.
StabilityRun lipschitz_experiment(const SpaceTimeGrid& grid, const LipschitzConfig& cfg);

// ---------------------------------------------------------------------------
// Corollary: v from u-only interior data through the q coupling.
// ---------------------------------------------------------------------------
struct CorollaryConfig {
    LipschitzConfig suite;
    // Nested observation boxes, outermost first.
    std::vector<std::array<double, 4>> nested_omegas;
    // Reconstruction of the first suite member from noisy u-only data.
    std::vector<double> deltas{1e-1, 1e-2, 1e-3, 1e-4};
    QRProblem qr;
};

// Throws PreconditionError unless q is nonzero on a box of 3 nodes per axis
// (space and time) inside omega.
void check_q_support(const CoefficientSet& coeffs, const std::array<double, 4>& omega);

// D = |F| + |G| + |u|_{H21(omega x (0,T))}.
StabilityRun conditional_corollary_experiment(const SpaceTimeGrid& grid, const CorollaryConfig& cfg);

// Reconstructs truth from observations with absolute noise delta in the
// observation norm (seed + i for the i-th delta). With discrepancy set, each
// run stops its proximal steps by the discrepancy principle. The error is taken
// over (eps, T) for terminal data and (eps, T - eps) otherwise.
NoiseSweep noise_sweep(const QRProblem& problem, const CoefficientSet& coeffs, const SolutionPair& truth,
                       std::vector<double> deltas, double eps, std::uint64_t seed, bool discrepancy = true,
                       int threads = 1);

}  // namespace cmfg
