#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "cmfg/field.hpp"

namespace cmfg {

// Linearized mean-field-game system on Q = Omega x (0,T):
//   d_t u + Lap u = Q1 u + S v + F
//   d_t v - Lap v = Q2(u,v) + rho0 Lap u + G
// with Q1 u = a0 u + a1 . grad u, Q2 = b0 u + b1 . grad u + c0 v + c1 . grad v,
// S v = q v, and homogeneous Neumann data on both unknowns.
struct CoefficientSet {
    ScalarField a0;
    std::vector<ScalarField> a1;
    ScalarField b0;
    std::vector<ScalarField> b1;
    ScalarField c0;
    std::vector<ScalarField> c1;
    ScalarField q;
    double rho0 = 0.0;
    ScalarField F;
    ScalarField G;
    double bound = 0.0;  // declared C: every coefficient field satisfies max |.| <= C

    static CoefficientSet zero(const SpaceTimeGrid& grid);

    const SpaceTimeGrid& grid() const { return a0.grid(); }
    // Largest |value| over all coefficient fields (not the sources).
    double max_coefficient() const;
    // Throws ContractViolation when a field is off-grid, non-finite or above the bound.
    void validate() const;
    bool is_decoupled() const;
};

ScalarField apply_q1(const CoefficientSet& c, const ScalarField& u);
ScalarField apply_q2(const CoefficientSet& c, const ScalarField& u, const ScalarField& v);
ScalarField apply_s(const CoefficientSet& c, const ScalarField& v);

struct SolutionPair {
    ScalarField u;
    ScalarField v;
    double r_u = 0.0;  // L2 norm of the u-residual over interior levels
    double r_v = 0.0;
};

// r_u = d_t u + Lap u - Q1 u - S v - F and r_v = d_t v - Lap v - Q2 - rho0 Lap u - G.
// Both vanish identically on the endpoint levels, which are not evaluated.
ScalarField residual_u(const SolutionPair& pair, const CoefficientSet& coeffs);
ScalarField residual_v(const SolutionPair& pair, const CoefficientSet& coeffs);
// Fills pair.r_u and pair.r_v.
void measure_residuals(SolutionPair& pair, const CoefficientSet& coeffs);

struct SolveReport {
    SolutionPair pair;
    std::vector<double> change_history;  // H^{2,1}(Q) size of successive-iterate changes
    int iterations = 0;
};

// Picard iteration: u is integrated backward from u(T) = u_T (reversed-time
// implicit Euler), then v forward from v(0) = v_0, until the iterate change
// drops below tol relative to the iterate size. Throws DivergenceError.
SolveReport solve_coupled(const CoefficientSet& coeffs, const SpatialField& u_T, const SpatialField& v_0,
                          double tol = 1e-10, int max_iter = 200);

// w(x,t) = f(x, T - t).
ScalarField time_reverse(const ScalarField& f);

// ---------------------------------------------------------------------------
// Manufactured solutions.
// ---------------------------------------------------------------------------
enum class TimeProfile {
    Exponential,  // exp(rate t)
    Oscillating   // 1 + 0.5 sin(rate t + phase)
};

// amplitude * prod_a cos(wave[a] pi x_a / L_a) * profile(t)
struct CosineMode {
    double amplitude = 1.0;
    std::array<int, 2> wave{1, 0};
    TimeProfile profile = TimeProfile::Exponential;
    double rate = 0.0;
    double phase = 0.0;

    double value(const SpaceTimeGrid& g, double x, double y, double t) const;
};

ScalarField sample_modes(const SpaceTimeGrid& grid, const std::vector<CosineMode>& modes);

// Backward heat mode exp(-k^2 (T - t)) cos(k x), k = wave pi / L (u solves d_t u + Lap u = 0).
CosineMode backward_heat_mode(const SpaceTimeGrid& grid, std::array<int, 2> wave, double amplitude = 1.0);
// Forward heat mode exp(-k^2 t) cos(k x) (v solves d_t v - Lap v = 0).
CosineMode forward_heat_mode(const SpaceTimeGrid& grid, std::array<int, 2> wave, double amplitude = 1.0);

struct CoefficientSpec {
    double bound = 0.5;
    double rho0 = 0.5;
    bool zero = false;
    // q = q_value on the closed box and 0 elsewhere when set; otherwise random smooth.
    std::optional<std::array<double, 4>> q_support;  // xlo, xhi, ylo, yhi
    double q_value = 1.0;
    std::uint64_t seed = 1;
};

// Smooth random coefficient fields with max |.| <= bound; F = G = 0.
CoefficientSet random_coefficients(const SpaceTimeGrid& grid, const CoefficientSpec& spec);

struct ManufacturedSpec {
    std::vector<CosineMode> u_modes;
    std::vector<CosineMode> v_modes;
    CoefficientSpec coefficients;
};

// Random cosine modes with bounded amplitudes, seeded.
ManufacturedSpec random_manufactured_spec(const SpaceTimeGrid& grid, int modes, double amplitude,
                                          const CoefficientSpec& coefficients);

struct ManufacturedSystem {
    SolutionPair pair;
    CoefficientSet coeffs;
};

// (u, v) from the modes, coefficients from the spec, and F, G defined as the
// discrete residuals so the returned system holds exactly on the grid.
ManufacturedSystem manufactured_pair(const SpaceTimeGrid& grid, const ManufacturedSpec& spec);

// The members of the standard seeded suite: member i uses seed base_seed + i.
std::vector<ManufacturedSpec> manufactured_suite(const SpaceTimeGrid& grid, int count, std::uint64_t base_seed,
                                                 double bound, double rho0, int modes = 3);

// Uniform numbers in [0,1) from the 64-bit Mersenne twister. The bit-to-double
// map is explicit so sequences match across standard libraries.
class SeededUniform {
public:
    explicit SeededUniform(std::uint64_t seed);
    double next();
    double in(double lo, double hi) { return lo + (hi - lo) * next(); }
    int integer(int lo, int hi);  // inclusive

private:
    std::mt19937_64 engine_;
};

}  // namespace cmfg
