#pragma once

#include <array>
#include <optional>
#include <vector>

#include "cmfg/field.hpp"

namespace cmfg {

// ---------------------------------------------------------------------------
// Time-only weight: phi(t) = exp(lambda t) and the double exponential
// exp(2 s phi(t)). Everything downstream uses the normalized weight
// exp(2 s (phi(t) - ref)) so nothing overflows; the common factor
// exp(-2 s ref) cancels in every LHS/RHS ratio.
// ---------------------------------------------------------------------------
enum class TimeDirection {
    Increasing,  // phi = exp(+lambda t): terminal data controls the solution
    Decreasing   // phi = exp(-lambda t): initial data variant
};

struct TimeWeightSpec {
    double lambda = 1.0;
    double s = 1.0;
    double T = 1.0;
    std::optional<double> normalization_ref;  // defaults to max phi on [0,T]
    TimeDirection direction = TimeDirection::Increasing;

    void validate() const;
    double ref() const;
};

double phi_t(const TimeWeightSpec& spec, double t);
// exp(2 s (phi(t) - ref)); underflow flushes to 0.
double norm_weight(const TimeWeightSpec& spec, double t);
// Normalized value of exp(2 s c) for a constant c, e.g. c = 1 for exp(2s).
double norm_exp(const TimeWeightSpec& spec, double c);

double mu0(double lambda, double eps);
double theta_exponent(double c1, double mu0);
double s_star(double c1, double mu0, double M, double D);

// ---------------------------------------------------------------------------
// eta: vanishes on the boundary, positive inside, gradient nonzero off omega.
// Per axis eta_a(x) = x (L - x) exp(beta x) with the single interior critical
// point at the omega center c: beta = (2c - L) / (c (L - c)).
// In 2D eta is the product of the axis factors.
// ---------------------------------------------------------------------------
struct EtaAxis {
    double length = 1.0;
    double center = 0.5;
    double beta = 0.0;

    double value(double x) const;
    double derivative(double x) const;
    double second_derivative(double x) const;
};

class EtaFunction {
public:
    EtaFunction(int dim, std::array<EtaAxis, 2> axes, std::array<double, 2> omega_lo, std::array<double, 2> omega_hi);

    int dim() const { return dim_; }
    const EtaAxis& axis(int a) const { return axes_[a]; }
    std::array<double, 2> omega_lo() const { return lo_; }
    std::array<double, 2> omega_hi() const { return hi_; }

    double value(double x, double y = 0.0) const;
    std::array<double, 2> gradient(double x, double y = 0.0) const;
    // max of eta over the closure of Omega (attained at the omega center).
    double sup_norm() const;

private:
    int dim_;
    std::array<EtaAxis, 2> axes_;
    std::array<double, 2> lo_;
    std::array<double, 2> hi_;
};

// Builds eta for omega and verifies positivity, boundary vanishing and the
// gradient condition by sampling at `oversample` times the grid resolution.
// In 2D the four corners of the rectangle are skipped: every C^1 function
// vanishing on both edges through a corner has zero gradient there.
EtaFunction build_eta(const SpaceTimeGrid& grid, const SubdomainMask& omega, int oversample = 10);

struct SpaceTimeWeightSpec {
    EtaFunction eta;
    double s = 1.0;
    double lambda = 1.0;
    double T = 1.0;
    // Nodal weights are exp(2 s (alpha - ref)); unset means ref = 0.
    std::optional<double> normalization_ref;

    void validate() const;
};

struct AlphaVarphi {
    double alpha;
    double varphi;
};

// varphi = exp(lambda eta) / (t (T - t)),
// alpha = (exp(lambda eta) - exp(2 lambda |eta|_C)) / (t (T - t)); 0 < t < T.
AlphaVarphi alpha_varphi(const SpaceTimeWeightSpec& spec, double x, double y, double t);

// C2 = (exp(2 lambda |eta|_C) - 1) / (eps (T - eps)); exp(2 s alpha) >= exp(-2 s C2) on [eps, T-eps].
double alpha_floor_constant(const SpaceTimeWeightSpec& spec, double eps);

// Nodal fields of the space-time weight. Endpoint time levels hold 0 in both
// fields: the weight vanishes there faster than any power of varphi grows.
struct SpaceTimeWeightFields {
    ScalarField varphi;
    ScalarField weight;  // exp(2 s alpha)
};
SpaceTimeWeightFields space_time_weight_fields(const SpaceTimeWeightSpec& spec, const SpaceTimeGrid& grid);

// Largest nodal alpha over the interior time levels; the natural normalization ref.
double alpha_max(const SpaceTimeWeightSpec& spec, const SpaceTimeGrid& grid);

// Per-level values of the time weight.
struct TimeWeightLevels {
    std::vector<double> phi;
    std::vector<double> weight;  // normalized exp(2 s phi)
};
TimeWeightLevels time_weight_levels(const TimeWeightSpec& spec, const SpaceTimeGrid& grid);

}  // namespace cmfg
