#pragma once

#include <optional>

#include "cmfg/field.hpp"

namespace cmfg {

enum class SpaceNorm { L2, H1 };

// Trapezoid rule over Omega (or omega when a mask is given).
double integrate_space(const SpatialField& f, const SubdomainMask* mask = nullptr);
double integrate_space(std::span<const double> level, const SpaceTimeGrid& grid, const SubdomainMask* mask = nullptr);

// Trapezoid rule over Omega x [t_lo, t_hi]; the window is the set of time
// levels inside it and must hold at least two of them.
double integrate_Q(const ScalarField& f, double t_lo, double t_hi, const SubdomainMask* mask = nullptr);
double integrate_Q(const ScalarField& f, const SubdomainMask* mask = nullptr);

// Trapezoid time weights on the window [t_lo, t_hi] (zero outside).
std::vector<double> time_weights(const SpaceTimeGrid& grid, double t_lo, double t_hi);

// (|u|^2 + |grad u|^2 + sum |d_i d_j u|^2 + |d_t u|^2) integrated over the
// window, square-rooted.
double h21_norm(const ScalarField& u, double t_lo, double t_hi, const SubdomainMask* mask = nullptr);
double h21_norm(const ScalarField& u);

double l2_norm(const ScalarField& u, double t_lo, double t_hi, const SubdomainMask* mask = nullptr);

double spatial_norm(const SpatialField& u, SpaceNorm kind);
double spatial_norm_at(const ScalarField& u, double t, SpaceNorm kind);

}  // namespace cmfg
