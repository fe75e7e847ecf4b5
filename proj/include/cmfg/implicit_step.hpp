#pragma once

#include <span>
#include <vector>

#include "cmfg/field.hpp"

namespace cmfg {

// Solves (I - tau * Lap_h + tau * diag(shift)) w = rhs with the reflected
// Neumann Laplacian. 1D: tridiagonal elimination. 2D: conjugate gradient in
// the trapezoid-weighted inner product, where the operator is self-adjoint.
// Returns the number of CG iterations (0 for the direct 1D path).
int implicit_neumann_step(const SpaceTimeGrid& grid, double tau, std::span<const double> shift,
                          std::span<const double> rhs, std::span<double> w, double cg_tol = 1e-13);

// Thomas algorithm for a general tridiagonal system; sub[0] and sup[n-1] unused.
void solve_tridiagonal(std::span<const double> sub, std::span<const double> diag, std::span<const double> sup,
                       std::span<const double> rhs, std::span<double> x);

}  // namespace cmfg
