#pragma once

#include <optional>
#include <vector>

#include "cmfg/field.hpp"

namespace cmfg {

// Second-order central Laplacian with homogeneous Neumann data imposed by
// reflecting the first interior node into the ghost node.
SpatialField laplacian_neumann(const SpatialField& f);
ScalarField laplacian_neumann(const ScalarField& f);

// One entry per spatial axis. Central differences; the normal component is
// exactly 0 on the boundary under reflection.
std::vector<SpatialField> gradient_neumann(const SpatialField& f);
std::vector<ScalarField> gradient_neumann(const ScalarField& f);

// d^2 f / dx_a dx_b. Diagonal entries use the Neumann stencil, mixed entries
// iterate the central gradient.
SpatialField second_derivative(const SpatialField& f, int a, int b);
ScalarField second_derivative(const ScalarField& f, int a, int b);

// Central in the interior levels, first-order one-sided at k = 0 and k = nt-1.
ScalarField time_derivative(const ScalarField& f);

// Pointwise helpers on gradients and Hessians.
ScalarField grad_squared(const ScalarField& f);
SpatialField grad_squared(const SpatialField& f);
ScalarField hessian_squared(const ScalarField& f);

}  // namespace cmfg
