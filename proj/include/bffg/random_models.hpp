#pragma once

#include <Eigen/Dense>

#include "bffg/kernel.hpp"
#include "bffg/measure.hpp"
#include "bffg/potential.hpp"
#include "bffg/random_stream.hpp"
#include "bffg/space.hpp"

namespace bffg {

// Well-conditioned random model ingredients for randomized verification:
// stochastic matrices with strictly positive entries, Gaussian kernels and
// potentials with bounded-away-from-singular curvature, probability measures.

double uniform_in(RandomStream& rs, double lo, double hi);

Eigen::MatrixXd random_stochastic_matrix(int rows, int cols, RandomStream& rs);

Kernel random_discrete_kernel(int n_from, int n_to, RandomStream& rs);
Kernel random_lg_kernel(int d_from, int d_to, RandomStream& rs);

HPotential random_discrete_potential(int n, RandomStream& rs);
HPotential random_gaussian_potential(int d, RandomStream& rs);

FiniteMeasure random_discrete_probability(int n, RandomStream& rs);
FiniteMeasure random_gaussian_probability(int d, RandomStream& rs);

// A point of the space: uniform state index, coordinates in [-2, 2], or a
// tuple of such, matching the space's shape.
Point random_point(const Space& s, RandomStream& rs);

} // namespace bffg
