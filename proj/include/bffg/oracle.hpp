#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bffg/kernel.hpp"
#include "bffg/potential.hpp"
#include "bffg/tree.hpp"

namespace bffg {

// Reference implementations used to validate the main computational paths.
// They read raw kernel parameters and recompute everything from first
// principles; they deliberately share no pushforward/pullback/optic code.

// Posterior over all latent assignments of a fully finite tree, by explicit
// path enumeration. `node_order` lists the latent nodes (declaration order);
// `joint` is indexed mixed-radix with node_order[0] most significant.
struct EnumeratedPosterior {
    std::vector<std::string> node_order;
    std::vector<double> joint;
    std::map<std::string, Eigen::VectorXd> marginals;
    double evidence = 0.0;
};

// pre: every node space finite; at most 1e7 latent assignments.
EnumeratedPosterior brute_force_smoother(const TreeModel& t);

struct SmoothedMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

// Textbook Kalman filter (Joseph-form update) plus Rauch-Tung-Striebel
// backward pass for the chain x_{i+1} = B_i x_i + beta_i + noise, started at
// the known root value. observations[i] optionally observes node i+1 through a
// linear-Gaussian kernel. Returns moments for nodes 1..n.
std::vector<SmoothedMoments> rts_smoother(
    const std::vector<Kernel>& chain,
    const std::vector<std::optional<ObservationModel>>& observations,
    const Eigen::VectorXd& root_value);

// integral of h(y) N(y; Bx + beta, Q) dy for one-dimensional k and h, by
// adaptive Gauss-Kronrod quadrature on [mean - 12 sd, mean + 12 sd] (the
// discarded tails are below 1e-30). Absolute accuracy target 1e-10.
double quadrature_pullback_1d(const Kernel& k, const HPotential& h, double x);

} // namespace bffg
