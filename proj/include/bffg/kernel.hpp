#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "bffg/measure.hpp"
#include "bffg/potential.hpp"
#include "bffg/random_stream.hpp"
#include "bffg/space.hpp"

namespace bffg {

// A Markov kernel between a source and a target space. Families:
//   Discrete       — row-stochastic matrix over finite spaces
//   LinearGaussian — y | x ~ N(Bx + beta, Q), Q symmetric positive definite
//   Identity       — deterministic copy, source = target
//   Duplication    — deterministic x -> (x, x), target = source x source
//   Sequence       — chained kernels (sampling and fold-style transport only)
//   Product        — independent factors acting componentwise on product spaces
//
// Immutable after construction (including the cached Cholesky factor of Q);
// copies are cheap shared handles.
class Kernel {
public:
    enum class Kind { Discrete, LinearGaussian, Identity, Duplication, Sequence, Product };

    // Rows must sum to 1 within 1e-8 (then renormalized exactly) and entries
    // must be nonnegative; larger deviations are rejected.
    static Kernel discrete(Eigen::MatrixXd row_stochastic);
    // Same, with explicit (possibly product) finite spaces whose flat sizes
    // must match the matrix shape.
    static Kernel discrete_on(Space source, Space target, Eigen::MatrixXd row_stochastic);

    static Kernel linear_gaussian(Eigen::MatrixXd B, Eigen::VectorXd beta, Eigen::MatrixXd Q);
    static Kernel linear_gaussian_on(Space source, Space target, Eigen::MatrixXd B,
                                     Eigen::VectorXd beta, Eigen::MatrixXd Q);

    static Kernel identity(Space s);
    static Kernel duplication(Space s);
    static Kernel sequence(std::vector<Kernel> steps);
    static Kernel product(std::vector<Kernel> factors);

    Kind kind() const;
    const Space& source() const;
    const Space& target() const;

    const Eigen::MatrixXd& matrix() const;     // Discrete
    const Eigen::MatrixXd& transition() const; // LinearGaussian B
    const Eigen::VectorXd& shift() const;      // LinearGaussian beta
    const Eigen::MatrixXd& noise_cov() const;  // LinearGaussian Q
    const Eigen::LLT<Eigen::MatrixXd>& noise_chol() const;
    double noise_logdet() const;
    const std::vector<Kernel>& steps() const;   // Sequence
    const std::vector<Kernel>& factors() const; // Product

    // Deep structural equality (same family, same spaces, identical parameters).
    bool same_as(const Kernel& other) const;

private:
    struct Impl;
    Kernel(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<const Impl> impl_;
};

// An observation attached below a latent node: the edge kernel into the
// observed space plus the observed value.
struct ObservationModel {
    Kernel kernel;
    Point observed_value;
};

// Chapman-Kolmogorov composition: first k1, then k2. Closed forms where they
// exist; anything else degrades to a Sequence kernel.
Kernel compose_kernels(const Kernel& k1, const Kernel& k2);

// Kernel on the product of sources/targets acting independently per factor.
// Kronecker matrix for discrete pairs, block-diagonal for linear-Gaussian
// pairs, structural Product kernel otherwise. Never fails.
Kernel tensor_kernels(const Kernel& k1, const Kernel& k2);

// Law of the next state when the current state has law mu.
FiniteMeasure pushforward(const Kernel& k, const FiniteMeasure& mu);

// x -> integral of h(y) k(x, dy); transports potentials backward.
HPotential pullback(const Kernel& k, const HPotential& h);

// x -> transition density into the observed value.
HPotential observation_potential(const ObservationModel& om);

// One draw from k(x, .). Deterministic given the stream state; Sequence and
// Product kernels consume split child streams per step/factor.
Point sample_kernel(const Kernel& k, const Point& x, RandomStream& stream);

} // namespace bffg
