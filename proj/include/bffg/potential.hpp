#pragma once

#include <vector>

#include <Eigen/Dense>

#include "bffg/space.hpp"

namespace bffg {

// Nonnegative function on a space: the objects transported by backward passes.
// Families:
//   One       — the constant function 1 on any space
//   Discrete  — a value per state of a finite space
//   Gaussian  — exp(logc + F.x - x.Hx/2), H symmetric
//   Product   — g1(x1) * g2(x2) * ... on a product space
class HPotential {
public:
    enum class Kind { One, Discrete, Gaussian, Product };

    static HPotential one();
    // Entries >= 0, at least one > 0.
    static HPotential discrete(Eigen::VectorXd values);
    // H is symmetrized on construction; asymmetry beyond 1e-10 is rejected.
    static HPotential gaussian(double logc, Eigen::VectorXd F, Eigen::MatrixXd H);
    static HPotential product(std::vector<HPotential> parts);
    static HPotential pair(HPotential a, HPotential b);

    Kind kind() const { return kind_; }
    bool is_one() const { return kind_ == Kind::One; }

    const Eigen::VectorXd& values() const; // Discrete
    double logc() const;                   // Gaussian
    const Eigen::VectorXd& lin() const;    // Gaussian, the F coefficient
    const Eigen::MatrixXd& quad() const;   // Gaussian, the H coefficient
    int gaussian_dim() const;
    const std::vector<HPotential>& parts() const; // Product

private:
    HPotential() = default;
    Kind kind_ = Kind::One;
    Eigen::VectorXd values_;
    double logc_ = 0.0;
    Eigen::VectorXd lin_;
    Eigen::MatrixXd quad_;
    std::vector<HPotential> parts_;
};

// h(x) for a point whose structure matches the potential directly
// (Discrete expects Index, Gaussian expects Vector, Product expects Tuple).
double evaluate(const HPotential& h, const Point& x);
// log h(x); -inf where h(x) = 0.
double log_evaluate(const HPotential& h, const Point& x);

// g1 (.) g2: evaluates as g1(x1)*g2(x2) on the product space.
HPotential tensor_potential(const HPotential& g1, const HPotential& g2);

// Pointwise product of two potentials on the same space.
HPotential pointwise_product(const HPotential& a, const HPotential& b);

// Space-aware evaluation: aligns flat and structured representations, e.g. a
// flat Discrete potential over a product of finite spaces evaluated at a tuple.
double evaluate_on(const HPotential& h, const Space& s, const Point& x);
double log_evaluate_on(const HPotential& h, const Space& s, const Point& x);

// Values of h at every point of a fully finite space, in flat index order.
Eigen::VectorXd tabulate(const HPotential& h, const Space& s);

// Collapse to a single family over the flattened space:
// One stays One; on fully finite spaces products become one Discrete vector
// (Kronecker); on fully Euclidean spaces products become one Gaussian
// (direct sum of quadratic forms).
HPotential flatten_potential(const HPotential& h, const Space& s);

} // namespace bffg
