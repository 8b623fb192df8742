#pragma once

#include <vector>

#include <Eigen/Dense>

#include "bffg/potential.hpp"
#include "bffg/space.hpp"

namespace bffg {

// A finite (not necessarily normalized) measure. Families:
//   Discrete — a nonnegative weight per state of a finite space
//   Gaussian — mass * N(mean, cov), cov symmetric PSD
//   Dirac    — mass * delta_point
//   Product  — product measure of the factors
class FiniteMeasure {
public:
    enum class Kind { Discrete, Gaussian, Dirac, Product };

    static FiniteMeasure discrete(Eigen::VectorXd weights);
    static FiniteMeasure weighted_gaussian(double mass, Eigen::VectorXd mean, Eigen::MatrixXd cov);
    static FiniteMeasure dirac(Point point, double mass = 1.0);
    static FiniteMeasure product(std::vector<FiniteMeasure> parts);
    static FiniteMeasure pair(FiniteMeasure a, FiniteMeasure b);

    Kind kind() const { return kind_; }
    const Eigen::VectorXd& weights() const; // Discrete
    double mass() const;                    // Gaussian/Dirac
    const Eigen::VectorXd& mean() const;    // Gaussian
    const Eigen::MatrixXd& cov() const;     // Gaussian
    const Point& point() const;             // Dirac
    const std::vector<FiniteMeasure>& parts() const;

private:
    FiniteMeasure() = default;
    Kind kind_ = Kind::Discrete;
    Eigen::VectorXd weights_;
    double mass_ = 0.0;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
    std::vector<Point> point_; // 0 or 1 elements; Point has no default ctor
    std::vector<FiniteMeasure> parts_;
};

double total_mass(const FiniteMeasure& mu);

// integral of h against mu; exact closed forms per family pairing.
double integrate(const FiniteMeasure& mu, const HPotential& h);

// Total-mass-1 copy. Throws on zero mass.
FiniteMeasure normalized(const FiniteMeasure& mu);

// Weights of mu at every point of a fully finite space, in flat index order.
Eigen::VectorXd tabulate_measure(const FiniteMeasure& mu, const Space& s);

// Collapse a product of Gaussian/Dirac factors on a fully Euclidean space into
// one weighted Gaussian (block-diagonal covariance; Dirac blocks are zero).
FiniteMeasure merge_gaussian(const FiniteMeasure& mu, const Space& s);

// Closed form for  integral of exp(logc + F.x - x.Hx/2) d[mass*N(mean, cov)].
// Computed without inverting cov, so PSD (including singular) covariances work.
double gaussian_integral(double mass, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                         double logc, const Eigen::VectorXd& F, const Eigen::MatrixXd& H);

} // namespace bffg
