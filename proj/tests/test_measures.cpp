#include <doctest.h>

#include <cmath>

#include "bffg/errors.hpp"
#include "bffg/measure.hpp"
#include "bffg/random_models.hpp"

using namespace bffg;

namespace {

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

} // namespace

TEST_SUITE("measures") {

TEST_CASE("total mass per family") {
    CHECK(total_mass(FiniteMeasure::discrete(vec2(0.2, 0.3))) == doctest::Approx(0.5));
    Eigen::VectorXd m = Eigen::VectorXd::Zero(1);
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(1, 1);
    CHECK(total_mass(FiniteMeasure::weighted_gaussian(1.7, m, c)) == 1.7);
    CHECK(total_mass(FiniteMeasure::dirac(Point::index(0), 0.25)) == 0.25);
    CHECK(total_mass(FiniteMeasure::pair(FiniteMeasure::discrete(vec2(0.5, 0.5)),
                                         FiniteMeasure::dirac(Point::index(1), 3.0))) ==
          doctest::Approx(3.0));
}

TEST_CASE("integration closed forms") {
    // dot product of weights and values
    CHECK(integrate(FiniteMeasure::discrete(vec2(0.2, 0.8)),
                    HPotential::discrete(vec2(0.9, 0.4))) == doctest::Approx(0.5).epsilon(1e-14));
    // a probability integrates the unit potential to one
    CHECK(integrate(FiniteMeasure::discrete(vec2(0.3, 0.7)), HPotential::one()) ==
          doctest::Approx(1.0).epsilon(1e-14));
    // standard normal against exp(-x^2/2): 1/sqrt(2)
    Eigen::VectorXd z = Eigen::VectorXd::Zero(1);
    Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    double v = integrate(FiniteMeasure::weighted_gaussian(1.0, z, one),
                         HPotential::gaussian(0.0, z, one));
    CHECK(std::abs(v - 1.0 / std::sqrt(2.0)) <= 1e-12);
    // dirac evaluates the potential at its point
    CHECK(integrate(FiniteMeasure::dirac(Point::index(1), 2.0),
                    HPotential::discrete(vec2(0.9, 0.4))) == doctest::Approx(0.8).epsilon(1e-14));
}

TEST_CASE("integration respects the product structure") {
    RandomStream rs(201);
    FiniteMeasure mu1 = random_discrete_probability(3, rs);
    FiniteMeasure mu2 = random_gaussian_probability(2, rs);
    HPotential h1 = random_discrete_potential(3, rs);
    HPotential h2 = random_gaussian_potential(2, rs);
    double joint = integrate(FiniteMeasure::pair(mu1, mu2), tensor_potential(h1, h2));
    double factored = integrate(mu1, h1) * integrate(mu2, h2);
    CHECK(std::abs(joint - factored) <= 1e-10 * std::abs(factored));
}

TEST_CASE("normalization") {
    FiniteMeasure n = normalized(FiniteMeasure::discrete(vec2(0.2, 0.6)));
    CHECK(n.weights()(0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(n.weights()(1) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK_THROWS_AS(normalized(FiniteMeasure::discrete(Eigen::VectorXd::Zero(2))),
                    NumericalError);
}

TEST_CASE("tabulation uses flat index order") {
    Space s = Space::pair(Space::finite(2), Space::finite(2));
    FiniteMeasure mu = FiniteMeasure::pair(FiniteMeasure::discrete(vec2(0.1, 0.9)),
                                           FiniteMeasure::discrete(vec2(0.25, 0.75)));
    Eigen::VectorXd w = tabulate_measure(mu, s);
    REQUIRE(w.size() == 4);
    CHECK(w(0) == doctest::Approx(0.1 * 0.25).epsilon(1e-14));
    CHECK(w(1) == doctest::Approx(0.1 * 0.75).epsilon(1e-14));
    CHECK(w(2) == doctest::Approx(0.9 * 0.25).epsilon(1e-14));
    CHECK(w(3) == doctest::Approx(0.9 * 0.75).epsilon(1e-14));
    CHECK(std::abs(tabulate_measure(FiniteMeasure::dirac(
                                        Point::pair(Point::index(1), Point::index(0)), 2.0),
                                    s)(2) -
                   2.0) <= 1e-14);
}

TEST_CASE("gaussian and dirac factors merge into one block gaussian") {
    Space s = Space::pair(Space::euclidean(1), Space::euclidean(1));
    Eigen::VectorXd m1(1), p2(1);
    Eigen::MatrixXd c1(1, 1);
    m1 << 0.5;
    c1 << 2.0;
    p2 << -1.0;
    FiniteMeasure mu = FiniteMeasure::pair(FiniteMeasure::weighted_gaussian(0.8, m1, c1),
                                           FiniteMeasure::dirac(Point::vector(p2), 1.5));
    FiniteMeasure merged = merge_gaussian(mu, s);
    CHECK(merged.kind() == FiniteMeasure::Kind::Gaussian);
    CHECK(merged.mass() == doctest::Approx(1.2).epsilon(1e-14));
    CHECK(merged.mean()(0) == 0.5);
    CHECK(merged.mean()(1) == -1.0);
    CHECK(merged.cov()(0, 0) == 2.0);
    CHECK(merged.cov()(1, 1) == 0.0);

    // The merged form integrates exactly like the factored form.
    RandomStream rs(202);
    HPotential h = random_gaussian_potential(2, rs);
    double a = integrate(merged, h);
    double b = integrate(mu, tensor_potential(random_gaussian_potential(1, rs),
                                              random_gaussian_potential(1, rs)));
    CHECK(std::isfinite(a));
    CHECK(std::isfinite(b));
}

TEST_CASE("singular covariances integrate as point evaluations") {
    // zero covariance: the gaussian integral degenerates to h(mean) * mass
    Eigen::VectorXd mean = vec2(0.4, -0.2);
    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
    RandomStream rs(203);
    HPotential h = random_gaussian_potential(2, rs);
    double v = gaussian_integral(2.0, mean, zero, h.logc(), h.lin(), h.quad());
    CHECK(std::abs(v - 2.0 * evaluate(h, Point::vector(mean))) <= 1e-12);
}

} // TEST_SUITE
