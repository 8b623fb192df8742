#include <doctest.h>

#include <cmath>

#include "bffg/errors.hpp"
#include "bffg/potential.hpp"
#include "bffg/random_models.hpp"

using namespace bffg;

namespace {

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

} // namespace

TEST_SUITE("potentials") {

TEST_CASE("evaluation per family") {
    CHECK(evaluate(HPotential::one(), Point::index(5)) == 1.0);
    CHECK(evaluate(HPotential::discrete(vec2(0.2, 0.8)), Point::index(1)) == 0.8);

    Eigen::VectorXd x(1), f = Eigen::VectorXd::Zero(1);
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(1, 1);
    x << 2.0;
    double v = evaluate(HPotential::gaussian(0.0, f, h), Point::vector(x));
    CHECK(std::abs(v - std::exp(-2.0)) <= 1e-15);
    CHECK(log_evaluate(HPotential::gaussian(0.0, f, h), Point::vector(x)) ==
          doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(log_evaluate(HPotential::discrete(vec2(0.0, 1.0)), Point::index(0)) ==
          -std::numeric_limits<double>::infinity());
}

TEST_CASE("construction guards") {
    CHECK_THROWS_AS(HPotential::discrete(Eigen::VectorXd::Zero(2)), ModelError);
    CHECK_THROWS_AS(HPotential::discrete(vec2(-0.1, 1.0)), ModelError);
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.5, 0.2, 1.0;
    CHECK_THROWS_AS(HPotential::gaussian(0.0, Eigen::VectorXd::Zero(2), asym), ModelError);
}

TEST_CASE("tensor evaluates factorwise") {
    HPotential g1 = HPotential::discrete(vec2(0.2, 0.8));
    HPotential g2 = HPotential::discrete(vec2(0.5, 0.25));
    HPotential g = tensor_potential(g1, g2);
    CHECK(g.kind() == HPotential::Kind::Product);
    CHECK(evaluate(g, Point::pair(Point::index(1), Point::index(0))) ==
          doctest::Approx(0.4).epsilon(1e-14));
    CHECK(evaluate(tensor_potential(HPotential::one(), g2),
                   Point::pair(Point::index(7), Point::index(1))) ==
          doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("tensor is associative up to reassociation of the point") {
    RandomStream rs(101);
    HPotential a = random_discrete_potential(2, rs);
    HPotential b = random_gaussian_potential(2, rs);
    HPotential c = random_discrete_potential(3, rs);
    HPotential left = tensor_potential(tensor_potential(a, b), c);
    HPotential right = tensor_potential(a, tensor_potential(b, c));
    for (int i = 0; i < 10; ++i) {
        Point pa = Point::index(i % 2);
        Point pb = Point::vector(vec2(0.3 * i, -0.1 * i));
        Point pc = Point::index(i % 3);
        double vl = evaluate(left, Point::pair(Point::pair(pa, pb), pc));
        double vr = evaluate(right, Point::pair(pa, Point::pair(pb, pc)));
        CHECK(std::abs(vl - vr) <= 1e-12 * std::max(1.0, std::abs(vl)));
    }
}

TEST_CASE("pointwise product multiplies values") {
    HPotential d = pointwise_product(HPotential::discrete(vec2(0.2, 0.8)),
                                     HPotential::discrete(vec2(0.5, 0.5)));
    CHECK(d.values()(0) == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(d.values()(1) == doctest::Approx(0.4).epsilon(1e-14));

    RandomStream rs(102);
    HPotential g1 = random_gaussian_potential(2, rs);
    HPotential g2 = random_gaussian_potential(2, rs);
    HPotential g = pointwise_product(g1, g2);
    Point x = Point::vector(vec2(0.7, -0.4));
    CHECK(std::abs(evaluate(g, x) - evaluate(g1, x) * evaluate(g2, x)) <= 1e-12);

    CHECK(pointwise_product(HPotential::one(), g1).kind() == HPotential::Kind::Gaussian);
}

TEST_CASE("flat and structured representations evaluate alike") {
    Space s = Space::pair(Space::finite(2), Space::finite(3));
    HPotential g = tensor_potential(HPotential::discrete(vec2(0.2, 0.8)),
                                    HPotential::discrete(Eigen::VectorXd::LinSpaced(3, 1.0, 3.0)));
    HPotential flat = flatten_potential(g, s);
    CHECK(flat.kind() == HPotential::Kind::Discrete);
    REQUIRE(flat.values().size() == 6);
    Eigen::VectorXd tab = tabulate(g, s);
    for (std::int64_t i = 0; i < 6; ++i) {
        Point x = Point::unflatten_index(i, s);
        CHECK(std::abs(tab(i) - evaluate(g, x)) <= 1e-14);
        CHECK(std::abs(flat.values()(i) - evaluate(g, x)) <= 1e-14);
        CHECK(std::abs(evaluate_on(flat, s, x) - evaluate(g, x)) <= 1e-14);
        CHECK(std::abs(evaluate_on(g, s, Point::index(i)) - evaluate(g, x)) <= 1e-14);
    }
}

TEST_CASE("gaussian products flatten to one quadratic form") {
    RandomStream rs(103);
    HPotential g1 = random_gaussian_potential(2, rs);
    HPotential g2 = random_gaussian_potential(1, rs);
    Space s = Space::pair(Space::euclidean(2), Space::euclidean(1));
    HPotential flat = flatten_potential(tensor_potential(g1, g2), s);
    CHECK(flat.kind() == HPotential::Kind::Gaussian);
    CHECK(flat.gaussian_dim() == 3);
    Eigen::VectorXd xa = vec2(0.3, -0.9), xb(1);
    xb << 1.2;
    Point structured = Point::pair(Point::vector(xa), Point::vector(xb));
    Eigen::VectorXd joined(3);
    joined << 0.3, -0.9, 1.2;
    double expected = evaluate(g1, Point::vector(xa)) * evaluate(g2, Point::vector(xb));
    CHECK(std::abs(evaluate(flat, Point::vector(joined)) - expected) <= 1e-12);
    CHECK(std::abs(evaluate_on(flat, s, structured) - expected) <= 1e-12);
}

} // TEST_SUITE
