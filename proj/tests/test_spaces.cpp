#include <doctest.h>

#include "bffg/errors.hpp"
#include "bffg/space.hpp"

using namespace bffg;

TEST_SUITE("spaces") {

TEST_CASE("construction and structural equality") {
    Space f3 = Space::finite(3);
    Space e2 = Space::euclidean(2);
    Space p = Space::pair(f3, e2);
    CHECK(f3.kind() == Space::Kind::Finite);
    CHECK(f3.cardinality() == 3);
    CHECK(e2.dimension() == 2);
    CHECK(p.parts().size() == 2);
    CHECK(f3 == Space::finite(3));
    CHECK(f3 != Space::finite(4));
    CHECK(p == Space::pair(Space::finite(3), Space::euclidean(2)));
    CHECK(p != Space::pair(e2, f3));
    CHECK_THROWS_AS(Space::finite(0), ModelError);
    CHECK_THROWS_AS(Space::euclidean(0), ModelError);
    CHECK_THROWS_AS(Space::product({Space::finite(2)}), ModelError);
}

TEST_CASE("flat sizes multiply and add across products") {
    Space p = Space::product({Space::finite(2), Space::finite(3), Space::finite(4)});
    CHECK(p.all_finite());
    CHECK(p.flat_cardinality() == 24);
    Space q = Space::pair(Space::euclidean(2), Space::euclidean(3));
    CHECK(q.all_euclidean());
    CHECK(q.flat_dimension() == 5);
    CHECK_FALSE(Space::pair(Space::finite(2), Space::euclidean(1)).all_finite());
    CHECK_FALSE(Space::pair(Space::finite(2), Space::euclidean(1)).all_euclidean());
}

TEST_CASE("flat index is row-major with the leftmost factor most significant") {
    Space p = Space::pair(Space::finite(2), Space::finite(3));
    Point x = Point::pair(Point::index(1), Point::index(2));
    CHECK(x.flatten_index(p) == 5);
    CHECK(Point::pair(Point::index(0), Point::index(2)).flatten_index(p) == 2);
    for (std::int64_t flat = 0; flat < 6; ++flat)
        CHECK(Point::unflatten_index(flat, p).flatten_index(p) == flat);

    Space nested = Space::pair(Space::finite(2), Space::pair(Space::finite(2), Space::finite(2)));
    for (std::int64_t flat = 0; flat < 8; ++flat) {
        Point y = Point::unflatten_index(flat, nested);
        CHECK(y.valid_for(nested));
        CHECK(y.flatten_index(nested) == flat);
    }
}

TEST_CASE("flat vectors concatenate components in order") {
    Space p = Space::pair(Space::euclidean(2), Space::euclidean(1));
    Eigen::VectorXd a(2), b(1);
    a << 1.5, -2.0;
    b << 7.0;
    Point x = Point::pair(Point::vector(a), Point::vector(b));
    Eigen::VectorXd flat = x.flatten_vector(p);
    REQUIRE(flat.size() == 3);
    CHECK(flat(0) == 1.5);
    CHECK(flat(1) == -2.0);
    CHECK(flat(2) == 7.0);
    CHECK(Point::unflatten_vector(flat, p) == x);
}

TEST_CASE("points know which spaces they belong to") {
    CHECK(Point::index(2).valid_for(Space::finite(3)));
    CHECK_FALSE(Point::index(3).valid_for(Space::finite(3)));
    Eigen::VectorXd v(2);
    v << 0.0, 1.0;
    CHECK(Point::vector(v).valid_for(Space::euclidean(2)));
    CHECK_FALSE(Point::vector(v).valid_for(Space::euclidean(3)));
    CHECK_FALSE(Point::vector(v).valid_for(Space::finite(2)));
    Space p = Space::pair(Space::finite(2), Space::euclidean(2));
    CHECK(Point::pair(Point::index(0), Point::vector(v)).valid_for(p));
    CHECK_FALSE(Point::pair(Point::vector(v), Point::index(0)).valid_for(p));
}

TEST_CASE("mismatched flattening is rejected") {
    CHECK_THROWS_AS(Point::index(0).flatten_index(Space::euclidean(1)), ModelError);
    CHECK_THROWS_AS(Point::index(0).flatten_vector(Space::finite(2)), ModelError);
    CHECK_THROWS_AS(Point::unflatten_index(9, Space::finite(3)), ModelError);
    CHECK_THROWS_AS(Point::index(-1), ModelError);
}

} // TEST_SUITE
